"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import special

from subwass import bernstein, experiments, spectral, torus, transport
from subwass.bernstein import DriftStable, Stable, StableMix
from subwass.process import SimConfig, char_decay_check, simulate_arrays
from subwass.rng import stream

HERE = Path(__file__).parent


@pytest.fixture
def verdict(capsys):
    def emit(number, name, ok, detail, elapsed):
        with capsys.disabled():
            print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {name} | {detail} | {elapsed:.1f}s")
        return ok

    return emit


def test_c01_subordinator_laplace(verdict):
    start = time.perf_counter()
    worst = 0.0
    catalog = (Stable(0.5), DriftStable(drift=0.5, alpha=0.5), StableMix(alpha=0.75, beta=0.25, weight=0.3))
    for k, spec in enumerate(catalog):
        for i, t in enumerate((0.5, 1.0, 2.0)):
            for j, lam in enumerate((0.5, 1.0, 2.0)):
                chk = bernstein.laplace_mc_check(spec, t, lam, 100_000, stream(1, k, i, j))
                worst = max(worst, abs(chk.empirical - chk.exact) / chk.stderr)
    elapsed = time.perf_counter() - start
    ok = worst <= 4.0 and elapsed < 10
    assert verdict(1, "Laplace transform of S_t", ok, f"max |z| = {worst:.2f} (<= 4)", elapsed)


def test_c02_semigroup_decay(verdict):
    start = time.perf_counter()
    spec, worst = Stable(0.5), 0.0
    # |m|^2 = 2 has no representative in Z^1
    modes = {1: ([1], [2]), 3: ([1, 0, 0], [1, 1, 0], [2, 0, 0])}
    for d, ms in modes.items():
        for j, m in enumerate(ms):
            chk = char_decay_check(d, spec, m, 1.0, 10_000, seed=100 * d + j)
            worst = max(worst, abs(chk.empirical - chk.exact) / chk.stderr)
    elapsed = time.perf_counter() - start
    ok = worst <= 4.0 and elapsed < 30
    assert verdict(2, "E cos<m, X_t - X_0> = exp(-t B(|m|^2))", ok, f"max |z| = {worst:.2f} (<= 4)", elapsed)


def test_c03_exact_moment_oracle(verdict):
    start = time.perf_counter()
    spec, step, paths = Stable(0.5), 0.01, 1000
    basis = torus.enumerate_modes(1, 4).truncate(4)
    lam = basis.eigenvalues[1:].astype(float)
    worst = 0.0
    for t in (25.0, 50.0):
        cfg = SimConfig(d=1, spec=spec, horizon=t, step=step)
        psi = np.empty((paths, 3))
        for rep in range(paths):
            _, X = simulate_arrays(cfg, stream(3, int(t), rep))
            psi[rep] = spectral.psi_from_points(X, step, basis)
        sq = psi**2
        for i in range(3):
            exact = spectral.stationary_psi_second_moment(spec, lam[i], t)
            z = abs(sq[:, i].mean() - exact) / (sq[:, i].std(ddof=1) / math.sqrt(paths))
            worst = max(worst, z)
    elapsed = time.perf_counter() - start
    ok = worst <= 4.0 and elapsed < 300
    assert verdict(3, "E|psi_i(t)|^2 closed form", ok, f"max |z| = {worst:.2f} (<= 4)", elapsed)


@pytest.mark.parametrize("alpha,zeta_arg", [(0.5, 3), (1.0, 4)])
def test_c04_limit_constant(verdict, alpha, zeta_arg):
    start = time.perf_counter()
    spec = Stable(alpha)
    series = spectral.limit_sum(1, spec, 0.0, tol=1e-8)
    assert series.tail_bound < 1e-8
    assert abs(series.value - 4 * special.zeta(zeta_arg)) <= series.tail_bound
    t = 200.0
    vals = experiments.w2sq_replicas(1, spec, "stationary", t, 1000, seed=4, key=zeta_arg)
    rel = abs(t * vals.mean() - series.value) / series.value
    elapsed = time.perf_counter() - start
    ok = rel <= 0.15 and elapsed < 900
    detail = f"t E W2^2 = {t * vals.mean():.4f} vs 4 zeta({zeta_arg}) = {series.value:.6f}, rel {rel:.3f} (<= 0.15)"
    assert verdict(4, f"limit constant, Stable({alpha:g})", ok, detail, elapsed)


@pytest.mark.parametrize("d,alpha", [(3, 0.25), (4, 0.5)])
def test_c05_supercritical_proxy_slope(verdict, d, alpha):
    start = time.perf_counter()
    t_grid = 2.0 ** np.arange(7, 17)  # dyadic t in [1e2, 1e5]
    curve = experiments.upper_proxy_curve(d, Stable(alpha), t_grid)
    slope = experiments.fit_rate(curve).slope
    target = -2.0 / (d - 2.0 * alpha)
    elapsed = time.perf_counter() - start
    ok = abs(slope - target) <= 0.05 and elapsed < 60
    detail = f"slope {slope:.4f} vs {target:.4f} (+-0.05)"
    assert verdict(5, f"supercritical proxy exponent d={d}, alpha={alpha:g}", ok, detail, elapsed)


def test_c06_discretization_floor(verdict):
    start = time.perf_counter()
    res = transport.discretization_floor([2**k for k in range(5, 11)], d=1, p=2.0, replicas=50, seed=6)
    elapsed = time.perf_counter() - start
    ok = abs(res.exponent + 0.5) <= 0.1 and elapsed < 600
    assert verdict(6, "W2 discretization floor in N", ok, f"exponent {res.exponent:.4f} vs -0.5 (+-0.1)", elapsed)


def test_c07_critical_log_law(verdict):
    start = time.perf_counter()
    coarse = spectral.critical_log_curve(0.1 / 2.0 ** np.arange(10))
    fine = spectral.critical_log_curve(0.1 / 2.0 ** np.arange(0, 9.5, 0.5))
    change = abs(fine.slope - coarse.slope) / coarse.slope
    elapsed = time.perf_counter() - start
    ok = coarse.slope > 0 and fine.slope > 0 and change <= 0.10 and elapsed < 60
    detail = f"slopes {coarse.slope:.4f} -> {fine.slope:.4f}, change {change:.4f} (<= 0.10)"
    assert verdict(7, "critical log law", ok, detail, elapsed)


@pytest.mark.parametrize("r,limit", [(0.1, 0.10), (0.0, 0.12)])
def test_c08_clt(verdict, r, limit):
    start = time.perf_counter()
    res = experiments.clt_experiment(1, Stable(0.5), r, 200.0, 400, seed=8)
    elapsed = time.perf_counter() - start
    ok = res.ks_distance < limit and elapsed < 1800
    detail = f"statistic {res.statistic}, KS {res.ks_distance:.4f} (< {limit})"
    assert verdict(8, f"weighted chi-square limit, r={r:g}", ok, detail, elapsed)


def test_c09_start_uniformity(verdict):
    start = time.perf_counter()
    res = experiments.start_uniformity_check(1, Stable(0.5), 200.0, [0.0, math.pi / 2, math.pi], 200, seed=9)
    elapsed = time.perf_counter() - start
    ok = res.max_discrepancy < 3 and elapsed < 900
    assert verdict(9, "uniformity in the start point", ok, f"max discrepancy {res.max_discrepancy:.3f} (< 3)", elapsed)


PROPERTY_TESTS = [
    "test_transport.py::test_metric_axioms",
    "test_transport.py::test_plan_feasibility",
    "test_transport.py::test_permutation_oracle_uniform_small",
    "test_transport.py::test_linprog_oracle_general_weights",
    "test_torus.py::test_orthonormality",
    "test_torus.py::test_heat_kernel_normalised",
    "test_torus.py::test_plancherel",
    "test_torus.py::test_heat_kernel_semigroup",
    "test_torus.py::test_geodesic_metric_axioms",
    "test_bernstein.py::test_seeded_determinism",
    "test_process.py::test_determinism_and_stream_independence",
    "test_experiments.py::test_curve_threads_do_not_change_values",
    "test_cli.py::test_curve_run_is_reproducible",
    "test_spectral.py::test_sampler_determinism",
]


def test_c10_property_suites(verdict):
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_TESTS],
                          cwd=HERE, capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and elapsed < 300
    assert verdict(10, "property suites", ok, tail, elapsed)
