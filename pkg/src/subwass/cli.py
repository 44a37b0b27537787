"""Command-line entry point.

    subwass run CONFIG.toml [--out DIR] [--seed N] [--threads N]
    subwass list-catalog

``run`` writes ``run.json``, ``curve.csv`` and ``plot.svg`` into the output
directory. Column layouts of ``curve.csv`` by experiment kind:

    curve, proxy     t, mean, stderr, replicas
    floor            N, mean, stderr, replicas
    uniformity       start, mean, stderr, replicas   (mean of t W2^2)
    constants        parameter, value, tail_bound    (parameter = lambda cutoff)
    critical         parameter, value, tail_bound    (parameter = r)
    clt              statistic, empirical_cdf, limit_cdf
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, bernstein, experiments, report, spectral, transport
from .config import ConfigError, RunConfig, check_regime, load
from .experiments import RegimeError
from .rng import token
from .torus import ResourceLimitError

SEED_SCHEME = "Philox(SeedSequence(master_seed, spawn_key=(group, replica)))"


def _tokens(seed: int, groups: int, replicas: int) -> list[list[int]]:
    return [[token(seed, g, r) for r in range(replicas)] for g in range(groups)]


def _fit_dict(fit: experiments.RateFit) -> dict:
    return {"model": fit.model, "slope": fit.slope, "intercept": fit.intercept,
            "r2": fit.r2, "slope_ci": list(fit.slope_ci)}


def _curve_rows(curve: experiments.RateCurve, replicas: int):
    return [(t, m, s, replicas) for t, m, s in zip(curve.t_values, curve.means, curve.stderrs)]


def execute(cfg: RunConfig, out: Path) -> dict:
    """Run one experiment, writing its artifacts under ``out``; returns the run record."""
    check_regime(cfg)
    out.mkdir(parents=True, exist_ok=True)
    p, kind, seed, threads = cfg.params, cfg.run.kind, cfg.run.seed, cfg.run.threads
    spec = cfg.spec
    timings: dict[str, float] = {}
    outputs: dict = {}
    seeds: dict = {"master": seed, "scheme": SEED_SCHEME}
    clock = time.perf_counter()

    if kind == "curve":
        start = p.start if isinstance(p.start, str) else np.asarray(p.start)
        curve = experiments.convergence_curve(p.d, spec, start, p.t_grid, p.replicas, p.estimator,
                                              seed, p.step, p.max_atoms, threads)
        timings["simulate"] = time.perf_counter() - clock
        fit = experiments.fit_rate(curve) if len(p.t_grid) >= 4 else None
        seeds["replica_tokens"] = _tokens(seed, len(p.t_grid), p.replicas)
        outputs = {"curve": {"t": curve.t_values, "mean": curve.means, "stderr": curve.stderrs},
                   "t_times_mean": curve.t_values * curve.means,
                   "fit": _fit_dict(fit) if fit else None}
        if p.d < bernstein.critical_dimension(spec):
            outputs["limit_constant"] = spectral.limit_sum(p.d, spec, 0.0, p.tol).value
        report.write_csv(out / "curve.csv", ["t", "mean", "stderr", "replicas"], _curve_rows(curve, p.replicas))
        report.loglog_plot(out / "plot.svg", curve.t_values, curve.means, curve.stderrs,
                           (fit.slope, fit.intercept) if fit else None, title=bernstein.label(spec))

    elif kind == "proxy":
        curve = experiments.upper_proxy_curve(p.d, spec, p.t_grid, p.schedule)
        model = "power_log" if curve.meta["schedule"] == "critical" else "power"
        fit = experiments.fit_rate(curve, model) if len(p.t_grid) >= 4 else None
        outputs = {"curve": {"t": curve.t_values, "value": curve.means},
                   "schedule": curve.meta["schedule"], "lambda_max": curve.meta["lambda_max"],
                   "fit": _fit_dict(fit) if fit else None}
        if curve.meta["schedule"] == "power":
            alpha = bernstein.class_tags(spec).lower_index
            outputs["predicted_slope"] = -2.0 / (p.d - 2.0 * alpha)
        report.write_csv(out / "curve.csv", ["t", "mean", "stderr", "replicas"], _curve_rows(curve, 0))
        report.loglog_plot(out / "plot.svg", curve.t_values, curve.means, None,
                           (fit.slope, fit.intercept) if fit and model == "power" else None,
                           ylabel="r_t + E Xi / t", title=bernstein.label(spec))

    elif kind == "clt":
        res = experiments.clt_experiment(p.d, spec, p.r, p.t, p.replicas, seed, step=p.step, threads=threads)
        seeds["replica_tokens"] = _tokens(seed, 1, p.replicas)
        seeds["reference_token"] = token(seed, 1)
        xs = np.sort(res.samples)
        ecdf = np.arange(1, len(xs) + 1) / len(xs)
        ref = np.sort(res.reference)
        lcdf = np.searchsorted(ref, xs, side="right") / len(ref)
        mean, var = spectral.chisq_moments(p.d, spec, p.r)
        outputs = {"ks_distance": res.ks_distance, "statistic": res.statistic,
                   "sample_mean": float(res.samples.mean()), "limit_mean": mean, "limit_variance": var}
        report.write_csv(out / "curve.csv", ["statistic", "empirical_cdf", "limit_cdf"], zip(xs, ecdf, lcdf))
        report.line_plot(out / "plot.svg", xs, ecdf, "statistic", "CDF", y2=lcdf,
                         labels=("replicas", "weighted chi-square"), title=f"KS = {res.ks_distance:.4f}")

    elif kind == "floor":
        res = transport.discretization_floor(p.n_grid, p.d, p.p, p.replicas, seed)
        outputs = {"N": res.n_values, "mean": res.means, "stderr": res.stderrs,
                   "exponent": res.exponent, "reference_size": res.reference_size}
        seeds["replica_tokens"] = _tokens(seed, len(p.n_grid), p.replicas)
        report.write_csv(out / "curve.csv", ["N", "mean", "stderr", "replicas"],
                         [(n, m, s, p.replicas) for n, m, s in zip(res.n_values, res.means, res.stderrs)])
        icpt = float(np.mean(np.log(res.means) - res.exponent * np.log(res.n_values)))
        report.loglog_plot(out / "plot.svg", res.n_values, res.means, res.stderrs, (res.exponent, icpt),
                           xlabel="N", ylabel=f"E W_{p.p:g}")

    elif kind == "critical":
        res = spectral.critical_log_curve(p.r_grid)
        outputs = {"r": res.r, "values": res.values, "tail_bounds": res.tail_bounds, "slope_vs_log_inv_r": res.slope}
        report.write_csv(out / "curve.csv", ["parameter", "value", "tail_bound"], zip(res.r, res.values, res.tail_bounds))
        x = np.log(1.0 / res.r)
        icpt = float(np.mean(res.values - res.slope * x))
        report.line_plot(out / "plot.svg", x, res.values, "log(1/r)", "sum", fit=(res.slope, icpt))

    elif kind == "constants":
        ls = spectral.limit_sum(p.d, spec, p.r, p.tol)
        outputs = {"value": ls.value, "tail_bound": ls.tail_bound, "lambda_max": ls.lambda_max, "r": p.r}
        cut = [2**k for k in range(2, int(math.log2(ls.lambda_max)) + 1)]
        partial = [spectral.expected_xi(p.d, spec, p.r, math.inf, c) for c in cut]
        report.write_csv(out / "curve.csv", ["parameter", "value", "tail_bound"],
                         [(c, s.value, s.tail_bound) for c, s in zip(cut, partial)])
        report.line_plot(out / "plot.svg", cut, [s.value for s in partial], "eigenvalue cutoff",
                         "partial sum", logx=True, title=f"limit {ls.value:.10g}")

    elif kind == "uniformity":
        res = experiments.start_uniformity_check(p.d, spec, p.t, p.starts, p.replicas, seed, step=p.step,
                                                 threads=threads)
        seeds["replica_tokens"] = _tokens(seed, len(p.starts), p.replicas)
        outputs = {"max_discrepancy": res.max_discrepancy, "starts": p.starts,
                   "t_times_mean": res.scaled_means, "stderr": res.scaled_stderrs}
        report.write_csv(out / "curve.csv", ["start", "mean", "stderr", "replicas"],
                         [(x, m, s, p.replicas) for x, m, s in zip(p.starts, res.scaled_means, res.scaled_stderrs)])
        report.line_plot(out / "plot.svg", p.starts, res.scaled_means, "start", "t E W2^2")

    timings["total"] = time.perf_counter() - clock
    record = {"config": cfg.model_dump(exclude_none=True), "version": __version__,
              "seeds": seeds, "outputs": outputs, "wall_time_s": timings}
    report.write_json(out / "run.json", record)
    return record


def _error(out: Path | None, kind: str, message: str, fields=None) -> int:
    rec = {"error": kind, "message": message}
    if fields:
        rec["fields"] = fields
    print(json.dumps(rec), file=sys.stderr)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        report.write_json(out / "error.json", rec)
    return 2


def regime_label(d: int, alpha: float) -> str:
    crit = 2.0 * (1.0 + alpha)
    if d < crit:
        return "subcritical: t E W2^2 -> sum 2/(lam B(lam))"
    if d == crit:
        return "critical: E W2^2 ~ log(t)/t"
    return f"supercritical, exponent {Fraction(2.0 / (d - 2.0 * alpha)).limit_denominator(1000)}"


def list_catalog() -> str:
    lines = [
        "Bernstein variants",
        "  stable        B(lam) = lam^alpha                            alpha in (0, 1]",
        "  drift_stable  B(lam) = drift*lam + lam^alpha                drift >= 0, alpha in (0, 1)",
        "  stable_mix    B(lam) = w*lam^alpha + (1-w)*lam^beta         alpha, beta in (0, 1], w in [0, 1]",
        "",
        "Regimes by dimension d and growth index alpha (critical dimension 2(1+alpha))",
        f"  {'d':>2} {'alpha':>6} {'2(1+a)':>7}  regime",
    ]
    for d in range(1, 5):
        for alpha in (0.25, 0.5, 0.75, 1.0):
            lines.append(f"  {d:>2} {alpha:>6g} {2 * (1 + alpha):>7g}  {regime_label(d, alpha)}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="subwass", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run the experiment described by a TOML config")
    run_p.add_argument("config", type=Path)
    run_p.add_argument("--out", type=Path, default=None)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--threads", type=int, default=None, help="worker threads (never changes results)")
    sub.add_parser("list-catalog", help="print Bernstein variants and the regime matrix")
    args = parser.parse_args(argv)

    if args.command == "list-catalog":
        print(list_catalog())
        return 0

    out = args.out
    try:
        cfg = load(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.threads is not None:
            overrides["threads"] = args.threads
        if overrides or args.out is not None:
            data = cfg.model_dump(exclude_none=True)
            data["run"].update(overrides)
            if args.out is not None:
                data["run"]["out"] = str(args.out)
            cfg = RunConfig.validated(data)
        out = Path(cfg.run.out) if cfg.run.out else Path("runs") / cfg.run.kind
        record = execute(cfg, out)
    except ConfigError as exc:
        return _error(out, "schema", str(exc), exc.fields)
    except (RegimeError, spectral.DivergenceError) as exc:
        return _error(out, "regime", str(exc))
    except (ResourceLimitError, transport.BudgetExceeded) as exc:
        return _error(out, "resource", str(exc))
    except ValueError as exc:
        return _error(out, "invalid", str(exc))
    except OSError as exc:
        return _error(None, "io", str(exc))
    print(json.dumps({"out": str(out), "outputs": list(record["outputs"])}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
