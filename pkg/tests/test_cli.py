import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from subwass import cli
from subwass.config import KINDS, ConfigError, RunConfig, load

CONSTANTS = """
[run]
kind = "constants"
seed = 1

[bernstein]
variant = "stable"
alpha = 0.5

[params]
d = 1
r = 0.0
"""

CURVE = """
[run]
kind = "curve"
seed = 7

[bernstein]
variant = "stable"
alpha = 0.5

[params]
d = 1
t_grid = [1.0, 2.0, 4.0, 8.0]
replicas = 5
"""


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_constants_run(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", str(_write(tmp_path, CONSTANTS)), "--out", str(out)]) == 0
    rec = json.loads((out / "run.json").read_text())
    value, tail = rec["outputs"]["value"], rec["outputs"]["tail_bound"]
    assert tail < 1e-8
    assert abs(value - 4 * special.zeta(3)) <= tail
    assert rec["version"] and rec["config"]["run"]["kind"] == "constants"
    assert (out / "curve.csv").read_text().startswith("parameter,value,tail_bound\n")
    assert (out / "plot.svg").exists()


def test_curve_run_is_reproducible(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = _write(tmp_path, CURVE)
    assert cli.main(["run", str(cfg), "--out", "a"]) == 0
    assert cli.main(["run", str(cfg), "--out", "b", "--threads", "3"]) == 0
    for name in ("curve.csv", "plot.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "curve.csv").read_text().splitlines()[0]
    assert header == "t,mean,stderr,replicas"
    rec = json.loads((tmp_path / "a" / "run.json").read_text())
    assert len(rec["seeds"]["replica_tokens"]) == 4 and len(rec["seeds"]["replica_tokens"][0]) == 5
    assert set(rec["wall_time_s"]) >= {"total"}
    # nothing is written outside the declared output directories
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a", "b", "cfg.toml"]


def test_seed_override_changes_output(tmp_path, capsys):
    cfg = _write(tmp_path, CURVE)
    cli.main(["run", str(cfg), "--out", str(tmp_path / "a")])
    cli.main(["run", str(cfg), "--out", str(tmp_path / "b"), "--seed", "8"])
    assert (tmp_path / "a" / "curve.csv").read_bytes() != (tmp_path / "b" / "curve.csv").read_bytes()


def test_schema_error_names_field(tmp_path, capsys):
    cfg = _write(tmp_path, CONSTANTS.replace("alpha = 0.5", "alpha = 1.5"))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) != 0
    rec = _err(capsys)
    assert rec["error"] == "schema" and "bernstein.alpha" in rec["fields"]
    assert json.loads((tmp_path / "o" / "error.json").read_text()) == rec


def test_unknown_field_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, CONSTANTS.replace("r = 0.0", "r = 0.0\nradius = 2"))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) != 0
    assert "params.radius" in _err(capsys)["fields"]


def test_regime_error(tmp_path, capsys):
    cfg = _write(tmp_path, CONSTANTS.replace("d = 1", "d = 3"))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) != 0
    rec = _err(capsys)
    assert rec["error"] == "regime" and "r=0 divergent: d >= 2(1+alpha)" in rec["message"]
    assert not (tmp_path / "o" / "run.json").exists()


def test_missing_file(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "nope.toml")]) != 0
    assert _err(capsys)["error"] == "io"


def test_list_catalog(capsys):
    assert cli.main(["list-catalog"]) == 0
    text = capsys.readouterr().out
    assert "stable_mix" in text
    assert cli.regime_label(1, 0.5).startswith("subcritical")
    assert cli.regime_label(3, 0.5).startswith("critical")
    assert cli.regime_label(4, 0.5) == "supercritical, exponent 2/3"


configs = st.builds(
    lambda kind, seed, alpha, d, r, reps, t_grid: {
        "run": {"kind": kind, "seed": seed, "threads": 2, "out": "x"},
        "bernstein": {"variant": "stable_mix", "alpha": alpha, "beta": 0.25, "weight": 0.5},
        "params": {"d": d, "r": r, "replicas": reps, "t_grid": t_grid},
    },
    st.sampled_from(KINDS), st.integers(0, 2**63), st.floats(0.01, 1.0), st.integers(1, 4),
    st.floats(0.0, 10.0), st.integers(1, 10**6), st.lists(st.floats(0.01, 1e6), min_size=1, max_size=6),
)


@settings(max_examples=100)
@given(configs)
def test_config_round_trip(data):
    cfg = RunConfig.validated(data)
    assert RunConfig.from_toml(cfg.to_toml()) == cfg


def test_load_invalid_toml(tmp_path):
    with pytest.raises(ConfigError):
        load(_write(tmp_path, "[run\nkind="))


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "configs").glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    from subwass.config import check_regime

    check_regime(load(path))
