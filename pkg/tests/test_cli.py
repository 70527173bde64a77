"""Tests for config parsing/emission, result bundles, and the CLI
subcommands with their exit-code taxonomy."""

import filecmp
import json
import math

import numpy as np
import pytest

from artifact import cli as cl
from artifact.cli import (
    ConfigError,
    besov_selftest,
    cli_main,
    emit_config,
    emit_results,
    parse_config,
)
from artifact.experiments import DiagnosticSeries, ExperimentConfig, FitResult

MINIMAL = """\
[grid]
d = 2
n = 16
ldom = 6.0

[physics]
kappa = 50
"""

SMALL_RUN = """\
[grid]
d = 2
n = 32
ldom = 2pi

[physics]
kappa = 50

[init]
recipe = ill-prepared
amplitude = 1e-4
seed = 3
band = 0, 2

[time]
dt = 5e-3
tmax = 0.05
cadence = 0.025

[diagnostics]
besov = 0,2,1
alpha = 0
sigma = 1
"""


# ---------------------------------------------------------------------------
# parsing


def test_parse_minimal_applies_defaults():
    cfg = parse_config(MINIMAL)
    assert (cfg.d, cfg.n, cfg.ldom) == (2, 16, 6.0)
    assert cfg.kappas == (50.0,)
    assert cfg.preset == "simple"
    assert cfg.recipe == "gaussian"
    assert cfg.kind == "simulate"
    assert cfg.epsilon == 0.05
    assert cfg.delta == pytest.approx(0.2, rel=1e-12)
    assert cfg.p == pytest.approx(10.0, rel=1e-12)
    assert cfg.sigma == 1.0


def test_parse_d3_pair():
    cfg = parse_config(MINIMAL.replace("d = 2", "d = 3"))
    assert cfg.delta == 0.25
    assert cfg.p == 6.0


def test_parse_pi_values():
    assert cl._float("2pi") == 2.0 * math.pi
    assert cl._float("2*pi") == 2.0 * math.pi
    assert cl._float("pi") == math.pi
    assert cl._float("-pi") == -math.pi
    assert cl._float("0.5") == 0.5
    cfg = parse_config(MINIMAL.replace("ldom = 6.0", "ldom = 32pi"))
    assert cfg.ldom == 32.0 * math.pi


def test_parse_comments_whitespace_and_lists():
    text = """\
# leading comment
[grid]
d = 2   # inline comment
n = 16

ldom = 6.0
[physics]
kappa = 100, 1000, 10000
[diagnostics]
besov = 0,2,1; 1,2,inf
alpha = 0, 2
"""
    cfg = parse_config(text)
    assert cfg.kappas == (100.0, 1000.0, 10000.0)
    assert cfg.besov == ((0.0, 2.0, 1.0), (1.0, 2.0, math.inf))
    assert cfg.alphas == (0.0, 2.0)


def test_parse_misspelled_key_names_line():
    text = """\
[grid]
d = 2
n = 16
ldom = 6.0

[physics]
kapa = 50
"""
    with pytest.raises(ConfigError, match=r"line 7: unknown key 'kapa' in \[physics\]"):
        parse_config(text)


def test_parse_structural_errors():
    with pytest.raises(ConfigError, match=r"line 1: unknown section '\[gird\]'"):
        parse_config("[gird]\nd = 2\n")
    with pytest.raises(ConfigError, match="line 1: key 'd' appears before"):
        parse_config("d = 2\n")
    with pytest.raises(ConfigError, match="line 2: expected 'key = value'"):
        parse_config("[grid]\nd 2\n")
    with pytest.raises(ConfigError, match="line 3: duplicate key 'd'"):
        parse_config("[grid]\nd = 2\nd = 3\n")
    with pytest.raises(ConfigError, match="line 1: unclosed section"):
        parse_config("[grid\n")
    with pytest.raises(ConfigError, match="missing required key 'kappa'"):
        parse_config("[grid]\nd = 2\nn = 16\nldom = 6.0\n")
    with pytest.raises(ConfigError, match="missing required key 'ldom'"):
        parse_config("[grid]\nd = 2\nn = 16\n[physics]\nkappa = 50\n")


def test_parse_bad_values_name_key_and_line():
    with pytest.raises(ConfigError, match="line 2: could not parse 'd'"):
        parse_config("[grid]\nd = two\nn = 16\nldom = 6.0\n[physics]\nkappa = 50\n")
    bad_band = MINIMAL + "[init]\nband = 1\n"
    with pytest.raises(ConfigError, match="could not parse 'band'"):
        parse_config(bad_band)
    bad_besov = MINIMAL + "[diagnostics]\nbesov = 0,2\n"
    with pytest.raises(ConfigError, match="could not parse 'besov'"):
        parse_config(bad_besov)


def test_parse_range_violations_blame_the_key_line():
    text = MINIMAL + "\n[init]\namplitude = -1\n"
    nline = len(text.splitlines())
    with pytest.raises(ConfigError, match=f"line {nline}: amplitude must be"):
        parse_config(text)
    with pytest.raises(ConfigError, match="line 7: kappa must exceed 1"):
        parse_config(MINIMAL.replace("kappa = 50", "kappa = 0.5"))
    with pytest.raises(ConfigError, match="0 < dt"):
        parse_config(MINIMAL + "\n[time]\ndt = 0\n")


def test_config_roundtrip_through_emission():
    cfg = ExperimentConfig(
        d=2,
        n=48,
        ldom=32 * math.pi,
        kappas=(100.0, 1000.0, 10000.0),
        preset="variable",
        epsilon=0.04,
        recipe="well-prepared",
        amplitude=0.037,
        seed=123456789,
        band=(-3, 1),
        dt=1.25e-3,
        tmax=0.4,
        cadence=0.01,
        besov=((0.0, 2.0, 1.0), (1.0, 4.0, math.inf)),
        alphas=(0.0, 2.0),
        sigma=1.0,
        kind="sweep-kappa",
    )
    assert parse_config(emit_config(cfg)) == cfg
    assert parse_config(emit_config(parse_config(MINIMAL))) == parse_config(MINIMAL)


# ---------------------------------------------------------------------------
# result emission


def fake_series(n=3, status="completed", reason=""):
    times = np.arange(n, dtype=float) * 0.5
    cols = {
        "E": np.linspace(1.0, 2.0, n),
        "Wsup": np.full(n, 0.25),
        "B[0,2,1]": np.geomspace(1.0, 0.1, n),
    }
    return DiagnosticSeries(
        times=times,
        columns=cols,
        status=status,
        abort_time=None if status == "completed" else 0.5,
        abort_reason=reason,
    )


def test_emit_results_csv_schema(tmp_path):
    bundle = emit_results([("series", fake_series())], {}, None, tmp_path)
    text = (tmp_path / "series.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == 't,E,"B[0,2,1]"'
    assert "Wsup" not in text
    assert len(lines) == 4
    first = lines[1].split(",", 2)
    assert first[0] == "0" and first[1] == "1"
    # 17 significant digits survive a float round trip
    assert float(lines[2].split(",")[0]) == 0.5
    assert bundle.status == "completed"
    assert bundle.csv_paths == (tmp_path / "series.csv",)


def test_emit_results_empty_series_header_only(tmp_path):
    empty = DiagnosticSeries(
        times=np.array([]),
        columns={"E": np.array([])},
        status="aborted",
        abort_reason="gave up at t = 0",
    )
    bundle = emit_results([("series", empty)], {}, None, tmp_path)
    assert (tmp_path / "series.csv").read_text() == "t,E\n"
    assert bundle.status == "aborted"
    assert bundle.reason == "gave up at t = 0"
    summary = json.loads(bundle.summary_path.read_text())
    assert summary["status"] == "aborted"
    assert summary["reason"] == "gave up at t = 0"


def test_emit_results_deterministic_and_tidy(tmp_path):
    fits = {
        "t": FitResult(slope=-1.0, intercept=0.5, r_squared=0.99, window=(1, 2)),
        "kappa": None,
        "ratio": math.inf,
    }
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = parse_config(MINIMAL)
    emit_results([("series", fake_series())], fits, cfg, a)
    emit_results([("series", fake_series())], fits, cfg, b)
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    assert sorted(p.name for p in a.iterdir()) == ["series.csv", "summary.json"]
    summary = json.loads((a / "summary.json").read_text())
    assert summary["fits"]["t"]["slope"] == -1.0
    assert summary["fits"]["kappa"] is None
    assert summary["fits"]["ratio"] == "inf"
    assert summary["config"]["kappas"] == [50.0]
    assert parse_config(summary["config_echo"]) == cfg


def test_emit_results_unwritable_directory(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    with pytest.raises(OSError):
        emit_results([("series", fake_series())], {}, None, blocker / "sub")


# ---------------------------------------------------------------------------
# subcommands


def write_cfg(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_cli_simulate_bundle(tmp_path):
    cfg_path = write_cfg(tmp_path, SMALL_RUN)
    out = tmp_path / "out"
    assert cli_main(["simulate", "--config", cfg_path, "--out-dir", str(out)]) == 0
    header = (out / "series.csv").read_text().splitlines()[0]
    assert header.startswith('t,E,D,W,V,"B[0,2,1]",L2_Lam[0],Bneg[1]')
    assert "Wsup" not in header
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "completed"
    assert summary["kind"] == "simulate"
    assert summary["files"] == ["series.csv"]
    echoed = parse_config(summary["config_echo"])
    assert echoed == parse_config(SMALL_RUN)


def test_cli_seed_override_is_echoed(tmp_path):
    cfg_path = write_cfg(tmp_path, SMALL_RUN)
    out = tmp_path / "out"
    code = cli_main(
        ["simulate", "--config", cfg_path, "--out-dir", str(out), "--seed", "7"]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 7
    assert "seed = 7" in summary["config_echo"]


def test_cli_validation_error_exit_1(tmp_path):
    cfg_path = write_cfg(tmp_path, SMALL_RUN.replace("kappa =", "kapa ="))
    out = tmp_path / "out"
    assert cli_main(["simulate", "--config", cfg_path, "--out-dir", str(out)]) == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "error"
    assert "kapa" in summary["reason"]
    assert summary["files"] == []


def test_cli_missing_config_exit_1(tmp_path):
    out = tmp_path / "out"
    code = cli_main(
        ["simulate", "--config", str(tmp_path / "nope.cfg"), "--out-dir", str(out)]
    )
    assert code == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "error"
    assert "cannot read config" in summary["reason"]


def test_cli_runtime_abort_exit_2(tmp_path):
    text = SMALL_RUN.replace("n = 32", "n = 64")
    text = text.replace("kappa = 50", "kappa = 10000")
    text = text.replace("amplitude = 1e-4", "amplitude = 1e-3")
    text = text.replace("dt = 5e-3", "dt = 0.5")
    text = text.replace("tmax = 0.05", "tmax = 1.0")
    text = text.replace("cadence = 0.025", "cadence = 0.5")
    cfg_path = write_cfg(tmp_path, text)
    out = tmp_path / "out"
    assert cli_main(["simulate", "--config", cfg_path, "--out-dir", str(out)]) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "aborted"
    assert "CFLError" in summary["reason"]
    # the partial run is still a result: one recorded stamp at t = 0
    assert (out / "series.csv").read_text().count("\n") == 2


def test_cli_sweep_files_and_thread_determinism(tmp_path):
    text = SMALL_RUN.replace("kappa = 50", "kappa = 50, 100, 200")
    text = text.replace("n = 32", "n = 16")
    cfg_path = write_cfg(tmp_path, text)
    outs = []
    for tag, threads in (("t1", "1"), ("t3", "3")):
        out = tmp_path / tag
        code = cli_main(
            ["sweep-kappa", "--config", cfg_path, "--out-dir", str(out),
             "--threads", threads]
        )
        assert code == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == [
        "series-kappa-100.csv",
        "series-kappa-200.csv",
        "series-kappa-50.csv",
        "summary.json",
    ]
    for name in names:
        assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False), name
    summary = json.loads((outs[0] / "summary.json").read_text())
    assert summary["fits"]["expected_compressible"] == pytest.approx(-0.2)
    assert summary["fits"]["compressible"]["window"] == [50.0, 200.0]


def test_cli_sweep_aborted_member_exit_2(tmp_path):
    text = SMALL_RUN.replace("kappa = 50", "kappa = 10000, 20000, 40000")
    text = text.replace("amplitude = 1e-4", "amplitude = 1e-3")
    text = text.replace("n = 32", "n = 64").replace("dt = 5e-3", "dt = 0.5")
    text = text.replace("tmax = 0.05", "tmax = 1.0")
    text = text.replace("cadence = 0.025", "cadence = 0.5")
    cfg_path = write_cfg(tmp_path, text)
    out = tmp_path / "out"
    assert cli_main(["sweep-kappa", "--config", cfg_path, "--out-dir", str(out)]) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "aborted"
    assert "kappa=10000 aborted" in summary["reason"]


def test_cli_decay_smoke(tmp_path):
    text = """\
[grid]
d = 2
n = 32
ldom = 16pi

[physics]
kappa = 100

[init]
recipe = gaussian
amplitude = 1e-3
seed = 1
band = -3, -1

[time]
dt = 0.1
tmax = 10
cadence = 0.5

[diagnostics]
alpha = 0
sigma = 1
"""
    cfg_path = write_cfg(tmp_path, text)
    out = tmp_path / "out"
    assert cli_main(["decay", "--config", cfg_path, "--out-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "completed"
    assert "alpha=0" in summary["fits"]
    assert summary["fits"]["expected"]["0"] == -0.5
    assert summary["fits"]["bneg_ratio"] >= 1.0
    assert (out / "series.csv").exists()


def test_cli_decay_validation_exit_1(tmp_path):
    # ill-prepared data is not localized enough for the decay law
    text = SMALL_RUN.replace("recipe = ill-prepared", "recipe = ill-prepared")
    cfg_path = write_cfg(tmp_path, text)
    out = tmp_path / "out"
    assert cli_main(["decay", "--config", cfg_path, "--out-dir", str(out)]) == 1
    summary = json.loads((out / "summary.json").read_text())
    assert "gaussian" in summary["reason"]


def test_cli_kernel_window_rejected_exit_1(tmp_path):
    cfg_path = write_cfg(tmp_path, MINIMAL)
    out = tmp_path / "out"
    code = cli_main(
        ["kernel", "--config", cfg_path, "--out-dir", str(out), "--block", "2"]
    )
    assert code == 1
    summary = json.loads((out / "summary.json").read_text())
    assert "too narrow" in summary["reason"]


def test_cli_kernel_runs(tmp_path):
    cfg_path = write_cfg(tmp_path, MINIMAL.replace("kappa = 50", "kappa = 1e4"))
    out = tmp_path / "out"
    code = cli_main(
        ["kernel", "--config", cfg_path, "--out-dir", str(out), "--lp", "2"]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "completed"
    assert summary["fits"]["kappa"] is None
    assert abs(summary["fits"]["t"]["slope"]) <= 0.2
    assert summary["fits"]["expected_t"] == 0.0
    assert summary["files"] == []


def test_cli_strichartz_inadmissible_exit_1(tmp_path):
    text = MINIMAL.replace("kappa = 50", "kappa = 100, 1000, 10000")
    cfg_path = write_cfg(tmp_path, text)
    out = tmp_path / "out"
    code = cli_main(
        ["strichartz", "--config", cfg_path, "--out-dir", str(out),
         "--triple", "2,inf,0"]
    )
    assert code == 1
    summary = json.loads((out / "summary.json").read_text())
    assert "strict upper admissibility" in summary["reason"]


def test_cli_besov_selftest(tmp_path, capsys):
    assert cli_main(["besov-selftest", "--n", "32"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["ok"] is True
    out = tmp_path / "out"
    assert cli_main(["besov-selftest", "--n", "32", "--out-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "completed"
    assert summary["fits"]["selftest"]["ok"] is True


def test_besov_selftest_measurements():
    result = besov_selftest(n=32)
    assert result["ok"] is True
    assert result["partition_residual"] <= 1e-12
    assert result["reconstruction"] <= 1e-12
    assert result["orthogonality"] <= 1e-12
    assert result["bony"] <= 1e-12
    assert 0.7 <= result["bernstein_min"] <= result["bernstein_max"] <= 2.7
