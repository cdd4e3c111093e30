"""Config loading, canonical output formatting, and the CLI commands."""

import io
import json

import numpy as np
import pytest

import margint.cli as cli
from margint import NumericalError
from margint.cli import (
    ConfigError,
    dump_config,
    format_float,
    load_config,
    main,
    write_csv,
)

SMALL_CONFIG = {
    "simulate": {"horizon": 6.0, "step": 0.1, "seed": 77},
    "experiment": {"T_ladder": [40.0, 80.0, 160.0], "replicates": 2},
}


@pytest.fixture()
def small_config_file(tmp_path):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(SMALL_CONFIG))
    return str(p)


# ---------------------------------------------------------------------------
# config loading


def test_empty_config_gives_defaults():
    cfg = load_config({})
    assert cfg.simulate.d == 2
    assert cfg.simulate.model == "paper-desk"
    assert cfg.kernels.k == 2
    assert cfg.kernels.k_prime == 6
    assert cfg.bandwidths.mode == "mse"
    assert cfg.weights.support == (-0.9, 0.9)
    assert cfg.density.floor == pytest.approx(1e-3)
    assert cfg.density.delta == pytest.approx(0.25)
    assert cfg.experiment.replicates == 50
    assert cfg.experiment.T_ladder == (250.0, 500.0, 1000.0, 2000.0, 4000.0)


def test_zero_replicates_rejected_by_name():
    with pytest.raises(ConfigError, match="replicates"):
        load_config({"experiment": {"replicates": 0}})


def test_unknown_key_rejected_by_name():
    with pytest.raises(ConfigError, match="frobnicate"):
        load_config({"experiment": {"frobnicate": 1}})
    with pytest.raises(ConfigError, match="nonsense"):
        load_config({"nonsense": {}})


def test_invalid_values_name_the_key():
    with pytest.raises(ConfigError, match="simulate.step"):
        load_config({"simulate": {"step": -0.1}})
    with pytest.raises(ConfigError, match="bandwidths.c1"):
        load_config({"bandwidths": {"c1": 0.0}})
    with pytest.raises(ConfigError, match="kernels.k"):
        load_config({"kernels": {"k": 3}})
    with pytest.raises(ConfigError, match="simulate.model"):
        load_config({"simulate": {"model": "missing-preset"}})
    with pytest.raises(ConfigError, match="d"):
        load_config({"simulate": {"d": 3}})  # paper-desk needs d = 2
    with pytest.raises(ConfigError, match="experiment.T_ladder"):
        load_config({"experiment": {"T_ladder": [100.0, 50.0, 200.0]}})
    with pytest.raises(ConfigError, match="replicates"):
        load_config({"experiment": {"replicates": True}})


def test_config_round_trip():
    cfg = load_config(SMALL_CONFIG)
    again = load_config(dump_config(cfg))
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)


def test_config_from_file(small_config_file):
    cfg = load_config(small_config_file)
    assert cfg.simulate.horizon == 6.0
    assert cfg.experiment.T_ladder == (40.0, 80.0, 160.0)


def test_config_parse_failure(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(p))
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "absent.json"))


def test_rate_config_carries_experiment_fields():
    cfg = load_config(SMALL_CONFIG)
    rc = cfg.rate_config()
    assert rc.T_ladder == (40.0, 80.0, 160.0)
    assert rc.replicates == 2
    assert rc.mode == "mse"
    assert cfg.rate_config(mode="uniform").mode == "uniform"


# ---------------------------------------------------------------------------
# canonical formatting


def test_format_float_pinned():
    assert format_float(0.25) == "2.5e-1"
    assert format_float(0.0) == "0e0"
    assert format_float(1.0) == "1e0"
    assert format_float(-0.5) == "-5e-1"
    assert format_float(1234.0) == "1.234e3"


def test_format_float_round_trips():
    rng = np.random.default_rng(3)
    values = [0.1, 2.0 / 3.0, np.pi, 1e-17, -1e22, 5e-324]
    values += list(rng.standard_normal(50) * 10.0 ** rng.integers(-20, 20, 50))
    for v in values:
        assert float(format_float(v)) == v, v


def test_format_float_rejects_nonfinite():
    with pytest.raises(NumericalError):
        format_float(float("nan"))
    with pytest.raises(NumericalError):
        format_float(float("inf"))


def test_write_csv_empty_rows():
    buf = io.StringIO()
    write_csv(buf, ["a", "b"], [])
    assert buf.getvalue() == "a,b\n"


def test_write_csv_deterministic(tmp_path):
    rows = [(1, 0.25, "x"), (2, -0.5, "y")]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(str(p1), ["i", "v", "tag"], rows)
    write_csv(str(p2), ["i", "v", "tag"], rows)
    data = p1.read_bytes()
    assert data == p2.read_bytes()
    assert data == b"i,v,tag\n1,2.5e-1,x\n2,-5e-1,y\n"


def test_write_csv_cell_types():
    buf = io.StringIO()
    write_csv(buf, ["b", "n", "f"], [(True, np.int64(7), np.float64(0.125))])
    assert buf.getvalue().splitlines()[1] == "true,7,1.25e-1"


# ---------------------------------------------------------------------------
# commands (in-process)


def test_kernels_verify_stdout(capsys):
    rc = main(["kernels", "verify", "--order", "4"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "j,value"
    table = {int(r.split(",")[0]): float(r.split(",")[1]) for r in lines[1:]}
    assert table[0] == pytest.approx(1.0, abs=1e-10)
    for j in (1, 2, 3):
        assert abs(table[j]) < 1e-8
    assert abs(table[4]) > 1e-4


def test_simulate_deterministic(tmp_path, small_config_file):
    out1 = tmp_path / "path1.csv"
    out2 = tmp_path / "path2.csv"
    assert main(["simulate", "--config", small_config_file, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", small_config_file, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().splitlines()
    assert lines[0] == "t,x1,x2,y"
    assert len(lines) == 62  # 61 samples on [0, 6] at step 0.1, plus header
    first = lines[1].split(",")
    assert float(first[0]) == 0.0


def test_fit_writes_grid(tmp_path, small_config_file):
    out = tmp_path / "fit.csv"
    rc = main(["fit", "--config", small_config_file, "--grid", "3", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x1,x2,m_hat"
    assert len(lines) == 10  # 3**2 grid points plus header
    # Grid covers the evaluation box corners.
    assert lines[1].startswith("-1e0,-1e0,")
    assert lines[-1].startswith("1e0,1e0,")


def test_fit_grid_validation(small_config_file, capsys):
    rc = main(["fit", "--config", small_config_file, "--grid", "1", "--out", "x.csv"])
    assert rc == 2
    assert "--grid" in capsys.readouterr().err


def test_fit_additive_outputs(tmp_path, small_config_file):
    comp = tmp_path / "components.csv"
    ev = tmp_path / "eval.csv"
    rc = main([
        "fit-additive", "--config", small_config_file,
        "--out-components", str(comp), "--out-eval", str(ev),
    ])
    assert rc == 0
    clines = comp.read_text().splitlines()
    assert clines[0] == "l,x,eta_hat,eta_true"
    # 41-point default grid per axis, two axes.
    assert len(clines) == 1 + 2 * 41
    assert {r.split(",")[0] for r in clines[1:]} == {"1", "2"}
    elines = ev.read_text().splitlines()
    assert elines[0] == "x1,x2,m_hat,m_true"


def test_rates_outputs_and_summary(tmp_path, small_config_file):
    out = tmp_path / "rates.csv"
    summ = tmp_path / "summary.json"
    rc = main([
        "rates", "--config", small_config_file,
        "--out", str(out), "--summary", str(summ),
    ])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "T,error_statistic,replicate_spread,clamp_rate"
    assert len(lines) == 4
    payload = json.loads(summ.read_text())
    for key in ("mode", "slope", "slope_se", "intercept", "theoretical_slope",
                "T_ladder", "errors", "clamp_rates", "replicates", "base_seed"):
        assert key in payload
    assert payload["mode"] == "mse"
    assert payload["theoretical_slope"] == pytest.approx(-0.8)
    assert len(payload["errors"]) == 3


def test_rates_mode_flag(tmp_path, small_config_file):
    out = tmp_path / "rates.csv"
    summ = tmp_path / "summary.json"
    rc = main([
        "rates", "--config", small_config_file, "--mode", "uniform",
        "--out", str(out), "--summary", str(summ),
    ])
    assert rc == 0
    payload = json.loads(summ.read_text())
    assert payload["mode"] == "uniform"
    assert payload["theoretical_slope"] == pytest.approx(-0.4)


def test_rates_byte_identical_outputs(tmp_path, small_config_file):
    outs = []
    for tag in ("one", "two"):
        out = tmp_path / f"rates_{tag}.csv"
        summ = tmp_path / f"summary_{tag}.json"
        assert main([
            "rates", "--config", small_config_file,
            "--out", str(out), "--summary", str(summ),
        ]) == 0
        outs.append((out.read_bytes(), summ.read_bytes()))
    assert outs[0] == outs[1]


def test_compare_outputs(tmp_path, small_config_file):
    out = tmp_path / "compare.csv"
    summ = tmp_path / "cmp.json"
    rc = main([
        "compare", "--config", small_config_file,
        "--out", str(out), "--summary", str(summ),
    ])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "estimator,T,error_statistic,replicate_spread,clamp_rate"
    tags = [r.split(",")[0] for r in lines[1:]]
    assert tags == ["full"] * 3 + ["additive"] * 3
    payload = json.loads(summ.read_text())
    for key in ("slope_full", "slope_full_se", "slope_additive",
                "slope_additive_se", "gap"):
        assert key in payload
    assert payload["gap"] == pytest.approx(
        payload["slope_additive"] - payload["slope_full"]
    )


def test_exit_code_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"experiment": {"replicates": 0}}))
    rc = main(["rates", "--config", str(bad), "--out", str(tmp_path / "o.csv")])
    assert rc == 2
    assert "replicates" in capsys.readouterr().err


def test_exit_code_missing_config(tmp_path, capsys):
    rc = main(["simulate", "--config", str(tmp_path / "none.json"),
               "--out", str(tmp_path / "o.csv")])
    assert rc == 2


def test_exit_code_numerical_error(tmp_path, small_config_file, capsys,
                                   monkeypatch):
    def explode(cfg):
        raise NumericalError("rung T=40.0 replicate 1 (seed 99) failed: test")

    monkeypatch.setattr(cli, "run_rate_study", explode)
    rc = main(["rates", "--config", small_config_file,
               "--out", str(tmp_path / "o.csv")])
    assert rc == 3
    err = capsys.readouterr().err
    assert "numerical error" in err and "rung" in err
