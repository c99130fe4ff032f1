import csv
import json
from pathlib import Path

import pytest

from rokdeepc.cli import EXIT_CONFIG, EXIT_OK, EXIT_PROPERTY, main
from rokdeepc.config import ConfigError, load_config, parse_config

ROOT = Path(__file__).resolve().parents[1]
EXAMPLE = ROOT / "configs" / "example1.toml"

MINIMAL = """
[plant]
kind = "polynomial"

[data]
T = 200
"""


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _error_path(doc):
    with pytest.raises(ConfigError) as info:
        parse_config(doc)
    return info.value.path


def test_example_config_parses_to_expected_values():
    cfg = load_config(EXAMPLE)
    assert (cfg.T, cfg.T_ini, cfg.N) == (600, 1, 5)
    assert cfg.robust.gamma == 0.01 and cfg.robust.lambda_k_prime == 1e6
    assert [type(k).__name__ for k in cfg.kernels] == ["Polynomial", "Gaussian", "Exponential"]
    ctrl = cfg.control_config()
    assert ctrl.steps == 200 and ctrl.k == 1 and ctrl.reference == ((50, 0.1), (150, 0.05))
    mc = cfg.montecarlo_config()
    assert mc.noise_variance == 1.5e-3 and cfg.n_runs == 20


def test_minimal_config_uses_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, MINIMAL))
    assert cfg.T == 200 and cfg.N == 5 and cfg.seed == 0
    assert cfg.prediction_config().horizon == 50


@pytest.mark.parametrize("doc, path", [
    ({"data": {}}, "plant"),
    ({"plant": {"kind": "polynomial"}}, "data"),
    ({"plant": {"kind": "tank"}, "data": {}}, "plant"),
    ({"plant": {"kind": "lti"}, "data": {}}, "plant"),
    ({"plant": {"kind": "polynomial"}, "data": {"T": "600"}}, "data.T"),
    ({"plant": {"kind": "polynomial"}, "data": {"T": 0}}, "data.T"),
    ({"plant": {"kind": "polynomial"}, "data": {"T": 4}}, "data.T"),
    ({"plant": {"kind": "polynomial"}, "data": {"noise_variance": -1.0}}, "data.noise_variance"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "robust": {"lambda_gg": 1.0}}, "robust.lambda_gg"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "robust": {"lambda_g": True}}, "robust.lambda_g"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "cost": {"q_y": -1.0}}, "cost"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "gd": {"alpha": 0.0}}, "gd"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "kernels": {"use": ["spline"]}}, "kernels.use"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "kernels": {"use": []}}, "kernels.use"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "kernels": {"gaussian": {"width": 1.0}}},
     "kernels.gaussian.width"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "prediction": {"horizon": 7}}, "prediction.horizon"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "control": {"k": 9}}, "control"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "control": {"methods": ["pid"]}}, "control"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "control": {"u_box": [1.0]}}, "control.u_box"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "control": {"reference": [[5, 0.1], [5, 0.2]]}},
     "control.reference[1]"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "montecarlo": {"n_runs": 1}}, "montecarlo.n_runs"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "deepc": {"lambda_y": 0.0}}, "deepc.lambda_y"),
    ({"plant": {"kind": "polynomial"}, "data": {}, "extras": {}}, "extras"),
    ({"plant": "polynomial", "data": {}}, "plant"),
])
def test_parse_errors_name_the_field(doc, path):
    assert _error_path(doc) == path


def test_lti_plant_section(tmp_path):
    text = MINIMAL.replace('kind = "polynomial"',
                           'kind = "lti"\nA = [[0.5]]\nB = [[1.0]]\nC = [[1.0]]')
    cfg = load_config(_write(tmp_path, text))
    assert cfg.plant.build().n == 1


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")
    with pytest.raises(ConfigError, match="invalid TOML"):
        load_config(_write(tmp_path, "[plant\nkind=1"))


def test_cli_missing_plant_section_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, "[data]\nT = 600\n")
    assert main(["collect", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "plant" in capsys.readouterr().err


def test_cli_collect_writes_identical_600_row_files(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["collect", "--config", str(EXAMPLE), "--out", str(out), "--quiet"]) == EXIT_OK
        outs.append(out)
    for fname in ("data_clean.csv", "data_measured.csv"):
        a = (outs[0] / fname).read_bytes()
        assert a == (outs[1] / fname).read_bytes()
        assert len(a.decode().splitlines()) == 1 + 600
    assert (outs[0] / "data_clean.csv").read_bytes() != (outs[0] / "data_measured.csv").read_bytes()
    other = tmp_path / "c"
    main(["collect", "--config", str(EXAMPLE), "--out", str(other), "--seed", "1", "--quiet"])
    assert (other / "data_clean.csv").read_bytes() != (outs[0] / "data_clean.csv").read_bytes()


def _prediction_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _order(rows, condition):
    sel = [r for r in rows if r["condition"] == condition]
    return [r["method"] for r in sorted(sel, key=lambda r: float(r["median"]))]


def test_cli_predict_bench_rows_and_seed_override(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["predict-bench", "--config", str(EXAMPLE), "--out", str(a), "--quiet"]) == EXIT_OK
    assert main(["predict-bench", "--config", str(EXAMPLE), "--out", str(b), "--quiet",
                 "--seed", "100"]) == EXIT_OK
    ra, rb = _prediction_rows(a / "prediction.csv"), _prediction_rows(b / "prediction.csv")
    assert len(ra) == len(rb) == 10
    assert [r["method"] for r in ra] == [r["method"] for r in rb]
    assert [r["median"] for r in ra] != [r["median"] for r in rb]
    # noiseless ordering: kernels below Koopman below linear, for both seeds
    for rows in (ra, rb):
        order = _order(rows, "noise=0")
        assert order[-2:] == ["koopman", "linear"]
    summary = json.loads((a / "prediction_runs.json").read_text())
    assert summary["seeds"] == list(range(10))


def test_cli_control_bench_rows_per_step_and_controller(tmp_path):
    assert main(["control-bench", "--config", str(EXAMPLE), "--out", str(tmp_path),
                 "--quiet"]) == EXIT_OK
    lines = (tmp_path / "control.csv").read_text().splitlines()
    summary = json.loads((tmp_path / "control_summary.json").read_text())
    ctrls = summary["controllers"]
    assert len(ctrls) == 5
    assert len(lines) == 1 + 200 * 5
    for name, c in ctrls.items():
        # the first T_ini steps are warm-up; every later step is one solve
        assert len(c["solve_times"]) == 199 and min(c["solve_times"]) > 0.0, name


def _small_config(tmp_path):
    text = EXAMPLE.read_text()
    text = text.replace("T = 600", "T = 200").replace("n_runs = 20", "n_runs = 2")
    text = text.replace("[montecarlo]\nsteps = 200", "[montecarlo]\nsteps = 30")
    text = text.replace('use = ["polynomial", "gaussian", "exponential"]', 'use = ["polynomial"]')
    return _write(tmp_path, text)


def test_cli_montecarlo_small_run(tmp_path):
    cfg = _small_config(tmp_path)
    out = tmp_path / "mc"
    assert main(["montecarlo", "--config", str(cfg), "--out", str(out), "--quiet", "--runs", "3"]) == EXIT_OK
    rows = _prediction_rows(out / "montecarlo.csv")
    assert len(rows) == 3 * 2
    assert sorted({int(r["seed"]) for r in rows}) == [0, 1, 2]
    assert main(["montecarlo", "--config", str(cfg), "--runs", "1"]) == EXIT_CONFIG


def test_cli_verify_unknown_sabotage_is_config_error(capsys):
    assert main(["verify", "--sabotage", "no_such_function", "--quiet"]) == EXIT_CONFIG


@pytest.mark.slow
def test_cli_verify_green_and_sabotaged(capsys):
    assert main(["verify", "--quiet"]) == EXIT_OK
    capsys.readouterr()
    assert main(["verify", "--sabotage", "grad_u", "--quiet"]) == EXIT_PROPERTY
    err = capsys.readouterr().err
    assert "grad_u" in err
