import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from squaredf.cli import main
from squaredf.config import ConfigError, load_config, parse_config

TRIPLE_LAG = {"tf": {"num": [1], "den": [1, 3, 3, 1]}}


def write(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2) if isinstance(doc, dict) else doc)
    return str(path)


def run(tmp_path, command, doc, *extra, out="out"):
    return main([command, "--config", write(tmp_path, doc), "--out",
                 str(tmp_path / out), *extra])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_adf_triple_lag_crossing(tmp_path):
    assert run(tmp_path, "adf", TRIPLE_LAG) == 0
    r = rows(tmp_path / "out" / "adf_locus.csv")
    assert len(r) == 400
    im = np.array([float(x["im"]) for x in r])
    re = np.array([float(x["re"]) for x in r])
    i = np.flatnonzero((im[:-1] > 0) & (im[1:] <= 0))[0]
    s = im[i] / (im[i] - im[i + 1])
    assert re[i] + s * (re[i + 1] - re[i]) == pytest.approx(-0.105, abs=0.002)


def test_adf_static_gain(tmp_path):
    doc = {"tf": {"num": [3], "den": [1]}, "T_grid": [1, 2, 3]}
    assert run(tmp_path, "adf", doc) == 0
    assert {(x["re"], x["im"]) for x in rows(tmp_path / "out" / "adf_locus.csv")} == \
        {("3.0", "0.0")}


def test_improper_tf_is_config_error(tmp_path, capsys):
    doc = {"tf": {"num": [1, 0, 0], "den": [1, 1]}}
    assert run(tmp_path, "adf", doc) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "field 'tf'" in err


def test_bad_json_reports_line(tmp_path, capsys):
    path = write(tmp_path, '{\n  "tf": {"num": [1], "den": [1, 1]},\n  oops\n}')
    assert main(["adf", "--config", path, "--out", str(tmp_path)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    doc = dict(TRIPLE_LAG, T_gird=[1, 2])
    assert run(tmp_path, "adf", doc) == 2
    err = capsys.readouterr().err
    assert "T_gird" in err and "line" in err


def test_config_field_errors():
    with pytest.raises(ConfigError, match="sim.stepsize"):
        parse_config({"sim": {"stepsize": 1}})
    with pytest.raises(ConfigError, match="strictly increasing"):
        parse_config({"T_grid": [1, 1]})
    with pytest.raises(ConfigError, match="n must be even"):
        parse_config({"n": 7})
    with pytest.raises(ConfigError, match="nonlinearity"):
        parse_config({"nonlinearity": {"type": "sat", "k": "x"}})
    spec = parse_config({"T_grid": {"start": 1, "stop": 10, "num": 3}})
    np.testing.assert_allclose(spec.T_grid, [1, np.sqrt(10), 10])


def test_missing_required_section(tmp_path, capsys):
    assert run(tmp_path, "predict", TRIPLE_LAG) == 2
    assert "nonlinearity" in capsys.readouterr().err


def test_predict_triple_lag(tmp_path, capsys):
    doc = dict(TRIPLE_LAG, nonlinearity={"type": "sat", "k": 12})
    assert run(tmp_path, "predict", doc) == 0
    r = {x["method"]: x for x in rows(tmp_path / "out" / "predictions.csv")}
    assert float(r["classical"]["T"]) == pytest.approx(3.632, abs=0.005)
    assert float(r["adf"]["T"]) == pytest.approx(3.680, abs=0.01)
    out = capsys.readouterr().out
    assert "alpha_in=" in out and "alpha_after=" in out


def test_predict_below_onset(tmp_path, capsys):
    doc = dict(TRIPLE_LAG, nonlinearity={"type": "sat", "k": 5})
    assert run(tmp_path, "predict", doc) == 0
    assert rows(tmp_path / "out" / "predictions.csv") == []
    out = capsys.readouterr().out
    assert "no intersection" in out and "hint:" in out


def test_predict_delayed_saturation(tmp_path):
    doc = {"tf": {"num": [15], "den": [1, 1]}, "nonlinearity": {"type": "sat_delay"},
           "T_init": 25.0}
    assert run(tmp_path, "predict", doc) == 0
    (r,) = rows(tmp_path / "out" / "predictions.csv")
    assert float(r["T"]) == pytest.approx(28.4, abs=0.3)
    assert float(r["alpha_out"]) == pytest.approx(13.47, abs=0.2)


def test_nyqa(tmp_path):
    doc = {"nonlinearity": {"type": "sat_delay"}, "alpha_grid": [0.5, 1.0, 2.0]}
    assert run(tmp_path, "nyqa", doc) == 2
    assert run(tmp_path, "nyqa", dict(doc, T=4.0)) == 0
    r = rows(tmp_path / "out" / "nyqa.csv")
    assert float(r[0]["phase_rad"]) == pytest.approx(-2 * np.pi * 0.5 / 4)
    assert (tmp_path / "out" / "neg_reciprocal.csv").exists()


def test_simulate_triple_lag_k36(tmp_path, capsys):
    doc = dict(TRIPLE_LAG, nonlinearity={"type": "sat", "k": 36}, csv_stride=100)
    assert run(tmp_path, "simulate", doc) == 0
    (r,) = rows(tmp_path / "out" / "oscillation.csv")
    assert r["sustained"] == "true"
    assert float(r["period"]) == pytest.approx(11.023 / 3, abs=0.01)
    assert "sustained=true" in capsys.readouterr().out
    assert len(rows(tmp_path / "out" / "timeseries.csv")) == 2001


def test_simulate_zero_feedback(tmp_path):
    doc = dict(TRIPLE_LAG, nonlinearity={"type": "zero"})
    assert run(tmp_path, "simulate", doc) == 0
    assert rows(tmp_path / "out" / "oscillation.csv")[0]["sustained"] == "false"


def test_simulate_divergence_is_numeric_failure(tmp_path, capsys):
    doc = {"tf": {"num": [1], "den": [1, 1]}, "nonlinearity": {"type": "gain", "k": -1000},
           "sim": {"horizon": 10}}
    assert run(tmp_path, "simulate", doc) == 3
    assert "DivergenceFault" in capsys.readouterr().err


def test_compare_empty_sweep(tmp_path):
    assert run(tmp_path, "compare", {"sweep": {"k": []}}) == 0
    assert (tmp_path / "out" / "compare.csv").read_text() == "k,T_sim,T_df,T_adf\n"


def test_compare_triple_lag(tmp_path):
    doc = dict(TRIPLE_LAG, nonlinearity={"type": "sat", "k": 1}, sweep={"k": [60, 8, 20]})
    assert run(tmp_path, "compare", doc) == 0
    r = rows(tmp_path / "out" / "compare.csv")
    assert [float(x["k"]) for x in r] == [8, 20, 60]
    t_sim = [float(x["T_sim"]) for x in r]
    assert t_sim == sorted(t_sim)
    assert t_sim[0] == pytest.approx(3.633, abs=0.01)
    assert float(r[0]["T_df"]) == pytest.approx(3.632, abs=0.005)
    # k = 8 lies below the square-wave onset (about 9.53).
    assert r[0]["T_adf"] == ""
    assert float(r[1]["T_adf"]) == pytest.approx(3.680, abs=0.01)


def test_outputs_are_deterministic(tmp_path):
    doc = dict(TRIPLE_LAG, nonlinearity={"type": "sat", "k": 12}, sim={"horizon": 30},
               T_grid={"start": 1, "stop": 10, "num": 50})
    for out in ("a", "b"):
        for cmd in ("adf", "predict", "simulate"):
            assert main([cmd, "--config", write(tmp_path, doc), "--out",
                         str(tmp_path / out)]) == 0
    for name in ("adf_locus.csv", "predictions.csv", "timeseries.csv", "oscillation.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_module_entry_point(tmp_path):
    path = write(tmp_path, {"tf": {"num": [1], "den": [1, 1]}, "T_grid": [1, 2]})
    proc = subprocess.run([sys.executable, "-m", "squaredf", "adf", "--config", path,
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert load_config(path).tf.order == 1
