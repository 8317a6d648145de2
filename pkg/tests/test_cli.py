import csv
import json
import subprocess
import sys

import pytest

from spde.cli import main
from spde.config import ConfigError, parse_config_text


def _cfg(tmp_path, text, name="study.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_config_strict_keys(tmp_path):
    with pytest.raises(ConfigError, match="unknown key 'bogus' in section \\[model\\]"):
        parse_config_text("[model]\nbogus = 1\n", tmp_path)
    with pytest.raises(ConfigError):
        parse_config_text("[nosuch]\nx = 1\n", tmp_path)
    with pytest.raises(ConfigError):
        parse_config_text("[model]\nbeta = 3\n", tmp_path)
    cfg = parse_config_text("[model]\ntime_cov = fbm:H0=0.7  # comment\nmeasure = \"white:scale=2\"\n", tmp_path)
    assert cfg.time_cov.hurst == 0.7 and cfg.measure.scale == 2.0


def test_check_exit_codes(tmp_path, capsys):
    ok = _cfg(tmp_path, "[model]\nmeasure = riesz:eta=1.5\ndim = 2\n")
    code, out, _ = _run(capsys, "check", "--config", ok)
    assert code == 0 and json.loads(out)["verdict"] == "PASS"
    bad = _cfg(tmp_path, "[model]\nmeasure = riesz:eta=2.5\ndim = 2\n", "bad.ini")
    code, out, _ = _run(capsys, "check", "--config", bad)
    assert code == 2 and json.loads(out)["verdict"] == "FAIL"


def test_malformed_config_exit_1(tmp_path, capsys):
    p = _cfg(tmp_path, "[model]\nbogus = 1\n")
    code, out, err = _run(capsys, "check", "--config", p)
    assert code == 1 and out == "" and "bogus" in err
    code, _, err = _run(capsys, "check", "--config", tmp_path / "missing.ini")
    assert code == 1


def test_usage_error_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["nosuch"])
    assert exc.value.code == 1


def test_json_byte_identical(tmp_path, capsys):
    p = _cfg(tmp_path, "[model]\nmeasure = white\n[sampler]\neps = 0.0078125\nn_rep = 200\n")
    runs = [_run(capsys, "simulate", "--config", p, "--seed", 9)[1] for _ in range(2)]
    assert runs[0] == runs[1]
    assert json.loads(runs[0])["rng"]["seed"] == 9


def test_variance_with_csv(tmp_path, capsys):
    p = _cfg(tmp_path, "[model]\nmeasure = white\n")
    out_csv = tmp_path / "v.csv"
    code, out, _ = _run(capsys, "variance", "--config", p, "--out", out_csv)
    assert code == 0
    assert abs(json.loads(out)["values"]["total"] - 0.5641896) < 1e-6
    assert out_csv.read_bytes().count(b"\r\n") >= 1
    with out_csv.open(newline="") as fh:
        assert list(csv.DictReader(fh))


def test_converge(tmp_path, capsys):
    p = _cfg(tmp_path, "[model]\nmeasure = white\n[sampler]\nn_rep = 500\n")
    out_csv = tmp_path / "c.csv"
    code, out, _ = _run(capsys, "converge", "--config", p, "--out", out_csv, "--eps-list", "0.0625,0.03125,0.015625,0.0078125")
    rep = json.loads(out)
    assert code == 0 and rep["values"]["cauchy_decreasing"]
    with out_csv.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert {"eps", "second_moment"} <= set(rows[0])


def test_converge_divergent(tmp_path, capsys):
    p = _cfg(tmp_path, "[model]\nmeasure = riesz:eta=2.5\ndim = 2\n[sampler]\nn_rep = 0\n")
    code, out, _ = _run(capsys, "converge", "--config", p, "--eps-list", "0.0625,0.03125,0.015625,0.0078125")
    assert code == 2 and json.loads(out)["verdict"] == "DIVERGENT"


def test_ibp_verify(tmp_path, capsys):
    p = _cfg(tmp_path, "[model]\ntime_cov = fbm:H0=0.7\nmeasure = white\n"
                       "[ibp]\neps = 0.1\neps_tilde = 0.05\nt = 1\nt_tilde = 1\n")
    code, out, _ = _run(capsys, "ibp-verify", "--config", p)
    assert code == 0 and json.loads(out)["verdict"] == "PASS"


def test_besov_and_regularity(tmp_path, capsys):
    p = _cfg(tmp_path, "[model]\ntime_cov = fbm:H0=0.8\nmeasure = white\nbeta = 0.55\n"
                       "[grid]\nN = 256\nL = 16\n"
                       "[besov]\nn_rep = 30\nlevel = 5\ntimes = 0.5, 0.5625, 0.625, 0.75, 1.0\n")
    code, out, _ = _run(capsys, "besov-analyze", "--config", p)
    rep = json.loads(out)
    assert code == 0 and abs(rep["values"]["slope"] - 1.6) <= 0.1
    code, out, _ = _run(capsys, "regularity", "--config", p, "--out", tmp_path / "r.csv")
    assert code == 0 and json.loads(out)["values"]["exponent"] > 0
    assert (tmp_path / "r.csv").exists()


def test_besov_needs_beta(tmp_path, capsys):
    p = _cfg(tmp_path, "[model]\nmeasure = white\n[grid]\nN = 64\nL = 8\n")
    code, _, err = _run(capsys, "besov-analyze", "--config", p)
    assert code == 1 and "beta" in err


def test_coarse_grid_is_config_error(tmp_path, capsys):
    p = _cfg(tmp_path, "[model]\nmeasure = white\nbeta = 0.55\n[grid]\nN = 8\nL = 32\n")
    code, _, err = _run(capsys, "besov-analyze", "--config", p)
    assert code == 1 and "grid" in err


def test_threads_env_does_not_change_output(tmp_path):
    p = _cfg(tmp_path, "[model]\nmeasure = white\n[sampler]\neps = 0.0078125\nn_rep = 400\n")
    outs = []
    for threads in ("1", "3"):
        res = subprocess.run([sys.executable, "-m", "spde.cli", "simulate", "--config", str(p)],
                             capture_output=True, text=True, env={"SPDE_THREADS": threads, "PATH": ""})
        assert res.returncode == 0, res.stderr
        outs.append(res.stdout)
    assert outs[0] == outs[1]


def test_config_power_lists(tmp_path):
    cfg = parse_config_text("[sampler]\neps_list = 2^-4 .. 2^-7\n[besov]\nlevels = 2..5\n", tmp_path)
    assert cfg.get("sampler", "eps_list") == (0.0625, 0.03125, 0.015625, 0.0078125)
    assert cfg.get("besov", "levels") == (2, 3, 4, 5)
    with pytest.raises(ConfigError):
        parse_config_text("[sampler]\neps_list = 2^-4 .. 3^-7\n", tmp_path)
