import csv
import json

import pytest

from mems_galerkin.cli import main
from mems_galerkin.config import build_config, parse_override
from mems_galerkin.errors import ConfigInvalid

FAST = ["--N", "64", "--K", "8"]


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_spectrum(tmp_path):
    assert main(["spectrum", *FAST, "-o", str(tmp_path)]) == 0
    r = rows(tmp_path / "eigenvalues.csv")
    assert len(r) == 8
    for row in r:
        assert float(row["eigenvalue"]) == pytest.approx(float(row["reference"]), rel=1e-3)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["config"]["numerics"]["K"] == 8 and "eigenvalues.csv" in m["outputs"]


def test_solve_parabolic_report(tmp_path):
    code = main(["solve-parabolic", *FAST, "--lambda", "2", "--dt", "1e-3", "--T-final", "0.05", "--set", "initial.u0=bump:0.1", "-o", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["energy"]["l2_bound_holds"] and rep["energy"]["energy_bound_holds"]
    assert rep["mass"]["touched"] is False
    assert (tmp_path / "trajectory.coeffs.csv").exists()


def test_solve_hyperbolic(tmp_path):
    code = main(["solve-hyperbolic", *FAST, "--dt", "1e-3", "--T-final", "0.05", "--set", "initial.u0=mode:1:0.1", "-o", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["energy"]["conserved"]


def test_certify_and_picard(tmp_path):
    args = [*FAST, "--lambda", "0.01", "--dt", "1e-3", "--T-final", "0.05", "--set", "initial.u0=bump:0.1", "--set", "certificate.probe_T=0.1"]
    assert main(["certify", *args, "-o", str(tmp_path / "c")]) == 0
    cert = json.loads((tmp_path / "c" / "certificate.json").read_text())
    assert cert["k_r"] == pytest.approx(8.0) and cert["regime"] == "global"
    assert len(rows(tmp_path / "c" / "probes.csv")) == 8
    assert main(["picard", *args, "-o", str(tmp_path / "p")]) == 0
    pic = json.loads((tmp_path / "p" / "picard.json").read_text())
    assert pic["converged"] and pic["certificate_admits"]
    assert pic["direct_distance"] <= 1e-3 * pic["fixed_point_norm"]


def test_quench_sweep(tmp_path):
    # default factors 0.5, 1, 2, 4 of the threshold; c0 = 0 at the threshold itself
    code = main(["quench-sweep", *FAST, "-o", str(tmp_path)])
    assert code == 0
    r = rows(tmp_path / "quench_sweep.csv")
    assert [row["bound_satisfied"] for row in r] == ["na", "na", "true", "true"]
    assert r[0]["touch_time"] == ""


def test_convergence(tmp_path):
    code = main(["convergence", "--N", "128", "--dt", "1e-3", "--T-final", "0.02", "--lambda", "2", "--set", "initial.u0=bump:0.2", "--set", "sweep.K_values=[2, 4, 8]", "-o", str(tmp_path)])
    assert code == 0
    diffs = [float(row["l2_diff_K_2K"]) for row in rows(tmp_path / "convergence.csv")]
    assert diffs[0] > diffs[1] > diffs[2]


def test_reruns_byte_identical(tmp_path):
    args = ["solve-parabolic", *FAST, "--lambda", "40", "--dt", "1e-3", "--T-final", "0.1"]
    assert main([*args, "-o", str(tmp_path / "a")]) == 0
    assert main([*args, "-o", str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    for name in names:
        a, b = (tmp_path / d / name for d in "ab")
        if name == "manifest.json":
            ma, mb = (json.loads(p.read_text()) for p in (a, b))
            ma.pop("wall_clock_seconds"), mb.pop("wall_clock_seconds")
            assert ma == mb
        else:
            assert a.read_bytes() == b.read_bytes(), name


def test_cache_dir_flag(tmp_path):
    cache = tmp_path / "cache"
    cache.mkdir()
    main(["spectrum", *FAST, "--cache-dir", str(cache), "-o", str(tmp_path / "a")])
    main(["spectrum", *FAST, "--cache-dir", str(cache), "-o", str(tmp_path / "b")])
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert not ma["cache_hit"] and mb["cache_hit"]
    assert (tmp_path / "a" / "eigenvalues.csv").read_bytes() == (tmp_path / "b" / "eigenvalues.csv").read_bytes()


def test_config_file(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('command = "spectrum"\n[numerics]\nN = 64\nK = 4\n[operator]\ntau = 1.0\n')
    assert main(["spectrum", "-c", str(cfg), "-o", str(tmp_path / "o")]) == 0
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["config"]["operator"]["tau"] == 1.0 and m["config"]["numerics"]["K"] == 4


@pytest.mark.parametrize(
    "extra",
    [
        ["--K", "100", "--N", "64"],
        ["--set", "operator.beta=-1"],
        ["--set", "numerics.bogus=1"],
        ["--set", "certificate.r_fraction=1.5"],
        ["--dt", "1", "--T-final", "0.5"],
        ["--set", "operator.domain=ball"],
    ],
)
def test_config_errors_exit_2(tmp_path, extra, capsys):
    assert main(["spectrum", *extra, "-o", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_numerical_error_exit_3(tmp_path):
    # a missing cache directory is an I/O failure
    assert main(["spectrum", *FAST, "--cache-dir", str(tmp_path / "absent"), "-o", str(tmp_path)]) == 3
    # far above the threshold the Picard iterates reach touchdown
    code = main(["picard", *FAST, "--lambda", "500", "--T-final", "0.5", "--dt", "1e-2", "-o", str(tmp_path / "p")])
    assert code == 3


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2


def test_config_errors_collected():
    with pytest.raises(ConfigInvalid) as exc:
        build_config({"operator": {"beta": 0, "tau": -1}, "numerics": {"N": 8}})
    assert {"operator.beta", "operator.tau", "numerics.N"} <= set(exc.value.errors)


def test_parse_override():
    assert parse_override("numerics.K=8") == ("numerics.K", 8)
    assert parse_override("initial.u0=bump:0.1") == ("initial.u0", "bump:0.1")
    assert parse_override("sweep.K_values=[1, 2]") == ("sweep.K_values", [1, 2])
    with pytest.raises(ConfigInvalid):
        parse_override("novalue")
