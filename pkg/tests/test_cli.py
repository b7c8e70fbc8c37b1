import io
import json

import numpy as np
import pytest

from fieldroad import cli
from fieldroad.config import parse_config
from fieldroad.model import ConfigurationError
from fieldroad.output import read_csv, svg_chart


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def test_minimal_config_defaults():
    cfg = parse_config('{"preset": 1, "alpha": 2, "beta": 2, "nx": 160, "ny": 40, "dt": 0.1, "tEnd": 400}')
    assert (cfg.nx, cfg.ny, cfg.dt, cfg.t_end) == (160, 40, 0.1, 400)
    assert cfg.params.alpha == 2 and cfg.params.nu0 == 5
    assert cfg.geometry.x_min == -40
    assert cfg.newton.tol == 1e-10 and cfg.record_stride == 1
    assert cfg.fit_window == (1e-6, 1e-2)
    assert cfg.csv_path == "run.csv" and cfg.svg_path is None


@pytest.mark.parametrize(
    "text, fragment",
    [
        ('{"preset": 1, "alpha": 0.5}', "alpha"),
        ('{"preset": 1, "initial": {"uPieces": []}}', "mutually exclusive"),
        ('{"preset": 1, "bogus": 3}', "bogus"),
        ('{"preset": 1, "newton": {"tolerance": 1}}', "tolerance"),
        ('{"preset": 3}', "unknown test case"),
        ('{"alpha": 2}', "preset or initial"),
        ('{"preset": 1, "nx": 0}', "nx"),
        ('{"preset": 1, "dt": -1}', "dt"),
        ('{"preset": 1, "output": {"recordStride": 0}}', "recordStride"),
        ('{"preset": 1, "fitWindow": [1e-2, 1e-6]}', "fitWindow"),
        ('{"initial": {"vPieces": [{"xIntervals": [[0, 1]], "yInterval": [0, 1], "value": 0}]}}', "trivial"),
        ('{"preset": 1,\n "alpha": }', "line 2"),
    ],
)
def test_config_rejections(text, fragment):
    with pytest.raises(ConfigurationError, match=fragment):
        parse_config(text)


def test_explicit_initial_data():
    cfg = parse_config(json.dumps({
        "geometry": {"L": 2, "xMin": 0, "xMax": 4},
        "initial": {
            "vPieces": [{"xIntervals": [[0, 1], [2, 3]], "yInterval": [0, 1], "value": 3}],
            "uPieces": [{"xIntervals": [[0, 4]], "value": 1}],
        },
        "alpha": 2, "beta": 3, "mu0": 2,
    }))
    assert cfg.geometry.road_length == 4
    assert cfg.params.beta == 3 and cfg.params.mu0 == 2
    assert cfg.initial.v_pieces[0].x_intervals == ((0, 1), (2, 3))


def test_main_exit_code_for_bad_config(tmp_path, capsys):
    assert cli.main(["steady", "--config", write(tmp_path, {"preset": 1, "alpha": 0.5})]) == 1
    assert "alpha" in capsys.readouterr().err
    assert cli.main(["steady", "--config", str(tmp_path / "missing.json")]) == 1


def test_steady_preset(tmp_path, capsys):
    assert cli.main(["steady", "--config", write(tmp_path, {"preset": 1, "alpha": 2, "beta": 2})]) == 0
    out = dict(line.split("=") for line in capsys.readouterr().out.split())
    assert float(out["u_inf"]) == pytest.approx(3.14251, abs=5e-6)
    assert float(out["v_inf"]) == pytest.approx(1.40537, abs=5e-6)
    assert float(out["balance_residual"]) <= 1e-12 and float(out["mass_residual"]) <= 1e-12


def test_steady_linear(tmp_path, capsys):
    cfg = {"preset": 2, "alpha": 1, "beta": 1, "mu0": 3, "nu0": 3}
    assert cli.main(["steady", "--config", write(tmp_path, cfg)]) == 0
    out = dict(line.split("=") for line in capsys.readouterr().out.split())
    assert float(out["u_inf"]) == pytest.approx(2500 / 1680, rel=1e-14)
    assert float(out["v_inf"]) == pytest.approx(2500 / 1680, rel=1e-14)


def equilibrium_config(tmp_path, **extra):
    # mu0 = nu0 and unit densities: the steady state is exactly (1, 1)
    cfg = {
        "initial": {
            "vPieces": [{"xIntervals": [[-40, 40]], "yInterval": [0, 20], "value": 1}],
            "uPieces": [{"xIntervals": [[-40, 40]], "value": 1}],
        },
        "mu0": 1, "nu0": 1, "alpha": 2, "beta": 2, "nx": 8, "ny": 4, "dt": 0.5, "tEnd": 5,
        "output": {"csvPath": str(tmp_path / "eq.csv")},
    }
    cfg.update(extra)
    return cfg


def test_run_equilibrium(tmp_path, capsys):
    assert cli.main(["run", "--config", write(tmp_path, equilibrium_config(tmp_path)), "--strict"]) == 0
    out = capsys.readouterr().out
    assert "not fit" in out
    cols = read_csv(str(tmp_path / "eq.csv"))
    assert list(cols) == ["t", "H", "D", "mass", "weighted_mass", "linf_v", "linf_u", "lp_gap", "newton_iters"]
    assert max(cols["H"]) <= 1e-20
    assert len(cols["t"]) == 11


def test_run_writes_svg_and_is_deterministic(tmp_path, capsys):
    cfg = {"preset": 1, "nx": 16, "ny": 4, "dt": 0.5, "tEnd": 30,
           "output": {"csvPath": str(tmp_path / "a.csv"), "recordStride": 2}}
    path = write(tmp_path, cfg)
    assert cli.main(["run", "--config", path, "--svg", str(tmp_path / "h.svg")]) == 0
    first = (tmp_path / "a.csv").read_bytes()
    assert cli.main(["run", "--config", path]) == 0
    assert (tmp_path / "a.csv").read_bytes() == first
    svg = (tmp_path / "h.svg").read_text()
    assert svg.startswith("<svg") and "<polyline" in svg
    cols = read_csv(str(tmp_path / "a.csv"))
    assert np.allclose(np.diff(cols["t"]), 1.0)
    # full-precision floats round-trip
    line = first.decode().splitlines()[1].split(",")
    assert float(line[3]) == 2500.0


def test_run_solver_failure_exit_code(tmp_path, capsys):
    cfg = {"preset": 1, "nx": 4, "ny": 2, "dt": 0.1, "tEnd": 1, "newton": {"tol": 1e-300, "maxIter": 1},
           "output": {"csvPath": str(tmp_path / "f.csv")}}
    assert cli.main(["run", "--config", write(tmp_path, cfg)]) == 2
    assert "solver failure" in capsys.readouterr().out


def test_strict_flags_violations(tmp_path, capsys):
    from fieldroad import diagnostics as dg

    s = dg.RunSeries()
    for k, (H, m) in enumerate([(3.0, 1.0), (2.0, 1.0), (2.5, 1.1)]):
        s.append(dg.Record(k, H, 0, m, m, 0, 0, 0, 1))
    s.min_value = -1e-6
    problems = cli.invariant_violations(s, symmetric=True)
    assert len(problems) == 3


def test_check_command(tmp_path, capsys):
    path = write(tmp_path, {"preset": 1, "check": {"samples": 60, "jacobianStates": 3}})
    assert cli.main(["check", "--config", path]) == 0
    first = capsys.readouterr().out
    assert cli.main(["check", "--config", path]) == 0
    assert capsys.readouterr().out == first
    vals = dict(line.split()[0].split("=") for line in first.splitlines() if "=" in line.split()[0])
    assert float(vals["gap_identity_max_error"]) <= 1e-10
    assert float(vals["jacobian_fd_max_error"]) <= 1e-6


def test_oracle_command(tmp_path, capsys):
    assert cli.main(["oracle", "--config", write(tmp_path, {"preset": 1})]) == 0
    out = capsys.readouterr().out
    ratios = [float(line.split()[0].split("=")[1]) for line in out.splitlines() if line.startswith("ratio=")]
    assert len(ratios) == 2 and all(1.7 <= r <= 2.3 for r in ratios)


def test_oracle_equilibrium_and_warning(tmp_path, capsys):
    cfg = equilibrium_config(tmp_path, oracle={"tEnd": 0.1, "dts": [0.01, 0.005], "dtFine": 0.001})
    assert cli.main(["oracle", "--config", write(tmp_path, cfg)]) == 0
    out = capsys.readouterr().out
    assert "warning" in out
    errs = [float(line.split("error=")[1]) for line in out.splitlines() if "error=" in line]
    assert max(errs) <= 1e-14


def test_svg_chart_handles_empty():
    assert "<svg" in svg_chart([], [])
    assert "<polyline" in svg_chart([0, 1, 2], [1.0, 0.1, 0.01])
