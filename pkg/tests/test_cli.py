import math
import subprocess
import sys

import numpy as np
import pytest
import yaml

from oldroyd import cli
from oldroyd import experiments as ex
from oldroyd.spectral import get_grid
from oldroyd.system import State

SMALL_DECAY = {
    "experiment": "decay",
    "grid": {"dim": 2, "points_per_axis": 32},
    "integrator": {"dt": 1e-2, "T_end": 0.3},
    "cadence": 10,
    "norms": [{"field": "v", "s": 0.0}, {"field": "E", "s": 1.0, "r": "inf", "variant": "hybrid"}],
}


def _write(tmp_path, tree, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(tree))
    return path


def test_config_defaults_and_overrides(tmp_path):
    cfg = ex.load_config(_write(tmp_path, SMALL_DECAY), out_dir=tmp_path / "o", seed=5, grid=64)
    assert cfg.n == 64 and cfg.dim == 2 and cfg.data.seed == 5
    assert cfg.integrator.T_end == 0.3 and cfg.data.amplitude == 1e-2
    assert cfg.norms[1][1].r == math.inf and cfg.norms[1][0] == "E"
    assert cfg.out_dir == tmp_path / "o"


@pytest.mark.parametrize(
    "tree",
    [
        {"experiment": "swirl"},
        {"experiment": "decay", "integrator": {"dt": -1.0}},
        {"experiment": "decay", "integrator": {"stepsize": 1.0}},
        {"experiment": "decay", "data": {"kind": "vortex"}},
        {"experiment": "decay", "norms": [{"field": "p", "s": 0.0}]},
        {"experiment": "decay", "cadence": 0},
    ],
)
def test_bad_configs_raise_value_error(tree):
    with pytest.raises(ValueError):
        ex.config_from_dict(tree)


def test_report_format(tmp_path):
    rep = ex.Report("demo")
    rep.add("x", 0.1)
    rep.verdict("AC1", True, "fine")
    rep.verdict("AC1", False)
    assert rep.text() == "experiment: demo\nx: 0.10000000000000001\nverdict AC1: PASS (fine)\nverdict AC1: FAIL\n"
    assert not rep.passed
    assert rep.write(tmp_path).name == "demo_report.txt"
    assert not ex.Report("empty").passed


def test_timeseries_trapezoid_every_step():
    g = get_grid(2, 32)
    log = ex.TimeSeriesLog(g, 1.0, cadence=4, constraints=False)
    rest = State.rest(g)
    for i in range(9):
        log.observe(rest.replace(t=0.1 * i))
    assert [round(r[0], 12) for r in log.rows] == [0.0, 0.4, 0.8]
    log.close(rest.replace(t=0.8))
    assert len(log.rows) == 3
    assert np.all(np.isnan(log.column("det_drift")))


def test_decay_csv_reproducible(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code = cli.main(["decay", "--config", str(_write(tmp_path, SMALL_DECAY)), "--out", str(out)])
        assert code in (0, 1)
        outs.append((out / "decay.csv").read_text().splitlines())
    assert outs[0][0].startswith("# created ")
    assert outs[0][1] == "# columns v1"
    assert outs[0][2] == ",".join(ex.CSV_COLUMNS)
    assert outs[0][1:] == outs[1][1:]
    report = (tmp_path / "run0" / "decay_report.txt").read_text()
    assert "verdict AC7:" in report and "final_E_hybrid" in report


def test_cli_exit_codes(tmp_path, capsys):
    disp = {"experiment": "dispersion", "integrator": {"dt": 1e-3, "T_end": 0.1},
            "params": {"mus": [1.0], "xi_count": 3, "random_pairs": 10}}
    code = cli.main(["dispersion", "--config", str(_write(tmp_path, disp)), "--out", str(tmp_path / "d")])
    out = capsys.readouterr().out
    assert "verdict AC4:" in out
    assert code == (0 if "verdict AC4: PASS" in out else 1)
    assert (tmp_path / "d" / "dispersion_table.txt").exists()
    assert cli.main(["decay", "--config", str(_write(tmp_path, disp))]) == 2
    bad = _write(tmp_path, {"experiment": "decay", "integrator": {"stepsize": 1}}, "bad.yaml")
    assert cli.main(["decay", "--config", str(bad)]) == 2
    assert "error [decay]" in capsys.readouterr().err
    assert cli.main(["decay", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_cli_halt_writes_last_good(tmp_path):
    tree = dict(SMALL_DECAY, integrator={"dt": 1e-2, "T_end": 0.1, "blowup_factor": 1e-6})
    code = cli.main(["decay", "--config", str(_write(tmp_path, tree)), "--out", str(tmp_path / "h")])
    assert code == 1
    assert (tmp_path / "h" / "snapshots" / "decay_last_good.vsf").exists()
    assert "guard_tripped: True" in (tmp_path / "h" / "decay_report.txt").read_text()


def test_console_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "oldroyd.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for name in ex.EXPERIMENTS:
        assert name in res.stdout
    bad = subprocess.run([sys.executable, "-m", "oldroyd.cli", "decay", "--dim", "4"], capture_output=True)
    assert bad.returncode == 2
