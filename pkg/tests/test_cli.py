import numpy as np
import pytest

from willflow import __version__
from willflow.cli import run_main
from willflow.flow import FlowState
from willflow.io import read_checkpoint, read_diagnostics, read_summary, write_checkpoint

RUN_CONFIG = """
[flow]
L_max = 12
dt = 1e-4
t_end = 3e-4

[shape]
kind = sh_bump
amplitude = 0.02

[output]
snapshot_every = 1
formats = obj, coeffs
"""


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    config = root / "run.cfg"
    config.write_text(RUN_CONFIG)
    out = root / "out"
    code = run_main(["run", "-c", str(config), "-o", str(out)])
    return code, config, out


def test_version(capsys):
    assert run_main(["--version"]) == 0, "--version exits cleanly."
    assert __version__ in capsys.readouterr().out, "The version is printed."


def test_usage_error():
    assert run_main(["run", "--no-such-option"]) == 2, "Usage errors exit with code 2."


def test_verify_sphere():
    assert run_main(["verify", "--state", "sphere", "-L", "8"]) == 0, "The round sphere passes every suite."


def test_verify_failure(bumped, tmp_path):
    path = tmp_path / "bumped.coeffs"
    state = FlowState(t=0.0, im=bumped, wf=None, W0=0.0, dt=1e-4)
    write_checkpoint(state, path, 0.0, bumped.area())
    assert run_main(["verify", "--state", str(path), "--suite", "gauge"]) == 1, "A non-conformal state fails the gauge suite."


def test_verify_unknown_suite():
    assert run_main(["verify", "-L", "8", "--suite", "magic"]) == 2, "Unknown suites are configuration errors."


def test_bad_config(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("[flow]\ndt = -1\n")
    assert run_main(["run", "-c", str(config), "-o", str(tmp_path / "out")]) == 2, "Out-of-range values exit with 2."


def test_missing_config(tmp_path):
    assert run_main(["run", "-c", str(tmp_path / "missing.cfg")]) == 5, "Unreadable files exit with 5."


def test_inadmissible_datum(tmp_path):
    config = tmp_path / "big.cfg"
    config.write_text("[flow]\nL_max = 12\n[shape]\nkind = sh_bump\namplitude = 0.3\n")
    assert run_main(["run", "-c", str(config), "-o", str(tmp_path / "out")]) == 3, "Large energy exits with 3."


def test_run_outputs(finished_run):
    code, _, out = finished_run
    assert code == 0, "A short run succeeds."
    rows = read_diagnostics(out / "diagnostics.csv")
    assert len(rows) == 3, "One diagnostics row per step."
    assert all(np.diff([r.w0 for r in rows]) < 0), "W0 decreases."
    summary = read_summary(out / "summary.json")
    assert summary["steps"] == 3 and not summary["aborted"], "The summary records the run."
    assert (out / "snapshot_000000.obj").exists(), "The normalized datum is exported."
    for step in (1, 2, 3):
        assert (out / "checkpoint_{:06d}.coeffs".format(step)).exists(), "A checkpoint per step."
    assert read_checkpoint(out / "checkpoint_000003.coeffs").step_index == 3, "Checkpoints carry their step."
    assert "INFO" in (out / "run.log").read_text(), "The run is mirrored into run.log."


def test_normalize(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text(RUN_CONFIG)
    assert run_main(["normalize", "-c", str(config), "-o", str(tmp_path)]) == 0, "Normalization succeeds."
    cp = read_checkpoint(tmp_path / "checkpoint_000000.coeffs")
    assert abs(cp.immersion().area() - 4 * np.pi) < 1e-8, "The exported datum has area 4 pi."


def test_resume_continues_exactly(finished_run, tmp_path):
    _, config, out = finished_run
    resumed = tmp_path / "resumed"
    code = run_main(["resume", str(out / "checkpoint_000001.coeffs"), "-c", str(config), "-o", str(resumed)])
    assert code == 0, "Resuming succeeds."
    original = (out / "diagnostics.csv").read_text().splitlines()
    continued = (resumed / "diagnostics.csv").read_text().splitlines()
    assert continued == [original[0]] + original[2:], "The resumed run reproduces the remaining rows bit for bit."
