#!/usr/bin/env python
import sys
import time
from pathlib import Path
from typing import List, Optional

import typer

try:  # newer typer releases vendor their own copy of click
    from typer import _click as click
except ImportError:
    import click
from rich.console import Console

from willflow import __version__
from willflow.log import attach_run_log, detach_run_log, logger, set_verbosity_level
from willflow.errors import AbortedRunError, WillflowError
from willflow.config import RunConfig, read_config
from willflow.flow import FlowState, Trajectory, run_flow
from willflow.gauge import normalize_datum
from willflow.geometry import Immersion, energies, standard_embedding
from willflow.io import (
    DiagnosticsRow,
    DiagnosticsWriter,
    export_snapshot,
    read_checkpoint,
    run_summary,
    write_summary,
)
from willflow.plotting import plot_diagnostics
from willflow.shapes import generate_shape
from willflow.sphere_spectral import get_grid
from willflow.verify import SUITES, results_table, run_suites

app = typer.Typer(add_completion=True)


def version_callback(value: bool):
    if value:
        typer.echo(f"willflow Version: {__version__}")
        raise typer.Exit()


@app.callback(
    help=typer.style(
        """Spectral simulation of the Willmore flow of spheres in conformal gauge.\n
            Flows near-round genus-zero surfaces to the round sphere and checks
            the conservation laws, the energy identity and the gauge conditions
            along the way.""",
        fg=typer.colors.GREEN,
        bold=False,
    )
)
def callback(
    version: Optional[bool] = typer.Option(
        None,
        "--version",
        callback=version_callback,
        is_eager=True,
        help="Show version and exit.",
    )
):
    pass


def _prepare_datum(cfg: RunConfig) -> Immersion:
    datum = generate_shape(cfg.shape, cfg.flow.L_max)
    logger.info("Initial shape: {}.".format(energies(datum)))
    return normalize_datum(datum, cfg.gauge)


def _execute(
    cfg: RunConfig,
    datum: Immersion,
    output: Path,
    state: FlowState = None,
    reference: Immersion = None,
    initial_W0: float = None,
    initial_area: float = None,
    plot: bool = False,
) -> Trajectory:
    """Runs the flow with streaming diagnostics, snapshots and a summary."""
    reference = reference if reference is not None else datum
    initial_W0 = initial_W0 if initial_W0 is not None else energies(datum).W0
    initial_area = initial_area if initial_area is not None else datum.area()
    checkpoint_reference = reference if cfg.flow.variant == "deturck" else None
    csv_path = output / "diagnostics.csv"
    rows: List[DiagnosticsRow] = []

    def snapshot(s: FlowState):
        for fmt in cfg.output.formats:
            export_snapshot(s, fmt, output, initial_W0, initial_area, checkpoint_reference)

    writer = DiagnosticsWriter(csv_path, resume_at=state.t if state is not None else None)

    def on_step(s: FlowState, report):
        row = DiagnosticsRow.from_report(report, initial_W0, initial_area)
        writer.write(row)
        rows.append(row)
        if cfg.output.snapshot_every and s.step_index % cfg.output.snapshot_every == 0:
            snapshot(s)

    def finish(trajectory: Trajectory, aborted: bool):
        summary = run_summary(
            trajectory, rows, time.perf_counter() - start, cfg.shape.seed, aborted
        )
        write_summary(summary, output / "summary.json")
        snapshot(trajectory.final)
        if plot and rows:
            plot_diagnostics(csv_path)

    run_log = attach_run_log(output)
    start = time.perf_counter()
    try:
        with writer:
            if state is None:
                snapshot(FlowState(t=0.0, im=datum, wf=None, W0=initial_W0, dt=cfg.flow.dt))
            trajectory = run_flow(
                datum,
                cfg.flow,
                on_step=on_step,
                state=state,
                reference=reference,
                initial_W0=initial_W0,
                initial_area=initial_area,
                tolerances=cfg.gauge,
            )
        finish(trajectory, aborted=False)
    except AbortedRunError as err:
        finish(err.trajectory, aborted=True)
        raise
    finally:
        detach_run_log(run_log)
    logger.info(
        "Run finished: W0 = {:.4e} after {:d} steps; results in {}.".format(
            trajectory.final.W0, trajectory.final.step_index, output
        )
    )
    return trajectory


def _resume(cfg: RunConfig, checkpoint: Path, output: Path, plot: bool) -> Trajectory:
    cp = read_checkpoint(checkpoint)
    if cp.L_max != cfg.flow.L_max:
        logger.warning(
            "Checkpoint has L_max = {:d}, using it instead of {:d}.".format(cp.L_max, cfg.flow.L_max)
        )
        cfg.flow.L_max = cp.L_max
    state = cp.to_state(cfg.flow)
    logger.info("Resuming from {} at t = {:.6f}, step {:d}.".format(checkpoint, cp.t, cp.step_index))
    return _execute(
        cfg,
        state.im,
        output,
        state=state,
        reference=cp.reference(),
        initial_W0=cp.initial_W0,
        initial_area=cp.initial_area,
        plot=plot,
    )


def _output_dir(cfg: RunConfig, output: Optional[Path]) -> Path:
    return Path(output) if output is not None else Path(cfg.output.directory)


@app.command(
    context_settings={"allow_extra_args": False, "ignore_unknown_options": False},
    help=typer.style(
        """Generate, normalize and flow an initial surface.""",
        fg=typer.colors.GREEN,
        bold=False,
    ),
)
def run(
    config: Path = typer.Option(..., "-c", "--config", help="Path to the run configuration."),
    output: Optional[Path] = typer.Option(
        None, "-o", "--output", help="Output directory, overrides the configuration."
    ),
    plot: bool = typer.Option(False, "--plot", help="Render the diagnostics to a PNG."),
    verbosity: int = typer.Option(1, "--verbosity", "-V", count=True, help="Set verbosity level."),
) -> None:
    """Runs the flow described by a configuration file.

    Example:
        willflow run -c reference.cfg -o out
    """
    set_verbosity_level(verbosity)
    cfg = read_config(config)
    out = _output_dir(cfg, output)
    if cfg.output.resume:
        _resume(cfg, Path(cfg.output.resume), out, plot)
        return
    _execute(cfg, _prepare_datum(cfg), out, plot=plot)


@app.command(
    help=typer.style(
        """Only conformalize, scale, center and balance the initial surface.""",
        fg=typer.colors.GREEN,
        bold=False,
    ),
)
def normalize(
    config: Path = typer.Option(..., "-c", "--config", help="Path to the run configuration."),
    output: Optional[Path] = typer.Option(None, "-o", "--output", help="Output directory."),
    verbosity: int = typer.Option(1, "--verbosity", "-V", count=True, help="Set verbosity level."),
) -> None:
    set_verbosity_level(verbosity)
    cfg = read_config(config)
    datum = _prepare_datum(cfg)
    report = energies(datum)
    state = FlowState(t=0.0, im=datum, wf=None, W0=report.W0, dt=cfg.flow.dt)
    out = _output_dir(cfg, output)
    for fmt in cfg.output.formats:
        path = export_snapshot(state, fmt, out, report.W0, report.area)
        logger.info("Wrote {}.".format(path))
    Console().print(repr(report))


@app.command(
    help=typer.style(
        """Run the invariant suites on a state.""",
        fg=typer.colors.GREEN,
        bold=False,
    ),
)
def verify(
    state: str = typer.Option(
        "sphere", "-s", "--state", help="'sphere' or the path of a coefficient checkpoint."
    ),
    L_max: int = typer.Option(16, "-L", "--L-max", help="Degree of the built-in sphere."),
    suites: List[str] = typer.Option(
        [], "--suite", help="Suite to run. Can be called multiple times."
    ),
    verbosity: int = typer.Option(1, "--verbosity", "-V", count=True, help="Set verbosity level."),
) -> None:
    """Exits with code 1 if any check fails."""
    set_verbosity_level(verbosity)
    if state == "sphere":
        im = standard_embedding(get_grid(L_max))
        default = list(SUITES)
    else:
        im = read_checkpoint(state).immersion()
        default = None
    results = run_suites(im, suites or default)
    Console().print(results_table(results))
    if not all(r.passed for r in results):
        raise typer.Exit(code=1)


@app.command(
    help=typer.style(
        """Continue a run from a coefficient checkpoint.""",
        fg=typer.colors.GREEN,
        bold=False,
    ),
)
def resume(
    checkpoint: Path = typer.Argument(..., help="Path of a .coeffs checkpoint."),
    config: Path = typer.Option(..., "-c", "--config", help="Configuration of the original run."),
    output: Optional[Path] = typer.Option(None, "-o", "--output", help="Output directory."),
    plot: bool = typer.Option(False, "--plot", help="Render the diagnostics to a PNG."),
    verbosity: int = typer.Option(1, "--verbosity", "-V", count=True, help="Set verbosity level."),
) -> None:
    set_verbosity_level(verbosity)
    cfg = read_config(config)
    _resume(cfg, checkpoint, _output_dir(cfg, output), plot)


def run_main(argv: List[str] = None) -> int:
    """Runs the command line and returns the process exit code.

    0 on success, 1 for failed checks, 2 for configuration and usage errors,
    3 for inadmissible data, 4 for flow-class breaches, 5 for file errors and
    6 for numerical failures.
    """
    try:
        result = app(args=argv, standalone_mode=False, prog_name="willflow")
    except WillflowError as err:
        logger.critical("{}: {}".format(type(err).__name__, err))
        return err.exit_code
    except click.exceptions.ClickException as err:
        err.show()
        return err.exit_code
    except click.exceptions.Abort:
        return 1
    return result if isinstance(result, int) else 0


def main():
    sys.exit(run_main())


if __name__ == "__main__":
    main()
