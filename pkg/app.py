"""
Command line for the phase-space engine.

    python app.py timescales --config duffing_d1e-3
    python app.py compare --config desk_d1e-2 --output-dir runs/d1e-2
"""

import logging
from pathlib import Path

import click

from logic import core
from logic.checkpoint import CheckpointFormatError, read_field
from logic.config import ConfigError
from logic.data_loader import load_config, read_table
from logic.diagnostics import DiagnosticsError, take_slice
from logic.evolve import MODES, StepError
from logic.explain import format_payload
from logic.grid import GridError
from logic.langevin import EnsembleError
from logic.manifold import ManifoldError
from logic.model import ModelError
from logic.states import StateError
from logic.timescales import TimescaleError
from ui import plots
from utils.helpers import configure_logging

log = logging.getLogger("app")

# Validation and numerical failures: message on stderr, exit status 1
HANDLED = (ConfigError, GridError, ModelError, StateError, StepError, TimescaleError,
           EnsembleError, ManifoldError, DiagnosticsError, CheckpointFormatError,
           FileNotFoundError)


def _load(config_name: str, output_dir):
    try:
        config = load_config(config_name)
    except HANDLED as err:
        raise click.ClickException(f"{config_name}: {err}") from err
    if output_dir is not None:
        config = config.replace("run", output_dir=str(output_dir))
    return config


def _report(payload):
    click.echo(format_payload(payload))
    for path in payload.get("files", []):
        log.debug("artifact", extra={"path": path})


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except HANDLED as err:
        log.error("command failed", extra={"error": type(err).__name__, "detail": str(err)})
        raise click.ClickException(str(err)) from err


config_option = click.option("--config", "config_name", required=True,
                             help="Config file path or scenario name from data/.")
output_option = click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path),
                             default=None, help="Override [run] output_dir.")


@click.group()
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--plain-logs", is_flag=True, help="Text logs instead of JSON lines.")
def cli(log_level, plain_logs):
    """Wigner and dual Fokker-Planck evolution of the driven Duffing oscillator."""
    configure_logging(log_level, plain=plain_logs)


@cli.command()
@config_option
@output_option
@click.option("--mode", type=click.Choice(MODES), default=None,
              help="Defaults to [run] mode when that names a single mode.")
def evolve(config_name, output_dir, mode):
    """Evolve one mode and write checkpoints and diagnostics."""
    config = _load(config_name, output_dir)
    if mode is None:
        if len(config.modes) != 1:
            raise click.UsageError("[run] mode is 'both'; pass --mode or use 'compare'")
        mode = config.modes[0]
    _report(_guard(core.run_evolve, config, mode))


@cli.command()
@config_option
@output_option
def compare(config_name, output_dir):
    """Quantum and classical twins from the same initial field."""
    config = _load(config_name, output_dir)
    _report(_guard(core.run_compare, config))


@cli.command()
@config_option
@output_option
@click.option("--scan", default=None, help="Comma-separated D values for a scan table.")
def timescales(config_name, output_dir, scan):
    """t*, t_qc and the folding time for the configured parameters."""
    config = _load(config_name, output_dir)
    values = None
    if scan:
        try:
            values = [float(v) for v in scan.split(",") if v.strip()]
        except ValueError as err:
            raise click.BadParameter(str(err), param_hint="--scan") from err
    payload = _guard(core.run_timescales, config, values)
    _report(payload)
    click.echo("")
    click.echo(payload["table"].to_csv(index=False, float_format="%.17g", lineterminator="\n"), nl=False)


@cli.command()
@config_option
@output_option
@click.option("--lyapunov", is_flag=True, help="Estimate the Lyapunov exponent instead.")
def langevin(config_name, output_dir, lyapunov):
    """Euler-Maruyama ensemble statistics, or the Lyapunov estimate."""
    config = _load(config_name, output_dir)
    handler = core.run_lyapunov if lyapunov else core.run_langevin
    _report(_guard(handler, config))


@cli.command()
@config_option
@output_option
@click.option("--overlap-with", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Checkpoint whose density is compared with the polyline.")
def manifold(config_name, output_dir, overlap_with):
    """Trace the unstable manifold of the hyperbolic periodic point."""
    config = _load(config_name, output_dir)
    _report(_guard(core.run_manifold, config, overlap_with))


@cli.command(name="slice")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--p0", type=float, required=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="CSV path; prints a summary only when omitted.")
def slice_(checkpoint, p0, out):
    """Cross-section f(q, p0) of a checkpoint file."""
    _report(_guard(core.run_slice, checkpoint, p0, out))


@cli.command()
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--manifold", "manifold_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Polyline CSV to draw over the field.")
@click.option("--compare-with", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Second checkpoint for a slice overlay at --p0.")
@click.option("--p0", type=float, default=0.0, show_default=True)
def render(checkpoint, out, manifold_csv, compare_with, p0):
    """Standalone HTML figure of a checkpoint."""
    def _render():
        field, hbar, _ = read_field(checkpoint)
        wigner_bound = hbar if hbar > 0 else None
        fig = plots.render_field(field, hbar=wigner_bound, title=f"{checkpoint.name}  t = {field.time:.6g}")
        if manifold_csv is not None:
            plots.add_manifold(fig, read_table(manifold_csv))
        written = [plots.save_html(fig, out)]
        if compare_with is not None:
            other, _, _ = read_field(compare_with, expect_grid=field.grid)
            slices = {checkpoint.stem: take_slice(field, p0), compare_with.stem: take_slice(other, p0)}
            written.append(plots.save_html(plots.render_slices(slices, p0),
                                           out.with_name(out.stem + "_slice.html")))
        return written

    for path in _guard(_render):
        click.echo(str(path))


@cli.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--column", default="l1", show_default=True)
@click.option("--log-y", is_flag=True)
def series(run_dir, column, log_y):
    """Plot one diagnostics column of a run directory against time."""
    frames = {p.stem.replace("diagnostics_", ""): read_table(p)
              for p in sorted(run_dir.glob("diagnostics_*.csv"))}
    if not frames:
        raise click.ClickException(f"no diagnostics_*.csv in {run_dir}")
    fig = plots.render_series(frames, column, log_y=log_y)
    click.echo(str(plots.save_html(fig, run_dir / f"series_{column}.html")))


def main():
    cli(prog_name="wfps")


if __name__ == "__main__":
    main()
