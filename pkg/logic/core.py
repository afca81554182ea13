# logic/core.py
"""
Subcommand handlers. Each takes a validated RunConfig (or a checkpoint
path), runs the computation, writes its artifacts under the output
directory with a manifest, and returns a payload dict:

    {"intent", "answer", "stats", "important_info", "files"}
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from logic import diagnostics
from logic.checkpoint import read_field, write_field
from logic.config import RunConfig
from logic.data_loader import write_manifest, write_table
from logic.evolve import CLASSICAL, QUANTUM, StepError, StepPlan, evolve, evolve_pair
from logic.explain import (
    explain_cumulants,
    explain_lyapunov,
    explain_manifold,
    explain_run,
    explain_scan,
    explain_slice,
    explain_timescales,
)
from logic.grid import Field
from logic.langevin import cumulant_check, lyapunov_estimate, simulate_ensemble
from logic.manifold import trace_unstable_manifold
from logic.states import cat_state_wigner, gaussian_wigner
from logic.timescales import l_classical, scan_timescales, timescale_report

log = logging.getLogger(__name__)

CHECKPOINT_DIR = "checkpoints"
CHECKPOINT_SUFFIX = ".wfps"
OVERLAP_WIDTHS = 3.0


def build_initial(config: RunConfig) -> Field:
    grid, params = config.grid, config.params
    specs = config.initial_specs()
    if len(specs) == 2:
        return cat_state_wigner(specs[0], specs[1], grid, params)
    return gaussian_wigner(specs[0], grid, params)


class _CheckpointWriter:
    """Writes mode_NNNN.wfps files in schedule order and remembers them."""

    def __init__(self, out_dir: Path, hbar: float, D: float):
        self.dir = out_dir / CHECKPOINT_DIR
        self.hbar = hbar
        self.D = D
        self.counts: Dict[str, int] = {}
        self.files: List[Path] = []

    def __call__(self, mode: str, field: Field):
        index = self.counts.get(mode, 0)
        self.counts[mode] = index + 1
        path = write_field(field, self.dir / f"{mode}_{index:04d}{CHECKPOINT_SUFFIX}", self.hbar, self.D)
        self.files.append(path)


def _payload(base: Dict, files: Sequence[Path]) -> Dict:
    base = dict(base)
    base["files"] = [str(f) for f in files]
    return base


# 1. Single-mode evolution
def run_evolve(config: RunConfig, mode: str) -> Dict:
    out_dir = Path(config.output_dir)
    params = config.params
    initial = build_initial(config)
    plan = StepPlan(config.grid, params, config.dt, mode)
    writer = _CheckpointWriter(out_dir, params.hbar, params.D)
    run_cfg = config.values["run"]

    files: List[Path] = []
    try:
        result = evolve(initial, 0.0, config.t_end, plan, config.checkpoint_schedule(),
                        diagnostics_every=run_cfg["diagnostics_every"],
                        margin_fraction=run_cfg["margin_fraction"],
                        on_checkpoint=lambda f: writer(mode, f),
                        keep_checkpoints=False)
    except StepError as err:
        if err.partial is not None:
            files.append(write_table(err.partial.frame(), out_dir / f"diagnostics_{mode}.csv"))
        write_manifest(out_dir, config, files + writer.files, command=f"evolve --mode {mode}")
        raise

    frame = result.frame()
    files.append(write_table(frame, out_dir / f"diagnostics_{mode}.csv"))
    files += writer.files
    files.append(write_manifest(out_dir, config, files, command=f"evolve --mode {mode}"))
    return _payload(explain_run({mode: frame}), files)


# 2. Quantum + classical twins
def run_compare(config: RunConfig) -> Dict:
    out_dir = Path(config.output_dir)
    grid, params = config.grid, config.params
    initial = build_initial(config)
    writer = _CheckpointWriter(out_dir, params.hbar, params.D)
    run_cfg = config.values["run"]

    files: List[Path] = []
    try:
        result = evolve_pair(initial, 0.0, config.t_end,
                             StepPlan(grid, params, config.dt, QUANTUM),
                             StepPlan(grid, params, config.dt, CLASSICAL),
                             config.checkpoint_schedule(),
                             diagnostics_every=run_cfg["diagnostics_every"],
                             margin_fraction=run_cfg["margin_fraction"],
                             on_checkpoint=writer)
    except StepError as err:
        if err.partial is not None:
            for mode, frame in zip((QUANTUM, CLASSICAL), err.partial.frames()):
                files.append(write_table(frame, out_dir / f"diagnostics_{mode}.csv"))
        write_manifest(out_dir, config, files + writer.files, command="compare")
        raise

    quantum, classical = result.frames()
    files.append(write_table(quantum, out_dir / "diagnostics_quantum.csv"))
    files.append(write_table(classical, out_dir / "diagnostics_classical.csv"))
    files.append(write_table(quantum[["time", "l1", "l2"]], out_dir / "distance.csv"))
    files += writer.files

    threshold = run_cfg["threshold"]
    payload = explain_run({QUANTUM: quantum, CLASSICAL: classical}, threshold=threshold)
    if threshold is not None:
        payload["stats"]["agreement_time"] = diagnostics.agreement_time(
            quantum["time"].to_numpy(), quantum["l1"].to_numpy(), threshold)
    files.append(write_manifest(out_dir, config, files, command="compare"))
    return _payload(payload, files)


# 3. Timescales
def run_timescales(config: RunConfig, scan: Optional[Sequence[float]] = None) -> Dict:
    out_dir = Path(config.output_dir)
    params = config.params
    if scan:
        table = scan_timescales(params, scan)
        payload = explain_scan(table)
        name = "timescale_scan.csv"
    else:
        report = timescale_report(params)
        table = pd.DataFrame([report.as_row()])
        payload = explain_timescales(report)
        name = "timescales.csv"
    files = [write_table(table, out_dir / name)]
    files.append(write_manifest(out_dir, config, files, command="timescales"))
    payload = _payload(payload, files)
    payload["table"] = table
    return payload


# 4. Langevin ensembles
def _langevin_params(config: RunConfig):
    params = config.params
    if config.values["langevin"]["linearized"]:
        # inverted oscillator: quartic term and drive off
        params = params.with_(B_coef=0.0, Lambda=0.0)
    return params


def run_langevin(config: RunConfig) -> Dict:
    out_dir = Path(config.output_dir)
    lang = config.values["langevin"]
    params = _langevin_params(config)
    start = (lang["q0"], lang["p0"])

    stats = simulate_ensemble(lang["n"], lang["dt"], lang["t_end"], config.seed, params,
                              start=start, sample_every=lang["sample_every"],
                              keep_trajectories=lang["dump_trajectories"])
    files = [write_table(stats.frame(), out_dir / "langevin_stats.csv")]
    if np.isfinite(stats.lambda_local):
        table = cumulant_check(stats, params, start=start)
        files.append(write_table(table, out_dir / "cumulants.csv"))
        payload = explain_cumulants(table, stats.lambda_local, stats.n_trajectories)
    else:
        payload = {"intent": "LANGEVIN", "answer": "No hyperbolic point; cumulant laws not checked.",
                   "stats": {}, "important_info": []}
    if stats.trajectories is not None:
        path = out_dir / "trajectories.npz"
        np.savez_compressed(path, times=stats.times, trajectories=stats.trajectories)
        files.append(path)
    files.append(write_manifest(out_dir, config, files, command="langevin"))
    return _payload(payload, files)


def run_lyapunov(config: RunConfig) -> Dict:
    out_dir = Path(config.output_dir)
    lang = config.values["langevin"]
    params = config.params
    estimate = lyapunov_estimate(lang["lyapunov_t"], lang["lyapunov_n"], lang["lyapunov_dt"],
                                 config.seed, params, spread=lang["lyapunov_spread"],
                                 transient=lang["lyapunov_transient"])
    table = pd.DataFrame({"trajectory_lambda": estimate.per_trajectory})
    files = [write_table(table, out_dir / "lyapunov.csv")]
    files.append(write_manifest(out_dir, config, files, command="langevin --lyapunov"))
    return _payload(explain_lyapunov(estimate, params.lambda_bar), files)


# 5. Unstable manifold
def run_manifold(config: RunConfig, overlap_with: Optional[Path] = None) -> Dict:
    """
    Trace the polyline; with `overlap_with`, also report how much of that
    checkpoint's top-decile density lies within OVERLAP_WIDTHS * l_cl(t),
    with l_cl taken at the checkpoint's own time and D.
    """
    out_dir = Path(config.output_dir)
    man = config.values["manifold"]
    params = config.params
    polyline = trace_unstable_manifold(config.t_max_manifold, man["resolution"], params,
                                       epsilon=man["epsilon"],
                                       steps_per_period=man["steps_per_period"],
                                       max_vertices=man["max_vertices"])
    overlap = None
    if overlap_with is not None:
        field, _, field_D = read_field(overlap_with)
        width = OVERLAP_WIDTHS * l_classical(field.time, params.with_(D=field_D))
        if not width > 0:
            raise diagnostics.DiagnosticsError("overlap needs a checkpoint with t > 0 and D > 0")
        overlap = (diagnostics.manifold_overlap(field, polyline.vertices, width), width, field.time)
        log.info("manifold overlap", extra={"overlap": overlap[0], "width": width, "t": field.time})

    files = [write_table(polyline.frame(), out_dir / "manifold.csv")]
    files.append(write_manifest(out_dir, config, files, command="manifold"))
    return _payload(explain_manifold(polyline, overlap), files)


# 6. Slices of stored checkpoints
def run_slice(checkpoint: Path, p0: float, out_path: Optional[Path] = None) -> Dict:
    field, _, _ = read_field(checkpoint)
    table = diagnostics.take_slice(field, p0)
    files = []
    if out_path is not None:
        files.append(write_table(table, out_path))
        files.append(write_manifest(Path(out_path).parent, None, files,
                                    command=f"slice {Path(checkpoint).name} --p0 {p0!r}"))
    payload = _payload(explain_slice(table, p0), files)
    payload["table"] = table
    return payload
