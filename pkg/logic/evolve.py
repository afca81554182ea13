"""
Split-operator stepper for the Wigner master equation and its dual
Fokker-Planck equation.

    df/dt = -(p/m) df/dq + [kick] f + D d^2f/dp^2

One step is the symmetric composition

    half (kick + diffusion)  ->  full stream  ->  half (kick + diffusion)

Kick and diffusion are both diagonal in (q, xi), so they commute and are
applied as one multiplier; the stream is diagonal in (k, p). The drive is
evaluated at the midpoint of each half kick (t + dt/4 and t + 3dt/4).

Quantum and classical modes differ only in the kick exponent: the quantum
one adds the hbar^2 xi^3 V'''(q) / 24 term of the Moyal series, which is the
whole series for a quartic potential.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd

from logic import diagnostics
from logic.grid import Field, PhaseSpaceGrid, fft_p, ifft_p, fft_q, ifft_q
from logic.model import ModelParams, d3V, force, potential

log = logging.getLogger(__name__)

QUANTUM = "quantum"
CLASSICAL = "classical"
MODES = (QUANTUM, CLASSICAL)

NORM_DRIFT_LIMIT = 1e-6


class StepError(RuntimeError):
    """Normalization drift beyond tolerance or non-finite samples."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


# Multipliers

def stream_multiplier(k, p, dt: float, m: float) -> np.ndarray:
    """exp(-i k p dt / m) on the (k, p) mesh: f(q, p) -> f(q - p dt/m, p)."""
    return np.exp(-1j * np.multiply.outer(np.asarray(k), np.asarray(p)) * (dt / m))


def kick_exponent(q, xi, t_mid: float, dt: float, params: ModelParams, mode: str) -> np.ndarray:
    """
    Real exponent of the kick factor on the (q, xi) mesh.
    classical: dt xi V'(q, t_mid)
    quantum:   (dt/hbar) [V(q + hbar xi/2) - V(q - hbar xi/2)]
             = dt [xi V' + hbar^2 xi^3 V''' / 24]  for polynomials up to quartic
    """
    Q = np.asarray(q, dtype=float)[:, None]
    X = np.asarray(xi, dtype=float)[None, :]
    exponent = -force(Q, t_mid, params) * X
    if mode == QUANTUM:
        exponent = exponent + params.hbar ** 2 * X ** 3 * d3V(Q, params) / 24.0
    return dt * exponent


def kick_phase(q, xi, t_mid: float, dt: float, params: ModelParams, mode: str) -> np.ndarray:
    _check_mode(mode, params)
    return np.exp(1j * kick_exponent(q, xi, t_mid, dt, params, mode))


def moyal_kick_phase(q, xi, t_mid: float, dt: float, params: ModelParams) -> np.ndarray:
    """Quantum kick from the potential difference itself; reference form."""
    Q = np.asarray(q, dtype=float)[:, None]
    X = np.asarray(xi, dtype=float)[None, :]
    half = 0.5 * params.hbar * X
    diff = potential(Q + half, t_mid, params) - potential(Q - half, t_mid, params)
    return np.exp(1j * dt / params.hbar * diff)


def diffusion_multiplier(xi, dt: float, D: float) -> np.ndarray:
    """exp(-D xi^2 dt): exact heat kernel for df/dt = D d^2f/dp^2."""
    if D < 0:
        raise ValueError("D must be >= 0")
    return np.exp(-D * np.asarray(xi, dtype=float) ** 2 * dt)


def _check_mode(mode: str, params: ModelParams):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got '{mode}'")
    if mode == QUANTUM and not params.hbar > 0:
        raise ValueError("quantum mode needs hbar > 0")


# Plan

class StepPlan:
    """
    Cached multipliers for one (grid, params, dt, mode). Plans are immutable;
    with_dt() builds a fresh plan so the caches always match dt.
    The half-kick cache is rebuilt on every call when the drive is on.
    """

    def __init__(self, grid: PhaseSpaceGrid, params: ModelParams, dt: float, mode: str):
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        _check_mode(mode, params)

        self.grid = grid
        self.params = params
        self.dt = float(dt)
        self.mode = mode

        half = 0.5 * self.dt
        q = grid.q
        xi = grid.xi

        self.stream = stream_multiplier(grid.k, grid.p, self.dt, params.m)
        self.diffuse_half = diffusion_multiplier(xi, half, params.D)[None, :]

        # undriven part of the half-kick exponent, plus the drive coupling
        undriven = params.with_(Lambda=0.0)
        self._static = kick_exponent(q, xi, 0.0, half, undriven, mode)
        self._drive = half * xi[None, :]
        self._fixed_kick = None
        if params.Lambda == 0.0:
            self._fixed_kick = np.exp(1j * self._static) * self.diffuse_half

    def with_dt(self, dt: float) -> "StepPlan":
        return StepPlan(self.grid, self.params, dt, self.mode)

    def half_kick(self, t_mid: float) -> np.ndarray:
        if self._fixed_kick is not None:
            return self._fixed_kick
        drive = self.params.Lambda * math.cos(self.params.omega * t_mid)
        return np.exp(1j * (self._static + drive * self._drive)) * self.diffuse_half

    def advance(self, values: np.ndarray, t: float) -> np.ndarray:
        """One Strang step on raw samples starting at time t."""
        dt = self.dt
        g = fft_p(values)
        g *= self.half_kick(t + 0.25 * dt)
        f = ifft_p(g)

        h = fft_q(f)
        h *= self.stream
        f = ifft_q(h)

        g = fft_p(f)
        g *= self.half_kick(t + 0.75 * dt)
        return ifft_p(g)


def _integral(values: np.ndarray, grid: PhaseSpaceGrid) -> float:
    return float(values.sum().real * grid.cell_area)


def _check_values(values: np.ndarray, grid: PhaseSpaceGrid, reference_norm: float, t: float):
    if not np.all(np.isfinite(values)):
        raise StepError(f"non-finite values at t={t}")
    drift = abs(_integral(values, grid) - reference_norm)
    if drift > NORM_DRIFT_LIMIT:
        raise StepError(f"normalization drift {drift:.3e} exceeds {NORM_DRIFT_LIMIT} at t={t}")


def step(field: Field, t: float, dt: float, plan: StepPlan) -> Field:
    """Advance field from t to t + dt; raises StepError on drift or non-finite values."""
    if not math.isclose(dt, plan.dt, rel_tol=1e-14):
        plan = plan.with_dt(dt)
    values = plan.advance(field.values, t)
    _check_values(values, field.grid, field.norm(), t + dt)
    return Field(field.grid, values, t + dt)


def estimate_splitting_error(field: Field, t: float, dt: float, plan: StepPlan) -> float:
    """
    L2 distance between one dt step and two dt/2 steps, a computable proxy
    for the cubic commutator term of the composition. Scales as dt^3.
    """
    full = plan if math.isclose(dt, plan.dt, rel_tol=1e-14) else plan.with_dt(dt)
    halved = plan.with_dt(0.5 * dt)

    one = full.advance(field.values, t)
    two = halved.advance(halved.advance(field.values, t), t + 0.5 * dt)
    return float(np.sqrt(np.sum(np.abs(one - two) ** 2) * field.grid.cell_area))


# Evolution

class Evolution:
    """Owns one field and advances it in place, checking every step."""

    def __init__(self, initial: Field, plan: StepPlan):
        initial.grid.check_same(plan.grid)
        self.plan = plan
        self.grid = initial.grid
        self.values = initial.values.copy()
        self.t = float(initial.time)
        self.steps_taken = 0
        self.reference_norm = initial.norm()

    @property
    def field(self) -> Field:
        return Field(self.grid, self.values.copy(), self.t)

    def advance(self, n_steps: int) -> "Evolution":
        for _ in range(n_steps):
            self.values = self.plan.advance(self.values, self.t)
            self.steps_taken += 1
            self.t += self.plan.dt
            _check_values(self.values, self.grid, self.reference_norm, self.t)
        return self


def _step_count(t0: float, t1: float, plan: StepPlan):
    span = t1 - t0
    n = max(1, int(round(span / plan.dt)))
    if not math.isclose(n * plan.dt, span, rel_tol=1e-9, abs_tol=1e-12):
        new_dt = span / n
        log.warning("dt adjusted to land on t_end",
                    extra={"dt_requested": plan.dt, "dt_used": new_dt})
        plan = plan.with_dt(new_dt)
    return n, plan


def _record_steps(t0: float, n_steps: int, dt: float,
                  schedule: Sequence[float], diagnostics_every: int):
    checkpoints = sorted({int(round((ts - t0) / dt)) for ts in schedule
                          if t0 - 1e-12 <= ts <= t0 + n_steps * dt + 1e-12})
    every = max(1, int(diagnostics_every))
    marks = set(range(0, n_steps + 1, every)) | set(checkpoints) | {n_steps}
    return sorted(marks), set(checkpoints)


@dataclass
class EvolutionResult:
    final: Field
    checkpoints: List[Field] = dc_field(default_factory=list)
    records: List[diagnostics.DiagnosticsRecord] = dc_field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return diagnostics.records_frame(self.records)


def evolve(initial: Field, t0: float, t1: float, plan: StepPlan,
           schedule: Sequence[float],
           diagnostics_every: int = 100,
           margin_fraction: float = 0.1,
           on_checkpoint: Optional[Callable[[Field], None]] = None,
           keep_checkpoints: bool = True) -> EvolutionResult:
    """
    Step initial from t0 to t1, recording diagnostics every
    `diagnostics_every` steps and checkpoints at the scheduled times
    (snapped to the step grid). On a StepError the partial result is
    attached to the exception as `partial`.
    """
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if len(schedule) == 0:
        raise ValueError("checkpoint schedule is empty")

    start = initial.copy()
    start.time = t0
    if t1 == t0:
        return EvolutionResult(final=start, checkpoints=[start.copy()],
                               records=[diagnostics.record(start, plan.params, margin_fraction)])

    n_steps, plan = _step_count(t0, t1, plan)
    marks, checkpoint_steps = _record_steps(t0, n_steps, plan.dt, schedule, diagnostics_every)
    run = Evolution(start, plan)
    result = EvolutionResult(final=start)

    log.info("evolution started", extra={"mode": plan.mode, "t0": t0, "t1": t1,
                                          "dt": plan.dt, "steps": n_steps})
    try:
        for mark in marks:
            run.advance(mark - run.steps_taken)
            current = run.field
            rec = diagnostics.record(current, plan.params, margin_fraction)
            result.records.append(rec)
            log.debug("diagnostics", extra={"mode": plan.mode, **rec.as_row()})
            if mark in checkpoint_steps:
                _emit(current, result, on_checkpoint, keep_checkpoints)
    except StepError as err:
        result.final = run.field
        err.partial = result
        raise

    result.final = run.field
    log.info("evolution finished", extra={"mode": plan.mode, "t": run.t,
                                           "norm": result.final.norm()})
    return result


def _emit(current: Field, result: EvolutionResult, on_checkpoint, keep: bool):
    if on_checkpoint is not None:
        on_checkpoint(current)
    if keep:
        result.checkpoints.append(current)


# Twin (quantum + classical) runs

@dataclass
class PairResult:
    quantum: EvolutionResult
    classical: EvolutionResult

    def frames(self):
        return self.quantum.frame(), self.classical.frame()


def evolve_pair(initial: Field, t0: float, t1: float,
                quantum_plan: StepPlan, classical_plan: StepPlan,
                schedule: Sequence[float],
                diagnostics_every: int = 100,
                margin_fraction: float = 0.1,
                on_checkpoint: Optional[Callable[[str, Field], None]] = None,
                keep_checkpoints: bool = False) -> PairResult:
    """
    Run the quantum and classical twins from the same initial field in
    lockstep; the two evolutions advance concurrently between record points
    and share no mutable state. Records carry the L1/L2 twin distance.
    """
    if quantum_plan.mode != QUANTUM or classical_plan.mode != CLASSICAL:
        raise ValueError("evolve_pair needs a quantum plan and a classical plan")
    if len(schedule) == 0:
        raise ValueError("checkpoint schedule is empty")
    if t1 < t0:
        raise ValueError("t1 must be >= t0")

    start = initial.copy()
    start.time = t0
    n_steps, quantum_plan = _step_count(t0, t1, quantum_plan)
    _, classical_plan = _step_count(t0, t1, classical_plan)
    marks, checkpoint_steps = _record_steps(t0, n_steps, quantum_plan.dt, schedule, diagnostics_every)

    runs = {QUANTUM: Evolution(start, quantum_plan), CLASSICAL: Evolution(start, classical_plan)}
    result = PairResult(EvolutionResult(final=start), EvolutionResult(final=start))
    by_mode = {QUANTUM: result.quantum, CLASSICAL: result.classical}
    params = quantum_plan.params

    log.info("twin evolution started", extra={"t0": t0, "t1": t1, "steps": n_steps})
    with ThreadPoolExecutor(max_workers=2) as pool:
        try:
            for mark in marks:
                futures = [pool.submit(run.advance, mark - run.steps_taken) for run in runs.values()]
                for fut in futures:
                    fut.result()
                fields = {mode: run.field for mode, run in runs.items()}
                for mode, other in ((QUANTUM, CLASSICAL), (CLASSICAL, QUANTUM)):
                    rec = diagnostics.record(fields[mode], params, margin_fraction, twin=fields[other])
                    by_mode[mode].records.append(rec)
                    if mark in checkpoint_steps:
                        callback = None if on_checkpoint is None else (lambda f, m=mode: on_checkpoint(m, f))
                        _emit(fields[mode], by_mode[mode], callback, keep_checkpoints)
        except StepError as err:
            for mode, run in runs.items():
                by_mode[mode].final = run.field
            err.partial = result
            raise

    for mode, run in runs.items():
        by_mode[mode].final = run.field
    log.info("twin evolution finished", extra={"t": runs[QUANTUM].t})
    return result
