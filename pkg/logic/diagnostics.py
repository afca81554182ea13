"""
Diagnostics engine

This module computes, for a single field or a quantum/classical pair:
- moment            ; Weyl-symmetrized <q^n p^m> as a phase-space average
- energy            ; <H_W> at the field's time
- negativity        ; integrated negative part, int max(-f, 0)
- distance          ; L1 / L2 distance between twin fields
- take_slice        ; f(q, p ~ p0) cross-section
- boundary_mass     ; |f| mass in the outer band of the periodic box
- manifold_overlap  ; share of the dense region lying near a polyline
- record            ; one DiagnosticsRecord row for the time series

Negativity is the one-sided integral int max(-f, 0). It equals
int (|f| - f) / 2, the same number written differently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, asdict
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from logic.grid import Field, POSITION_MOMENTUM
from logic.model import ModelParams, potential

log = logging.getLogger(__name__)

MAX_MOMENT_ORDER = 6
NORM_TOLERANCE = 1e-6
BOUNDARY_TOLERANCE = 1e-6

DIAGNOSTIC_COLUMNS = [
    "time", "norm", "q1", "p1", "q2", "p2", "qp", "energy",
    "negativity", "minval", "boundary_mass", "l1", "l2",
]


class DiagnosticsError(ValueError):
    """Grid mismatch, bad arguments, or non-finite observables."""


def _density(field: Field) -> np.ndarray:
    if field.representation != POSITION_MOMENTUM:
        raise DiagnosticsError("diagnostics need a field in the (q, p) representation")
    return field.values.real


# Moments
def moment(field: Field, n: int, m: int) -> float:
    """
    <q^n p^m>: the Weyl symbol of the symmetrized operator is the plain
    monomial, so the phase-space Riemann sum is the quantum expectation.
    """
    if n < 0 or m < 0 or n + m > MAX_MOMENT_ORDER:
        raise DiagnosticsError(f"moment order ({n}, {m}) outside 0 <= n+m <= {MAX_MOMENT_ORDER}")

    grid = field.grid
    density = _density(field)
    try:
        with np.errstate(over="raise", invalid="raise"):
            weight_q = grid.q ** n
            weight_p = grid.p ** m
            value = weight_q @ density @ weight_p * grid.cell_area
    except FloatingPointError as err:
        raise DiagnosticsError(f"moment ({n}, {m}) overflowed: {err}") from err

    if not np.isfinite(value):
        raise DiagnosticsError(f"moment ({n}, {m}) is not finite")
    return float(value)


def energy(field: Field, params: ModelParams) -> float:
    """<p^2/2m + V(q, t)> with V evaluated at the field's own time."""
    grid = field.grid
    density = _density(field)
    kinetic = moment(field, 0, 2) / (2.0 * params.m)
    v = potential(grid.q, field.time, params)
    return float(kinetic + v @ density.sum(axis=1) * grid.cell_area)


def negativity(field: Field) -> float:
    density = _density(field)
    return float(np.maximum(-density, 0.0).sum() * field.grid.cell_area)


def min_value(field: Field) -> float:
    return float(_density(field).min())


def purity(field: Field, hbar: float) -> float:
    """2 pi hbar int f^2; equals 1 for a pure Gaussian state."""
    density = _density(field)
    return float(2.0 * np.pi * hbar * np.sum(density ** 2) * field.grid.cell_area)


def marginal_q(field: Field) -> np.ndarray:
    return _density(field).sum(axis=1) * field.grid.dp


def marginal_p(field: Field) -> np.ndarray:
    return _density(field).sum(axis=0) * field.grid.dq


# Distances
def distance(field_a: Field, field_b: Field, which: str = "L1") -> float:
    if field_a.grid != field_b.grid:
        raise DiagnosticsError("cannot compare fields on different grids")
    diff = np.abs(field_a.values - field_b.values)
    cell = field_a.grid.cell_area

    which = which.upper()
    if which == "L1":
        return float(diff.sum() * cell)
    if which == "L2":
        return float(np.sqrt(np.sum(diff ** 2) * cell))
    raise DiagnosticsError(f"unknown distance '{which}', expected L1 or L2")


# Sections
def take_slice(field: Field, p0: float) -> pd.DataFrame:
    """
    Cross-section f(q, p0): the nearest rows below/above p0 blended with a
    linear weight. Returns a frame with columns q, value.
    """
    grid = field.grid
    if not (grid.p_min <= p0 <= grid.p_max):
        raise DiagnosticsError(f"p0={p0} outside [{grid.p_min}, {grid.p_max}]")

    density = _density(field)
    s = (p0 - grid.p_min) / grid.dp
    j0 = int(np.floor(s))
    weight = s - j0
    j0 %= grid.n_p
    j1 = (j0 + 1) % grid.n_p

    values = (1.0 - weight) * density[:, j0] + weight * density[:, j1]
    out = pd.DataFrame({"q": grid.q, "value": values})
    out.attrs.update(p0=p0, row=j0 if weight < 0.5 else j1, weight=weight, time=field.time)
    return out


def boundary_mass(field: Field, margin_fraction: float = 0.1) -> float:
    """int |f| over the outer band of width margin_fraction on each axis."""
    if not 0.0 < margin_fraction < 0.5:
        raise DiagnosticsError("margin_fraction must lie in (0, 0.5)")

    grid = field.grid
    mq = int(round(margin_fraction * grid.n_q))
    mp = int(round(margin_fraction * grid.n_p))
    band = np.zeros(grid.shape, dtype=bool)
    band[:mq, :] = True
    band[grid.n_q - mq:, :] = True
    band[:, :mp] = True
    band[:, grid.n_p - mp:] = True
    return float(np.abs(field.values[band]).sum() * grid.cell_area)


def _densify(vertices: np.ndarray, spacing: float) -> np.ndarray:
    pieces = [vertices[:1]]
    for a, b in zip(vertices[:-1], vertices[1:]):
        n = max(1, int(np.ceil(np.hypot(*(b - a)) / spacing)))
        frac = np.arange(1, n + 1)[:, None] / n
        pieces.append(a + frac * (b - a))
    return np.concatenate(pieces)


def manifold_overlap(field: Field, vertices: np.ndarray, width: float,
                     quantile: float = 0.9) -> float:
    """
    Fraction of the top-quantile density mass lying within `width` of the
    polyline through `vertices` (shape (N, 2), columns q, p).
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) == 0:
        raise DiagnosticsError("vertices must have shape (N, 2)")
    if width <= 0:
        raise DiagnosticsError("width must be positive")

    density = _density(field)
    cut = np.quantile(density, quantile)
    top = (density >= cut) & (density > 0)
    mass = density[top].sum()
    if mass <= 0:
        return 0.0

    Q, P = field.grid.mesh()
    tree = cKDTree(_densify(vertices, width / 4.0))
    dist, _ = tree.query(np.column_stack([Q[top], P[top]]))
    near = dist <= width
    return float(density[top][near].sum() / mass)


# Time series
@dataclass
class DiagnosticsRecord:
    time: float
    norm: float
    q1: float
    p1: float
    q2: float
    p2: float
    qp: float
    energy: float
    negativity: float
    minval: float
    boundary_mass: float
    l1: float = float("nan")
    l2: float = float("nan")

    def as_row(self) -> Dict[str, float]:
        return asdict(self)


def record(field: Field, params: ModelParams,
           margin_fraction: float = 0.1,
           twin: Optional[Field] = None) -> DiagnosticsRecord:
    """Compute every scalar observable of one field (plus twin distances)."""
    rec = DiagnosticsRecord(
        time=field.time,
        norm=field.norm(),
        q1=moment(field, 1, 0),
        p1=moment(field, 0, 1),
        q2=moment(field, 2, 0),
        p2=moment(field, 0, 2),
        qp=moment(field, 1, 1),
        energy=energy(field, params),
        negativity=negativity(field),
        minval=min_value(field),
        boundary_mass=boundary_mass(field, margin_fraction),
    )
    if twin is not None:
        rec.l1 = distance(field, twin, "L1")
        rec.l2 = distance(field, twin, "L2")

    if abs(rec.norm - 1.0) > NORM_TOLERANCE:
        log.warning("norm drifted", extra={"time": rec.time, "norm": rec.norm})
    if rec.boundary_mass > BOUNDARY_TOLERANCE:
        log.warning("boundary mass above tolerance; run flagged invalid",
                    extra={"time": rec.time, "boundary_mass": rec.boundary_mass})
    return rec


def records_frame(records: Sequence[DiagnosticsRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.as_row() for r in records], columns=DIAGNOSTIC_COLUMNS)


# Calibrated agreement threshold
def plateau(values: Sequence[float], plateau_fraction: float = 0.25) -> float:
    """Mean over the final plateau_fraction of a time series."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DiagnosticsError("empty series")
    tail = max(1, int(np.ceil(plateau_fraction * values.size)))
    return float(values[-tail:].mean())


def calibrate_threshold(agreeing: Sequence[float], control: Sequence[float],
                        plateau_fraction: float = 0.25) -> float:
    """
    theta = midpoint between the long-time L1 plateau of a run expected to
    agree and that of a control run expected not to.
    """
    return 0.5 * (plateau(agreeing, plateau_fraction) + plateau(control, plateau_fraction))


def agreement_time(times: Sequence[float], distances: Sequence[float],
                   theta: float) -> Optional[float]:
    """First time after which the distance stays below theta, or None."""
    times = np.asarray(times, dtype=float)
    below = np.asarray(distances, dtype=float) < theta
    if below.size == 0 or not below[-1]:
        return None
    above = np.flatnonzero(~below)
    first = 0 if above.size == 0 else above[-1] + 1
    return float(times[first])
