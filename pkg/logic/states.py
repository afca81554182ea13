"""
Initial distributions shared by the quantum and the classical runs.

The classical twin is seeded with exactly the same samples as the quantum
one, negative interference ridge included; the dual Fokker-Planck equation
evolves signed functions unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from logic.grid import Field, PhaseSpaceGrid
from logic.model import ModelParams

ADMISSIBLE_SIGMAS = 5.0


class StateError(ValueError):
    """Raised for Gaussian specs that are invalid or leave the box."""


@dataclass(frozen=True)
class GaussianSpec:
    center: Tuple[float, float]
    stds: Tuple[float, float]
    weight: float = 1.0

    def __post_init__(self):
        if not (self.stds[0] > 0 and self.stds[1] > 0):
            raise StateError(f"stds must be positive, got {self.stds}")

    @classmethod
    def coherent(cls, q0: float, p0: float, hbar: float, sigma_q: Optional[float] = None) -> "GaussianSpec":
        """Minimum-uncertainty spec, sigma_q sigma_p = hbar/2 (default sigma_q = sigma_p)."""
        sigma_q = math.sqrt(hbar / 2.0) if sigma_q is None else sigma_q
        return cls((q0, p0), (sigma_q, hbar / (2.0 * sigma_q)))

    def is_minimum_uncertainty(self, hbar: float) -> bool:
        return math.isclose(self.stds[0] * self.stds[1], hbar / 2.0, rel_tol=1e-9)


def check_admissible(spec: GaussianSpec, grid: PhaseSpaceGrid):
    (q0, p0), (sq, sp) = spec.center, spec.stds
    margin_q, margin_p = ADMISSIBLE_SIGMAS * sq, ADMISSIBLE_SIGMAS * sp
    if (q0 - margin_q < grid.q_min or q0 + margin_q > grid.q_max
            or p0 - margin_p < grid.p_min or p0 + margin_p > grid.p_max):
        raise StateError(
            f"Gaussian at ({q0}, {p0}) with stds ({sq}, {sp}) leaves the box by its "
            f"{ADMISSIBLE_SIGMAS:g} sigma ellipse"
        )


def check_uncertainty(spec: GaussianSpec, hbar: float):
    """A Gaussian is a Wigner function only when sigma_q sigma_p >= hbar/2."""
    product = spec.stds[0] * spec.stds[1]
    if product < 0.5 * hbar * (1.0 - 1e-9):
        raise StateError(f"sigma_q * sigma_p = {product:g} is below hbar/2 = {0.5 * hbar:g}")


def _envelope(grid: PhaseSpaceGrid, center, stds) -> np.ndarray:
    Q, P = grid.mesh()
    (q0, p0), (sq, sp) = center, stds
    return np.exp(-(Q - q0) ** 2 / (2.0 * sq ** 2) - (P - p0) ** 2 / (2.0 * sp ** 2))


def _normalized(values: np.ndarray, grid: PhaseSpaceGrid, time: float) -> Field:
    total = values.sum() * grid.cell_area
    return Field(grid, values / total, time)


def gaussian_wigner(spec: GaussianSpec, grid: PhaseSpaceGrid, params: ModelParams,
                    time: float = 0.0) -> Field:
    """(2 pi sq sp)^-1 exp(...) sampled and renormalized on the grid."""
    check_admissible(spec, grid)
    (sq, sp) = spec.stds
    values = _envelope(grid, spec.center, spec.stds) / (2.0 * math.pi * sq * sp)
    return _normalized(values, grid, time)


def cat_state_wigner(spec_a: GaussianSpec, spec_b: GaussianSpec,
                     grid: PhaseSpaceGrid, params: ModelParams,
                     time: float = 0.0) -> Field:
    """
    Wigner function of the equal-weight superposition of two coherent
    states (equal widths, sigma_q sigma_p = hbar/2):

        W ~ W_a + W_b + (2 / pi hbar) G(mid) cos([q dp_ab - dq_ab (p - p_mid)] / hbar)

    where G(mid) is the common Gaussian envelope centred at the midpoint and
    dq_ab, dp_ab the separation. The interference ridge goes negative once the
    lobes are separated by many widths.
    """
    if spec_a.stds != spec_b.stds:
        raise StateError("cat state needs equal stds for both lobes")
    if not params.hbar > 0:
        raise StateError("cat state needs hbar > 0")
    if not spec_a.is_minimum_uncertainty(params.hbar):
        raise StateError("cat state lobes must be minimum-uncertainty, sigma_q sigma_p = hbar/2")
    check_admissible(spec_a, grid)
    check_admissible(spec_b, grid)

    hbar = params.hbar
    (qa, pa), (qb, pb) = spec_a.center, spec_b.center
    sq, sp = spec_a.stds
    peak = 1.0 / (2.0 * math.pi * sq * sp)

    lobes = peak * (_envelope(grid, spec_a.center, spec_a.stds)
                    + _envelope(grid, spec_b.center, spec_b.stds))

    q_mid, p_mid = 0.5 * (qa + qb), 0.5 * (pa + pb)
    Q, P = grid.mesh()
    fringe = np.cos((Q * (pa - pb) - (qa - qb) * (P - p_mid)) / hbar)
    ridge = 2.0 * peak * _envelope(grid, (q_mid, p_mid), spec_a.stds) * fringe

    return _normalized(lobes + ridge, grid, time)


def default_cat(params: ModelParams, separation: float = 1.0) -> Tuple[GaussianSpec, GaussianSpec]:
    """Lobes at (+-separation, 0) with sigma_q = sigma_p = sqrt(hbar/2)."""
    return (GaussianSpec.coherent(-separation, 0.0, params.hbar),
            GaussianSpec.coherent(separation, 0.0, params.hbar))
