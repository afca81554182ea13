"""
Phase-space grid and spectral transforms.

Conventions used by every multiplier operator in the engine:
- samples sit at q_i = q_min + i*dq, p_j = p_min + j*dp (periodic wrap,
  the upper bound is excluded)
- forward transforms carry the dq (or dp) measure,
  g(q, xi) = sum_j f(q, p_j) exp(-i p_j xi) dp
- inverse transforms carry 1/(2*pi) per axis together with the dxi (or dk)
  measure, so inverse(forward(f)) == f
- frequency ladders use the standard DFT ordering
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Tuple

import numpy as np
import scipy.fft as sfft

# Representations a Field can be in
POSITION_MOMENTUM = "qp"
POSITION_XI = "qxi"
WAVENUMBER_MOMENTUM = "kp"

MIN_POINTS = 16
FFT_WORKERS = -1


class GridError(ValueError):
    """Raised for invalid grid sizes/bounds or mismatched grids."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """
    Uniform periodic discretization of the (q, p) rectangle.
    Immutable, so one grid can be shared by any number of fields and threads.
    """

    n_q: int
    n_p: int
    q_min: float
    q_max: float
    p_min: float
    p_max: float
    q: np.ndarray = dc_field(init=False, repr=False, compare=False)
    p: np.ndarray = dc_field(init=False, repr=False, compare=False)
    k: np.ndarray = dc_field(init=False, repr=False, compare=False)
    xi: np.ndarray = dc_field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = self.q_min + self.dq * np.arange(self.n_q)
        p = self.p_min + self.dp * np.arange(self.n_p)
        k = 2.0 * np.pi * sfft.fftfreq(self.n_q, d=self.dq)
        xi = 2.0 * np.pi * sfft.fftfreq(self.n_p, d=self.dp)
        for name, arr in (("q", q), ("p", p), ("k", k), ("xi", xi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_q

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_q, self.n_p)

    @property
    def cell_area(self) -> float:
        return self.dq * self.dp

    @property
    def area(self) -> float:
        return (self.q_max - self.q_min) * (self.p_max - self.p_min)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """(Q, P) arrays of shape (n_q, n_p), row-major over q."""
        return np.meshgrid(self.q, self.p, indexing="ij")

    def smallest_scales(self, hbar: float) -> Tuple[float, float]:
        """
        Nyquist-type resolution limits hbar/P and hbar/L of the box,
        where L and P are the q and p extents.
        """
        return hbar / (self.p_max - self.p_min), hbar / (self.q_max - self.q_min)

    def check_same(self, other: "PhaseSpaceGrid"):
        if self != other:
            raise GridError(f"grid mismatch: {self} vs {other}")


def make_grid(n_q: int, n_p: int,
              q_bounds: Tuple[float, float],
              p_bounds: Tuple[float, float]) -> PhaseSpaceGrid:
    """Validate sizes/bounds and build the grid with its frequency ladders."""
    problems = []
    for name, n in (("nq", n_q), ("np", n_p)):
        if int(n) != n or not _is_power_of_two(int(n)) or n < MIN_POINTS:
            problems.append(f"{name}={n} must be a power of two >= {MIN_POINTS}")
    for name, (lo, hi) in (("q", q_bounds), ("p", p_bounds)):
        if not (np.isfinite(lo) and np.isfinite(hi)):
            problems.append(f"{name} bounds must be finite, got ({lo}, {hi})")
        elif hi <= lo:
            problems.append(f"{name} bounds inverted: max {hi} <= min {lo}")
    if problems:
        raise GridError("; ".join(problems))

    return PhaseSpaceGrid(int(n_q), int(n_p),
                          float(q_bounds[0]), float(q_bounds[1]),
                          float(p_bounds[0]), float(p_bounds[1]))


@dataclass
class Field:
    """
    Complex samples of a phase-space distribution (Wigner function or
    classical density) bound to a grid. values[i, j] <-> (q_i, p_j) when the
    representation is "qp".
    """

    grid: PhaseSpaceGrid
    values: np.ndarray
    time: float = 0.0
    representation: str = POSITION_MOMENTUM

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.grid.shape:
            raise GridError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.time, self.representation)

    def integral(self) -> complex:
        """Riemann sum of the samples; the dimensionless total mass."""
        self._require(POSITION_MOMENTUM)
        return complex(self.values.sum() * self.grid.cell_area)

    def norm(self) -> float:
        return self.integral().real

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def _require(self, representation: str):
        if self.representation != representation:
            raise GridError(
                f"field is in '{self.representation}' representation, expected '{representation}'"
            )

    # Pointwise algebra
    def _combine(self, other, op) -> "Field":
        if isinstance(other, Field):
            self.grid.check_same(other.grid)
            if other.representation != self.representation:
                raise GridError("cannot combine fields in different representations")
            return Field(self.grid, op(self.values, other.values), self.time, self.representation)
        return Field(self.grid, op(self.values, other), self.time, self.representation)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values, self.time, self.representation)


# Spectral transforms.
# The raw helpers work on arrays and skip the p_min / q_min offset phases,
# which cancel between a forward and an inverse transform when the operator
# applied in between is diagonal. The Field-level versions include them.

def fft_p(values: np.ndarray) -> np.ndarray:
    return sfft.fft(values, axis=1, workers=FFT_WORKERS)


def ifft_p(values: np.ndarray) -> np.ndarray:
    return sfft.ifft(values, axis=1, workers=FFT_WORKERS)


def fft_q(values: np.ndarray) -> np.ndarray:
    return sfft.fft(values, axis=0, workers=FFT_WORKERS)


def ifft_q(values: np.ndarray) -> np.ndarray:
    return sfft.ifft(values, axis=0, workers=FFT_WORKERS)


def transform_p(field: Field) -> Field:
    """f(q, p) -> g(q, xi) = sum_j f(q, p_j) exp(-i p_j xi) dp."""
    field._require(POSITION_MOMENTUM)
    grid = field.grid
    phase = np.exp(-1j * grid.p_min * grid.xi) * grid.dp
    return Field(grid, fft_p(field.values) * phase[None, :], field.time, POSITION_XI)


def inverse_transform_p(mixed: Field) -> Field:
    """g(q, xi) -> f(q, p) = (1/2pi) sum_l g(q, xi_l) exp(i p xi_l) dxi."""
    mixed._require(POSITION_XI)
    grid = mixed.grid
    phase = np.exp(1j * grid.p_min * grid.xi) / grid.dp
    return Field(grid, ifft_p(mixed.values * phase[None, :]), mixed.time, POSITION_MOMENTUM)


def transform_q(field: Field) -> Field:
    """f(q, p) -> h(k, p) = sum_i f(q_i, p) exp(-i q_i k) dq."""
    field._require(POSITION_MOMENTUM)
    grid = field.grid
    phase = np.exp(-1j * grid.q_min * grid.k) * grid.dq
    return Field(grid, fft_q(field.values) * phase[:, None], field.time, WAVENUMBER_MOMENTUM)


def inverse_transform_q(mixed: Field) -> Field:
    """h(k, p) -> f(q, p) = (1/2pi) sum_j h(k_j, p) exp(i q k_j) dk."""
    mixed._require(WAVENUMBER_MOMENTUM)
    grid = mixed.grid
    phase = np.exp(1j * grid.q_min * grid.k) / grid.dq
    return Field(grid, ifft_q(mixed.values * phase[:, None]), mixed.time, POSITION_MOMENTUM)


def spectral_l2_squared(mixed: Field) -> float:
    """
    Parseval partner of sum |f|^2 dq dp for a mixed field:
    (1/2pi) sum |g|^2 dq dxi  (or dk dp for the q transform).
    """
    grid = mixed.grid
    power = float(np.sum(np.abs(mixed.values) ** 2))
    if mixed.representation == POSITION_XI:
        dxi = 2.0 * np.pi / (grid.n_p * grid.dp)
        return power * grid.dq * dxi / (2.0 * np.pi)
    if mixed.representation == WAVENUMBER_MOMENTUM:
        dk = 2.0 * np.pi / (grid.n_q * grid.dq)
        return power * dk * grid.dp / (2.0 * np.pi)
    raise GridError("expected a mixed representation")
