"""
Driven quartic (Duffing) model.

    H(q, p, t) = p^2 / 2m + V(q, t)
    V(q, t)    = B q^4 - A q^2 + Lambda q cos(omega t)

Every physical symbol of the engine lives in ModelParams. Only polynomials up
to quartic order are supported, so the Moyal correction series stops at the
hbar^2 term and the quantum kick has a closed form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

log = logging.getLogger(__name__)


class ModelError(ValueError):
    """Raised for unphysical parameters or a missing hyperbolic point."""


@dataclass(frozen=True)
class ModelParams:
    m: float = 1.0
    hbar: float = 0.1
    D: float = 1e-3
    A_coef: float = 10.0
    B_coef: float = 0.5
    Lambda: float = 10.0
    omega: float = 6.07
    lambda_bar: float = 0.57
    area: float = 270.0
    u0_sq: Optional[float] = None  # defaults to hbar
    k_meas: Optional[float] = None  # measurement strength, D = hbar^2 k_meas

    def __post_init__(self):
        if self.u0_sq is None:
            object.__setattr__(self, "u0_sq", self.hbar)
        problems = self.problems()
        if problems:
            raise ModelError("; ".join(problems))

    def problems(self) -> list:
        out = []
        numbers = dict(m=self.m, hbar=self.hbar, D=self.D, A=self.A_coef, B=self.B_coef,
                       Lambda=self.Lambda, omega=self.omega, lambda_bar=self.lambda_bar,
                       area=self.area, u0_sq=self.u0_sq)
        for name, value in numbers.items():
            if not math.isfinite(value):
                out.append(f"{name} must be finite")
        if not self.m > 0:
            out.append("m must be > 0")
        if self.hbar < 0:
            out.append("hbar must be >= 0")
        if self.D < 0:
            out.append("D must be >= 0")
        if not self.omega > 0:
            out.append("omega must be > 0")
        if self.lambda_bar < 0:
            out.append("lambda_bar must be >= 0")
        if not self.area > 0:
            out.append("area must be > 0")
        if self.u0_sq < 0:
            out.append("u0_sq must be >= 0")
        if self.k_meas is not None:
            if self.k_meas < 0:
                out.append("k_meas must be >= 0")
            elif not math.isclose(self.D, self.hbar ** 2 * self.k_meas, rel_tol=1e-12, abs_tol=0.0):
                out.append(f"D={self.D} disagrees with hbar^2*k_meas={self.hbar ** 2 * self.k_meas}")
        return out

    @classmethod
    def from_measurement(cls, k_meas: float, **kwargs) -> "ModelParams":
        """Build params with the backaction diffusion D = hbar^2 k_meas."""
        hbar = kwargs.get("hbar", cls.hbar)
        return cls(D=hbar ** 2 * k_meas, k_meas=k_meas, **kwargs)

    def with_(self, **changes) -> "ModelParams":
        if "hbar" in changes and "u0_sq" not in changes and self.u0_sq == self.hbar:
            changes["u0_sq"] = changes["hbar"]
        if "D" in changes and "k_meas" not in changes:
            changes["k_meas"] = None
        return replace(self, **changes)

    @property
    def drive_period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def is_quadratic(self) -> bool:
        return self.B_coef == 0.0


# Potential and derivatives

def potential(q, t, params: ModelParams):
    """V = B q^4 - A q^2 + Lambda q cos(omega t)."""
    q = np.asarray(q, dtype=float)
    return (params.B_coef * q ** 4 - params.A_coef * q ** 2
            + params.Lambda * q * np.cos(params.omega * t))


def force(q, t, params: ModelParams):
    """f = -dV/dq = -4B q^3 + 2A q - Lambda cos(omega t)."""
    q = np.asarray(q, dtype=float)
    return (-4.0 * params.B_coef * q ** 3 + 2.0 * params.A_coef * q
            - params.Lambda * np.cos(params.omega * t))


def force_gradient(q, params: ModelParams):
    """df/dq = -V''(q); independent of the drive."""
    q = np.asarray(q, dtype=float)
    return -12.0 * params.B_coef * q ** 2 + 2.0 * params.A_coef


def d3V(q, params: ModelParams):
    """Third spatial derivative of V; all higher odd derivatives vanish."""
    return 24.0 * params.B_coef * np.asarray(q, dtype=float)


def hamiltonian(q, p, t, params: ModelParams):
    return np.asarray(p, dtype=float) ** 2 / (2.0 * params.m) + potential(q, t, params)


# Hyperbolic point of the undriven flow

def linearize_hyperbolic(params: ModelParams) -> Tuple[float, float]:
    """
    Locate the critical point of the undriven potential with V'' < 0 and
    return (q_eq, lambda_local) where m lambda^2 = f'(q_eq).

    For V = B q^4 - A q^2 the critical points are q = 0 and
    q = +-sqrt(A / 2B); only q = 0 can be a maximum of V, which requires A > 0.
    """
    candidates = [0.0]
    if params.B_coef != 0.0 and params.A_coef / params.B_coef > 0:
        root = math.sqrt(params.A_coef / (2.0 * params.B_coef))
        candidates += [root, -root]

    for q_eq in candidates:
        curvature = float(force_gradient(q_eq, params))
        if curvature > 0:
            lambda_local = math.sqrt(curvature / params.m)
            log.debug("hyperbolic point", extra={"q_eq": q_eq, "lambda_local": lambda_local})
            return q_eq, lambda_local

    raise ModelError(
        f"no hyperbolic critical point for A={params.A_coef}, B={params.B_coef}"
    )
