"""
Structure-termination and quantum-classical transition scales.

    l_cl(t)  = sqrt(D t / (m lambda_bar))             noise smoothing width
    l_q(t)   = hbar sqrt(m lambda_bar / (D t))        interference filter scale
    delta(t) = (area / u0) exp(-lambda_bar t)         fold spacing, u0 = sqrt(u0_sq)
    t*       : l_cl(t*) = delta(t*)
    t_qc     = m hbar lambda_bar / D                  l_cl^2 = l_q^2 = hbar

l_q is the filter wavelength hbar / sqrt(D t) rescaled by sqrt(m lambda_bar), so
that l_cl and l_q cross at t_qc where both equal sqrt(hbar).

x0 = ln(2 m lambda_bar^2 area^2 / (D u0_sq)) uses u0_sq as written, while the
fold spacing uses the linear scale u0; together they reproduce the reference
t* values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import pandas as pd
from scipy.optimize import bisect

from logic.model import ModelParams

log = logging.getLogger(__name__)

ROOT_XTOL = 1e-10
BRACKET_SPAN = 1e4  # in units of 1 / lambda_bar

TRANSITION_FIRST = "t_qc < t_star"
TERMINATION_FIRST = "t_star <= t_qc"


class TimescaleError(ValueError):
    """Invalid inputs or no bracketing interval for t*."""


def l_classical(t: float, params: ModelParams) -> float:
    if t < 0:
        raise TimescaleError("t must be >= 0")
    return math.sqrt(params.D * t / (params.m * params.lambda_bar))


def l_quantum(t: float, params: ModelParams) -> float:
    if not t > 0:
        raise TimescaleError("l_q diverges at t = 0")
    if not params.D > 0:
        raise TimescaleError("l_q needs D > 0")
    return params.hbar * math.sqrt(params.m * params.lambda_bar / (params.D * t))


def folding_time(params: ModelParams) -> float:
    """Time before which the fold-spacing estimate does not apply yet."""
    return math.log(params.area / params.u0_sq) / (2.0 * params.lambda_bar)


def fold_spacing(t: float, params: ModelParams) -> float:
    if t < folding_time(params):
        log.warning("fold spacing used before folding onset",
                    extra={"t": t, "folding_time": folding_time(params)})
    return params.area / math.sqrt(params.u0_sq) * math.exp(-params.lambda_bar * t)


def _x0(params: ModelParams) -> float:
    return math.log(2.0 * params.m * params.lambda_bar ** 2 * params.area ** 2
                    / (params.D * params.u0_sq))


def t_star(params: ModelParams):
    """
    Returns (t_star_exact, t_star_approx, x0). The exact value is the
    bisection root of l_cl(t) = delta(t); the approximation is the closed form
    (x0 / 2 lambda_bar) [1 - ln(x0) / (1 + x0)].
    """
    if not (params.D > 0 and params.u0_sq > 0 and params.area > 0 and params.lambda_bar > 0):
        raise TimescaleError("t* needs D, u0_sq, area and lambda_bar > 0")

    lam = params.lambda_bar
    scale = params.area / math.sqrt(params.u0_sq)

    def gap(t):
        return math.sqrt(params.D * t / (params.m * lam)) - scale * math.exp(-lam * t)

    lo, hi = 0.0, BRACKET_SPAN / lam
    if not (gap(lo) < 0 < gap(hi)):
        raise TimescaleError(f"no bracket for t* in (0, {hi:g})")
    exact = bisect(gap, lo, hi, xtol=ROOT_XTOL, maxiter=500)

    x0 = _x0(params)
    approx = x0 / (2.0 * lam) * (1.0 - math.log(x0) / (1.0 + x0)) if x0 > 0 else float("nan")
    return exact, approx, x0


def t_qc(params: ModelParams) -> float:
    if not (params.D > 0 and params.hbar > 0):
        raise TimescaleError("t_qc needs D > 0 and hbar > 0")
    return params.m * params.hbar * params.lambda_bar / params.D


@dataclass
class TimescaleReport:
    t_star_exact: float
    t_star_approx: float
    x0: float
    t_qc: float
    folding_time: float
    regime: str
    params: ModelParams

    @property
    def self_consistent(self) -> bool:
        """Folding starts before t*, so the fold-spacing estimate applied."""
        return self.folding_time < self.t_star_exact

    @property
    def l_cl(self) -> Callable[[float], float]:
        return lambda t: l_classical(t, self.params)

    @property
    def l_q(self) -> Callable[[float], float]:
        return lambda t: l_quantum(t, self.params)

    @property
    def delta(self) -> Callable[[float], float]:
        return lambda t: fold_spacing(t, self.params)

    def as_row(self) -> dict:
        return {
            "D": self.params.D,
            "hbar": self.params.hbar,
            "lambda_bar": self.params.lambda_bar,
            "t_star": self.t_star_exact,
            "t_star_approx": self.t_star_approx,
            "x0": self.x0,
            "t_qc": self.t_qc,
            "folding_time": self.folding_time,
            "l_cl_t_star": l_classical(self.t_star_exact, self.params),
            "l_cl_t_qc": l_classical(self.t_qc, self.params),
            "regime": self.regime,
        }


def timescale_report(params: ModelParams) -> TimescaleReport:
    exact, approx, x0 = t_star(params)
    tqc = t_qc(params)
    regime = TRANSITION_FIRST if tqc < exact else TERMINATION_FIRST
    report = TimescaleReport(exact, approx, x0, tqc, folding_time(params), regime, params)
    log.info("timescales", extra={"D": params.D, "t_star": exact, "t_qc": tqc, "regime": regime})
    return report


def scan_timescales(params: ModelParams, d_values: Iterable[float]) -> pd.DataFrame:
    """One report row per diffusion coefficient."""
    rows = [timescale_report(params.with_(D=float(d))).as_row() for d in d_values]
    return pd.DataFrame(rows)
