"""
Stroboscopic (one drive period) map of the noise-free flow, its hyperbolic
periodic point, and the early-time unstable manifold.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from logic.model import ModelParams, force, linearize_hyperbolic

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
MIN_NEWTON_STEP = 2.0 ** -20
CONTINUATION_STEPS = 20
FD_EPS = 1e-7
MAX_REFINE_PASSES = 60
SEED_POINTS = 16


class ManifoldError(RuntimeError):
    """Newton failure, a non-hyperbolic point, or an exhausted vertex budget."""


def _orbit_rhs(state: np.ndarray, t: float, params: ModelParams) -> np.ndarray:
    return np.stack([state[1] / params.m, force(state[0], t, params)])


def flow(points: np.ndarray, t0: float, duration: float, params: ModelParams,
         steps: int) -> np.ndarray:
    """RK4 transport of points with shape (2, N) from t0 to t0 + duration."""
    state = np.array(points, dtype=float)
    h = duration / steps
    t = t0
    for k in range(steps):
        k1 = _orbit_rhs(state, t, params)
        k2 = _orbit_rhs(state + 0.5 * h * k1, t + 0.5 * h, params)
        k3 = _orbit_rhs(state + 0.5 * h * k2, t + 0.5 * h, params)
        k4 = _orbit_rhs(state + h * k3, t + h, params)
        state = state + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + (k + 1) * h
    return state


@dataclass(frozen=True)
class StroboscopicMap:
    """x -> flow over `periods` drive periods starting at phase zero."""

    params: ModelParams
    steps_per_period: int = 1000
    periods: int = 1

    @property
    def duration(self) -> float:
        return self.periods * self.params.drive_period

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        flat = points.reshape(2, -1)
        out = flow(flat, 0.0, self.duration, self.params, self.steps_per_period * self.periods)
        return out.reshape(points.shape)

    def jacobian(self, x: np.ndarray, eps: float = FD_EPS) -> np.ndarray:
        """Central finite-difference Jacobian, all four probes in one batch."""
        probes = np.repeat(np.asarray(x, dtype=float)[:, None], 4, axis=1)
        probes[0, 0] += eps
        probes[0, 1] -= eps
        probes[1, 2] += eps
        probes[1, 3] -= eps
        images = self(probes)
        return np.column_stack([(images[:, 0] - images[:, 1]) / (2 * eps),
                                (images[:, 2] - images[:, 3]) / (2 * eps)])


def _newton(smap: StroboscopicMap, guess, tol: float, max_iter: int):
    """Backtracking Newton on P(x) - x = 0; halves the step until the residual drops."""
    x = np.array(guess, dtype=float)
    residual = smap(x) - x
    size = np.linalg.norm(residual)

    for it in range(max_iter):
        if size < tol:
            log.debug("periodic point converged", extra={"iterations": it, "q": x[0], "p": x[1]})
            return x, smap.jacobian(x)
        jac = smap.jacobian(x)
        try:
            direction = np.linalg.solve(jac - np.eye(2), residual)
        except np.linalg.LinAlgError as err:
            raise ManifoldError(f"singular Newton system at iteration {it}") from err

        alpha = 1.0
        while alpha >= MIN_NEWTON_STEP:
            trial = x - alpha * direction
            trial_residual = smap(trial) - trial
            trial_size = np.linalg.norm(trial_residual)
            if np.isfinite(trial_size) and trial_size < (1.0 - 1e-4 * alpha) * size:
                break
            alpha *= 0.5
        else:
            raise ManifoldError(f"Newton line search stalled at iteration {it} (residual {size:.3g})")
        x, residual, size = trial, trial_residual, trial_size

    raise ManifoldError(f"Newton did not converge to {tol:g} in {max_iter} iterations")


def find_periodic_point(smap: StroboscopicMap, guess: Optional[Tuple[float, float]] = None,
                        tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER,
                        continuation_steps: int = CONTINUATION_STEPS):
    """
    Periodic point of the stroboscopic map. Returns (point, jacobian).

    With an explicit guess, damped Newton runs at the full drive. Otherwise
    the drive amplitude is raised from zero in `continuation_steps` equal
    increments, starting from the undriven hyperbolic point and predicting
    each root by linear extrapolation of the previous two.
    """
    if guess is not None:
        return _newton(smap, guess, tol, max_iter)

    params = smap.params
    q_eq, _ = linearize_hyperbolic(params.with_(Lambda=0.0))
    if params.Lambda == 0.0:
        return _newton(smap, (q_eq, 0.0), tol, max_iter)
    if continuation_steps < 1:
        raise ManifoldError("continuation_steps must be >= 1")

    roots = [np.array([q_eq, 0.0])]
    for level in np.linspace(0.0, params.Lambda, continuation_steps + 1)[1:]:
        stage = replace(smap, params=params.with_(Lambda=float(level)))
        predicted = 2.0 * roots[-1] - roots[-2] if len(roots) > 1 else roots[-1]
        x, jac = _newton(stage, predicted, tol, max_iter)
        roots.append(x)
    log.debug("continuation finished", extra={"steps": continuation_steps, "q": x[0], "p": x[1]})
    return x, jac


def unstable_direction(jacobian: np.ndarray) -> Tuple[float, np.ndarray]:
    eigvals, eigvecs = np.linalg.eig(jacobian)
    i = int(np.argmax(np.abs(eigvals)))
    mu = eigvals[i]
    if abs(mu.imag) > 1e-9 or abs(mu.real) <= 1.0:
        raise ManifoldError(f"periodic point is not hyperbolic (multipliers {eigvals})")
    v = np.real(eigvecs[:, i])
    return float(mu.real), v / np.linalg.norm(v)


@dataclass
class ManifoldPolyline:
    vertices: np.ndarray  # (N, 2) columns q, p
    arc_time: np.ndarray  # model time needed to reach each vertex from the seed
    fixed_point: np.ndarray
    multiplier: float
    resolution: float

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({"q": self.vertices[:, 0], "p": self.vertices[:, 1],
                             "arc_time": self.arc_time})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, resolution: float = float("nan")) -> "ManifoldPolyline":
        return cls(frame[["q", "p"]].to_numpy(), frame["arc_time"].to_numpy(),
                   np.array([np.nan, np.nan]), float("nan"), resolution)


def _trace_branch(smap: StroboscopicMap, x_star: np.ndarray, direction: np.ndarray,
                  mu: float, epsilon: float, iterations: int, resolution: float,
                  budget: int):
    """
    Seed parameters sigma in [0, 1] place points at x* + eps |mu|^sigma v;
    iterate k carries them to the k-th image. Gaps above `resolution` are
    closed by inserting midpoints in sigma and mapping them k times.
    """
    def seed(sigma):
        return x_star[:, None] + epsilon * np.abs(mu) ** sigma[None, :] * direction[:, None]

    def image(sigma, k):
        pts = seed(sigma)
        for _ in range(k):
            pts = smap(pts)
        return pts

    sigmas = np.linspace(0.0, 1.0, SEED_POINTS)
    points = seed(sigmas)
    pieces_v, pieces_t = [], []
    total = 0

    for k in range(iterations + 1):
        if k > 0:
            points = smap(points)
        for _ in range(MAX_REFINE_PASSES):
            gaps = np.hypot(*np.diff(points, axis=1))
            wide = np.flatnonzero(gaps > resolution)
            if wide.size == 0:
                break
            mids = 0.5 * (sigmas[wide] + sigmas[wide + 1])
            new_points = image(mids, k)
            sigmas = np.insert(sigmas, wide + 1, mids)
            points = np.insert(points, wide + 1, new_points, axis=1)
            if total + sigmas.size > budget:
                raise ManifoldError(f"vertex budget {budget} exceeded")
        else:
            raise ManifoldError("refinement did not reach the requested resolution")

        keep = slice(1, None) if k > 0 else slice(None)
        pieces_v.append(points[:, keep].T)
        pieces_t.append((k + sigmas[keep]) * smap.duration)
        total += pieces_v[-1].shape[0]
        if total > budget:
            raise ManifoldError(f"vertex budget {budget} exceeded")

    return np.concatenate(pieces_v), np.concatenate(pieces_t)


def trace_unstable_manifold(t_max: float, resolution: float, params: ModelParams,
                            epsilon: Optional[float] = None,
                            steps_per_period: int = 1000,
                            max_vertices: int = 200_000) -> ManifoldPolyline:
    """
    Both branches of the unstable manifold of the hyperbolic periodic point,
    joined through the point into one ordered polyline. Iterates the period
    map floor(t_max / period) times (the doubled map when the unstable
    multiplier is negative).
    """
    if t_max < 0 or not resolution > 0:
        raise ManifoldError("need t_max >= 0 and resolution > 0")
    if params.D != 0:
        log.warning("manifold traced for the noise-free flow; D ignored", extra={"D": params.D})
    if epsilon is None:
        epsilon = 1e-6 * math.sqrt(params.area)

    smap = StroboscopicMap(params, steps_per_period)
    x_star, jac = find_periodic_point(smap)
    mu, v = unstable_direction(jac)
    if mu < 0:
        smap = StroboscopicMap(params, steps_per_period, periods=2)
        mu = mu * mu

    iterations = int(math.floor(t_max / smap.duration + 1e-12))
    plus_v, plus_t = _trace_branch(smap, x_star, v, mu, epsilon, iterations, resolution, max_vertices)
    minus_v, minus_t = _trace_branch(smap, x_star, -v, mu, epsilon, iterations, resolution,
                                     max_vertices - plus_v.shape[0])

    vertices = np.concatenate([minus_v[::-1], plus_v])
    arc_time = np.concatenate([minus_t[::-1], plus_t])
    log.info("unstable manifold traced", extra={"vertices": int(vertices.shape[0]),
                                                "iterations": iterations, "multiplier": mu})
    return ManifoldPolyline(vertices, arc_time, x_star, mu, resolution)
