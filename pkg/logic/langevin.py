"""
Stochastic unraveling of the dual Fokker-Planck equation.

    dq = p dt / m
    dp = f(q, t) dt + sqrt(2 D) dW

Euler-Maruyama ensembles, stable/unstable projections at the hyperbolic
point, cumulant checks against the linearized laws, and a tangent-vector
(Benettin) estimate of the time-averaged Lyapunov exponent.

Each trajectory draws its noise, NOISE_BLOCK steps at a time, from its own
stream seeded by (seed, trajectory index); results do not depend on the
chunking or the block size.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from logic.model import ModelParams, force, force_gradient, linearize_hyperbolic

log = logging.getLogger(__name__)

MIN_REPORTED_TRAJECTORIES = 1000
CHUNK = 2048
NOISE_BLOCK = 4096  # steps of noise drawn at a time per trajectory
PASS_SIGMAS = 3.0


class EnsembleError(ValueError):
    """Invalid ensemble arguments or too few trajectories."""


# Projections

def project_stable_unstable(q, p, m: float, lambda_local: float, q_eq: float = 0.0):
    """u+- = (sqrt(lambda m)(q - q_eq) +- p / sqrt(lambda m)) / sqrt(2)."""
    if not lambda_local > 0:
        raise EnsembleError("lambda_local must be > 0")
    scale = math.sqrt(lambda_local * m)
    qs = scale * (np.asarray(q, dtype=float) - q_eq)
    ps = np.asarray(p, dtype=float) / scale
    return (qs + ps) / math.sqrt(2.0), (qs - ps) / math.sqrt(2.0)


# Ensemble statistics

@dataclass
class EnsembleStats:
    times: np.ndarray
    mean_q: np.ndarray
    mean_p: np.ndarray
    mean_u_plus: np.ndarray
    mean_u_minus: np.ndarray
    var_u_plus: np.ndarray
    var_u_minus: np.ndarray
    cov_u: np.ndarray
    stderr: Dict[str, np.ndarray]
    n_trajectories: int
    n_failed: int
    seed: int
    q_eq: float
    lambda_local: float
    trajectories: Optional[np.ndarray] = dc_field(default=None, repr=False)

    def frame(self) -> pd.DataFrame:
        out = pd.DataFrame({
            "time": self.times,
            "mean_q": self.mean_q,
            "mean_p": self.mean_p,
            "mean_u_plus": self.mean_u_plus,
            "mean_u_minus": self.mean_u_minus,
            "var_u_plus": self.var_u_plus,
            "var_u_minus": self.var_u_minus,
            "cov_u": self.cov_u,
        })
        for name, values in self.stderr.items():
            out[f"se_{name}"] = values
        return out


def _trajectory_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _moments(u_plus: np.ndarray, u_minus: np.ndarray, q: np.ndarray, p: np.ndarray):
    """Statistics over axis 0 (trajectories) with standard errors."""
    n = u_plus.shape[0]
    root_n = math.sqrt(n)
    dp_ = u_plus - u_plus.mean(axis=0)
    dm_ = u_minus - u_minus.mean(axis=0)
    var_p = (dp_ ** 2).mean(axis=0)
    var_m = (dm_ ** 2).mean(axis=0)
    cross = dp_ * dm_
    cov = cross.mean(axis=0)

    stats = dict(
        mean_q=q.mean(axis=0), mean_p=p.mean(axis=0),
        mean_u_plus=u_plus.mean(axis=0), mean_u_minus=u_minus.mean(axis=0),
        var_u_plus=var_p, var_u_minus=var_m, cov_u=cov,
    )
    stderr = dict(
        mean_q=q.std(axis=0) / root_n,
        mean_p=p.std(axis=0) / root_n,
        mean_u_plus=np.sqrt(var_p) / root_n,
        mean_u_minus=np.sqrt(var_m) / root_n,
        var_u_plus=np.sqrt(np.maximum((dp_ ** 4).mean(axis=0) - var_p ** 2, 0.0)) / root_n,
        var_u_minus=np.sqrt(np.maximum((dm_ ** 4).mean(axis=0) - var_m ** 2, 0.0)) / root_n,
        cov_u=cross.std(axis=0) / root_n,
    )
    return stats, stderr


def simulate_ensemble(n: int, dt: float, T: float, seed: int, params: ModelParams,
                      start: Tuple[float, float] = (0.0, 0.0),
                      sample_every: int = 1,
                      keep_trajectories: bool = False) -> EnsembleStats:
    """
    Euler-Maruyama ensemble of n trajectories started at `start`, sampled
    every `sample_every` steps. Trajectories that turn non-finite are
    dropped from the statistics and counted in n_failed.
    """
    if n < 1 or not dt > 0 or T < dt or sample_every < 1:
        raise EnsembleError("need n >= 1, dt > 0, T >= dt, sample_every >= 1")

    n_steps = int(round(T / dt))
    sample_steps = np.arange(0, n_steps + 1, sample_every)
    if sample_steps[-1] != n_steps:
        sample_steps = np.append(sample_steps, n_steps)
    times = sample_steps * dt
    noise_scale = math.sqrt(2.0 * params.D * dt)

    try:
        q_eq, lambda_local = linearize_hyperbolic(params.with_(Lambda=0.0))
    except ValueError:
        q_eq, lambda_local = 0.0, float("nan")

    q_all, p_all, ok_all = [], [], []
    for first in range(0, n, CHUNK):
        idx = np.arange(first, min(first + CHUNK, n))
        q = np.full(idx.size, float(start[0]))
        p = np.full(idx.size, float(start[1]))
        streams = [_trajectory_stream(seed, int(i)) for i in idx] if params.D > 0 else None
        noise = None

        q_samples = np.empty((idx.size, sample_steps.size))
        p_samples = np.empty((idx.size, sample_steps.size))
        q_samples[:, 0], p_samples[:, 0] = q, p
        column = 1
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(n_steps):
                if streams is not None and k % NOISE_BLOCK == 0:
                    width = min(NOISE_BLOCK, n_steps - k)
                    noise = np.stack([rng.standard_normal(width) for rng in streams])
                f = force(q, k * dt, params)
                q = q + p * (dt / params.m)
                p = p + f * dt
                if noise is not None:
                    p = p + noise_scale * noise[:, k % NOISE_BLOCK]
                if column < sample_steps.size and sample_steps[column] == k + 1:
                    q_samples[:, column], p_samples[:, column] = q, p
                    column += 1

        ok = np.all(np.isfinite(q_samples) & np.isfinite(p_samples), axis=1)
        q_all.append(q_samples)
        p_all.append(p_samples)
        ok_all.append(ok)

    q_s = np.concatenate(q_all)
    p_s = np.concatenate(p_all)
    ok = np.concatenate(ok_all)
    n_failed = int((~ok).sum())
    if n_failed:
        log.warning("non-finite trajectories dropped", extra={"n_failed": n_failed, "n": n})
    q_s, p_s = q_s[ok], p_s[ok]
    if q_s.shape[0] == 0:
        raise EnsembleError("every trajectory turned non-finite")
    if q_s.shape[0] < MIN_REPORTED_TRAJECTORIES:
        log.warning("ensemble below reporting size",
                    extra={"n_valid": int(q_s.shape[0]), "minimum": MIN_REPORTED_TRAJECTORIES})

    if math.isfinite(lambda_local):
        u_plus, u_minus = project_stable_unstable(q_s, p_s, params.m, lambda_local, q_eq)
    else:
        u_plus = u_minus = np.full_like(q_s, np.nan)
    stats, stderr = _moments(u_plus, u_minus, q_s, p_s)

    log.info("ensemble finished", extra={"n": n, "steps": n_steps, "seed": seed,
                                         "n_failed": n_failed})
    return EnsembleStats(
        times=times, stderr=stderr, n_trajectories=int(q_s.shape[0]), n_failed=n_failed,
        seed=seed, q_eq=q_eq, lambda_local=lambda_local,
        trajectories=np.stack([q_s, p_s], axis=-1) if keep_trajectories else None,
        **stats,
    )


# Linearized laws

def analytic_cumulants(t, params: ModelParams, lambda_local: float):
    """Var(u+), Var(u-), Cov(u+, u-) for the noise about a hyperbolic point."""
    t = np.asarray(t, dtype=float)
    m, D, lam = params.m, params.D, lambda_local
    var_plus = D / (2.0 * m * lam ** 2) * np.expm1(2.0 * lam * t)
    var_minus = -D / (2.0 * m * lam ** 2) * np.expm1(-2.0 * lam * t)
    cov = -D * t / (m * lam)
    return var_plus, var_minus, cov


def variance_ratio(t, lambda_local: float):
    """Var(u+) / Var(u-) = e^{2 lambda t} for the linearized laws."""
    return np.exp(2.0 * lambda_local * np.asarray(t, dtype=float))


def cumulant_check(stats: EnsembleStats, params: ModelParams,
                   start: Tuple[float, float] = (0.0, 0.0)) -> pd.DataFrame:
    """
    Compare measured cumulants and noise-averaged means with the linearized
    laws at each sample time; a row passes when every quantity lies within
    three standard errors.
    """
    if stats.n_trajectories < MIN_REPORTED_TRAJECTORIES:
        log.warning("cumulant check on an undersized ensemble",
                    extra={"n": stats.n_trajectories})
    lam = stats.lambda_local
    t = stats.times
    var_plus, var_minus, cov = analytic_cumulants(t, params, lam)
    u0_plus, u0_minus = project_stable_unstable(start[0], start[1], params.m, lam, stats.q_eq)
    expected = {
        "var_u_plus": var_plus,
        "var_u_minus": var_minus,
        "cov_u": cov,
        "mean_u_plus": u0_plus * np.exp(lam * t),
        "mean_u_minus": u0_minus * np.exp(-lam * t),
    }

    table = pd.DataFrame({"time": t})
    passed = np.ones(t.size, dtype=bool)
    for name, target in expected.items():
        measured = getattr(stats, name)
        se = stats.stderr[name]
        z = np.where(se > 0, np.abs(measured - target) / np.where(se > 0, se, 1.0),
                     np.where(np.isclose(measured, target, rtol=1e-12, atol=1e-15), 0.0, np.inf))
        table[name] = measured
        table[f"{name}_expected"] = target
        table[f"{name}_z"] = z
        passed &= z <= PASS_SIGMAS
    table["passed"] = passed
    table.attrs["undersized"] = stats.n_trajectories < MIN_REPORTED_TRAJECTORIES
    return table


# Lyapunov exponent

@dataclass
class LyapunovEstimate:
    value: float
    stderr: float
    n_used: int
    n_escaped: int
    per_trajectory: np.ndarray = dc_field(repr=False)


def _flow(state: np.ndarray, t: float, params: ModelParams) -> np.ndarray:
    """Right-hand side for rows (q, p, dq, dp): orbit plus tangent vector."""
    q, p, dq, dp = state
    return np.stack([
        p / params.m,
        force(q, t, params),
        dp / params.m,
        force_gradient(q, params) * dq,
    ])


def _rk4(state: np.ndarray, t: float, h: float, params: ModelParams) -> np.ndarray:
    k1 = _flow(state, t, params)
    k2 = _flow(state + 0.5 * h * k1, t + 0.5 * h, params)
    k3 = _flow(state + 0.5 * h * k2, t + 0.5 * h, params)
    k4 = _flow(state + h * k3, t + h, params)
    return state + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lyapunov_estimate(T: float, n: int, dt: float, seed: int, params: ModelParams,
                      spread: float = 1.0, transient: float = 0.0,
                      renorm_every: int = 10, escape_radius: float = 50.0) -> LyapunovEstimate:
    """
    Largest Lyapunov exponent of the noise-free flow, averaged over n
    initial conditions drawn uniformly within `spread` of the hyperbolic
    point. The tangent vector is renormalized every `renorm_every` steps;
    growth is accumulated after `transient`. Trajectories leaving
    `escape_radius` are excluded and counted.
    """
    if not (T > transient >= 0 and dt > 0 and n >= 1):
        raise EnsembleError("need T > transient >= 0, dt > 0, n >= 1")
    if params.D != 0:
        log.warning("Lyapunov estimate ignores D; using the noise-free flow", extra={"D": params.D})

    try:
        q_eq, _ = linearize_hyperbolic(params.with_(Lambda=0.0))
    except ValueError:
        q_eq = 0.0
    rng = np.random.default_rng(seed)
    state = np.zeros((4, n))
    state[0] = q_eq + rng.uniform(-spread, spread, n)
    state[1] = rng.uniform(-spread, spread, n)
    angle = rng.uniform(0.0, 2.0 * np.pi, n)
    state[2], state[3] = np.cos(angle), np.sin(angle)

    n_steps = int(round(T / dt))
    # growth counts from the last renormalization inside the transient
    start_step = (int(round(transient / dt)) // renorm_every) * renorm_every
    log_growth = np.zeros(n)
    alive = np.ones(n, dtype=bool)

    t = 0.0
    for k in range(1, n_steps + 1):
        state = _rk4(state, t, dt, params)
        t = k * dt
        if k % renorm_every == 0 or k == n_steps:
            norm = np.hypot(state[2], state[3])
            alive &= np.isfinite(norm) & (np.abs(state[0]) < escape_radius) & (np.abs(state[1]) < escape_radius)
            norm = np.where(alive & (norm > 0), norm, 1.0)
            if k > start_step:
                log_growth += np.log(norm)
            else:
                log_growth[:] = 0.0
            state[2] /= norm
            state[3] /= norm

    n_escaped = int((~alive).sum())
    if n_escaped:
        log.warning("trajectories escaped and were excluded", extra={"n_escaped": n_escaped})
    if not alive.any():
        raise EnsembleError("every trajectory escaped")

    window = (n_steps - start_step) * dt
    per_traj = log_growth[alive] / window
    stderr = float(per_traj.std(ddof=1) / math.sqrt(per_traj.size)) if per_traj.size > 1 else 0.0
    estimate = LyapunovEstimate(float(per_traj.mean()), stderr, int(per_traj.size), n_escaped, per_traj)
    log.info("lyapunov estimate", extra={"value": estimate.value, "stderr": estimate.stderr})
    return estimate
