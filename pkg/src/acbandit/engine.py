"""Thin driver around the compiled trajectory loop, plus seed derivation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .config import GLOBAL_MODES, RunConfig
from .envs import EnvSpec


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for a (seed, key...) pair; keys are non-negative ints."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=key)))


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    return derive_rng(seed, r, 0)


def bootstrap_rng(seed: int, r: int, b: int) -> np.random.Generator:
    return derive_rng(seed, r, b + 1)


def draw_noise(spec: EnvSpec, T: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Innovation normals (T, d+1) then uniforms (T, 2), in that order."""
    z = rng.standard_normal((T, spec.d + 1))
    u = rng.random((T, 2))
    return z, u


@dataclass
class RawRun:
    S: np.ndarray
    A: np.ndarray
    Y: np.ndarray
    rewards: np.ndarray
    theta_path: np.ndarray
    lam_path: np.ndarray
    mu_hat: np.ndarray
    n_nonstationary: int
    n_infeasible: int
    final_flag: bool

    @property
    def theta_hat(self) -> np.ndarray:
        return self.theta_path[-1].copy()

    @property
    def lam_hat(self) -> float:
        return float(self.lam_path[-1])


def run_engine(spec: EnvSpec, cfg: RunConfig, z: np.ndarray, u: np.ndarray,
               replay_ctx: np.ndarray | None = None, replay_mu: np.ndarray | None = None,
               replay_eps: np.ndarray | None = None, T: int | None = None) -> RawRun:
    T = cfg.T if T is None else T
    d = spec.d
    p, k = d + 1, 2 * d + 2
    replay = replay_ctx is not None
    if replay:
        rctx = np.ascontiguousarray(replay_ctx, dtype=float).reshape(T, d)
        rmu = np.ascontiguousarray(replay_mu, dtype=float)
        reps = np.ascontiguousarray(replay_eps, dtype=float)
    else:
        rctx, rmu, reps = np.zeros((1, d)), np.zeros(k), np.zeros(1)
    S = np.empty((T, d))
    A = np.empty(T, dtype=np.int64)
    Y = np.empty(T)
    th = np.empty((T, p))
    lp = np.empty(T)
    status = np.zeros(3, dtype=np.int64)
    o = cfg.optimizer
    mu, _, _ = K.run_loop(
        spec.code, spec.tau_value, spec.alpha_value, spec.ar_sd, spec.noise_sd, spec.outcome_sign,
        np.ascontiguousarray(z[:T]), np.ascontiguousarray(u[:T]), replay, rctx, rmu, reps,
        cfg.burn_in, cfg.fixed_lambda, cfg.budget, cfg.search_every,
        cfg.clip, cfg.K, cfg.zeta, 256,
        GLOBAL_MODES[cfg.actor_global], o.bound, o.lam_min, o.lam_step, o.lam_count,
        o.grid_lo, o.grid_hi, o.grid_step, o.step0, o.tol, o.max_evals,
        S, A, Y, th, lp, status)
    rewards = Y if replay else spec.outcome_sign * Y
    return RawRun(S, A, Y, rewards, th, lp, mu, int(status[0]), int(status[1]), bool(status[2]))
