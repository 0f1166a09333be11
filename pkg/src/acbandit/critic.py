"""Incremental ridge estimate of the linear reward model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

REFACTOR_EVERY = 256


def reward_features(s, a: int) -> np.ndarray:
    """f(s, a) = [1, s, a, a*s]."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return np.concatenate(([1.0], s, [float(a)], a * s))


def reward_feature_matrix(contexts, actions) -> np.ndarray:
    S = np.asarray(contexts, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    a = np.asarray(actions, dtype=float)[:, None]
    return np.hstack([np.ones((S.shape[0], 1)), S, a, a * S])


@dataclass(frozen=True)
class DecisionRecord:
    context: np.ndarray
    action: int
    reward: float

    def __post_init__(self) -> None:
        if self.action not in (0, 1):
            raise DataError(f"action must be 0 or 1, got {self.action!r}")
        if not np.isfinite(self.reward):
            raise DataError("reward must be finite")
        object.__setattr__(self, "context", np.atleast_1d(np.asarray(self.context, dtype=float)))


@dataclass
class CriticState:
    """Ridge accumulators B = zeta*I + sum f f', A = sum f r and the estimate mu_hat.

    ``B_inv`` is kept current by rank-one updates and rebuilt from ``B``
    every ``REFACTOR_EVERY`` updates.
    """

    B: np.ndarray
    A: np.ndarray
    mu_hat: np.ndarray
    n_obs: int
    zeta: float
    B_inv: np.ndarray = field(repr=False)
    since_refactor: int = 0

    @property
    def k(self) -> int:
        return self.A.size

    def copy(self) -> "CriticState":
        return CriticState(self.B.copy(), self.A.copy(), self.mu_hat.copy(), self.n_obs,
                           self.zeta, self.B_inv.copy(), self.since_refactor)

    def update(self, f, r: float) -> None:
        """In-place version of :func:`critic_update`."""
        f = np.asarray(f, dtype=float)
        if f.shape != (self.k,):
            raise ConfigError(f"reward feature has shape {f.shape}, expected ({self.k},)", key="f")
        if not (np.all(np.isfinite(f)) and np.isfinite(r)):
            raise DataError("non-finite feature or reward; update rejected")
        self.B += np.outer(f, f)
        self.A += f * r
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.B_inv = np.linalg.inv(self.B)
            self.B_inv = 0.5 * (self.B_inv + self.B_inv.T)
            self.since_refactor = 0
        else:
            v = self.B_inv @ f
            self.B_inv -= np.outer(v, v) / (1.0 + f @ v)
        self.mu_hat = self.B_inv @ self.A
        self.n_obs += 1


def critic_init(k: int, zeta: float = 1.0) -> CriticState:
    if k < 1:
        raise ConfigError("feature dimension must be at least 1", key="k")
    if not zeta > 0:
        raise ConfigError(f"ridge weight must be positive, got {zeta}", key="zeta")
    return CriticState(
        B=zeta * np.eye(k), A=np.zeros(k), mu_hat=np.zeros(k), n_obs=0, zeta=float(zeta),
        B_inv=np.eye(k) / zeta,
    )


def critic_update(state: CriticState, f, r: float) -> CriticState:
    new = state.copy()
    new.update(f, r)
    return new


def critic_fit(contexts, actions, rewards, zeta: float = 1.0) -> CriticState:
    """Critic state after ingesting a whole history in order."""
    F = reward_feature_matrix(contexts, actions)
    st = critic_init(F.shape[1], zeta)
    for f, r in zip(F, np.asarray(rewards, dtype=float)):
        st.update(f, r)
    return st


def reward_estimate_raw(state: CriticState, f) -> float:
    return float(np.asarray(f, dtype=float) @ state.mu_hat)


def clip_estimate(x, K: float = 1.0):
    """Clamp to [-(K+1), K+1]."""
    if not K > 0:
        raise ConfigError(f"clip constant must be positive, got {K}", key="K")
    return np.clip(x, -(K + 1.0), K + 1.0)


def reward_estimate_clipped(state: CriticState, f, K: float = 1.0) -> float:
    return float(clip_estimate(reward_estimate_raw(state, f), K))


def residuals(state: CriticState, history, feature_map=reward_features) -> np.ndarray:
    """R - f(S, A).mu_hat for each record, in order."""
    if len(history) == 0:
        return np.zeros(0)
    F = np.array([feature_map(rec.context, rec.action) for rec in history])
    R = np.array([rec.reward for rec in history])
    return R - F @ state.mu_hat


def sigma2_hat(resid, k: int) -> float:
    """Residual variance with a degrees-of-freedom correction."""
    resid = np.asarray(resid, dtype=float)
    dof = resid.size - k
    if dof <= 0:
        raise DataError(f"need more than {k} observations for a residual variance")
    return float(resid @ resid / dof)
