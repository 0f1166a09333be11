"""Logistic stochastic policy over a binary action."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def _vec(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError(f"expected a non-empty vector, got shape {arr.shape}", key=name)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("entries must be finite", key=name)
    return arr


@dataclass(frozen=True)
class PolicyParams:
    """Coefficient vector of the logistic policy."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", _vec(self.theta, "theta"))

    @property
    def p(self) -> int:
        return self.theta.size


def _theta(theta) -> np.ndarray:
    if isinstance(theta, PolicyParams):
        return theta.theta
    return _vec(theta, "theta")


def policy_features(s) -> np.ndarray:
    """Policy feature g(s) = [1, s]."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return np.concatenate(([1.0], s))


def policy_feature_matrix(contexts) -> np.ndarray:
    """Stack g(s) for an (n, d) array of contexts."""
    S = np.asarray(contexts, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    return np.hstack([np.ones((S.shape[0], 1)), S])


def stable_logistic(x):
    """Overflow-free logistic, elementwise."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def linear_score(theta, g) -> float:
    th = _theta(theta)
    g = _vec(g, "g")
    if g.size != th.size:
        raise ConfigError(f"policy feature has length {g.size}, theta has {th.size}", key="g")
    return float(g @ th)


def action_prob(theta, g) -> float:
    """Probability of action 1."""
    return stable_logistic(linear_score(theta, g))


def sample_action(theta, g, u: float) -> int:
    """Action 1 iff the uniform draw ``u`` falls below the action-1 probability."""
    return int(u < action_prob(theta, g))


def prob_grad(theta, g) -> np.ndarray:
    """Gradient of the action-1 probability with respect to theta."""
    pi = action_prob(theta, g)
    return pi * (1.0 - pi) * np.asarray(g, dtype=float)
