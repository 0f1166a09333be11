"""Plug-in asymptotic covariances, Wald intervals and percentile-t bootstrap intervals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .config import RunConfig
from .critic import reward_feature_matrix, sigma2_hat as _sigma2_hat
from .engine import run_engine
from .envs import EnvSpec
from .errors import InferenceError
from .policy import policy_feature_matrix, stable_logistic

SINGULAR_RCOND = 1e-12


@dataclass(frozen=True)
class CovarianceReport:
    critic_cov: np.ndarray
    actor_cov: np.ndarray
    sigma2_hat: float
    J_thetatheta: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class IntervalSet:
    lower: np.ndarray
    upper: np.ndarray
    nominal_level: float
    method: str

    def __post_init__(self) -> None:
        if np.any(self.lower > self.upper):
            raise InferenceError("interval with lower > upper")

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (self.lower <= x) & (x <= self.upper)


def _parts(contexts, theta):
    S = np.asarray(contexts, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if S.shape[0] == 0:
        raise InferenceError("no contexts")
    n = S.shape[0]
    gm = policy_feature_matrix(S)
    F0 = reward_feature_matrix(S, np.zeros(n))
    F1 = reward_feature_matrix(S, np.ones(n))
    pi = stable_logistic(gm @ np.asarray(theta, dtype=float))
    return gm, F0, F1, np.atleast_1d(pi)


def _checked_inverse(M: np.ndarray, what: str) -> np.ndarray:
    M = 0.5 * (M + M.T)
    w, vecs = np.linalg.eigh(M)
    scale = max(np.max(np.abs(w)), 1e-300)
    if np.min(np.abs(w)) <= SINGULAR_RCOND * scale:
        i = int(np.argmin(np.abs(w)))
        raise InferenceError(f"{what} is singular (eigenvalue {w[i]:.3g})", direction=vecs[:, i])
    return (vecs / w) @ vecs.T


def expected_ff(contexts, theta) -> np.ndarray:
    """Average over contexts of sum_a pi(a|s) f(s,a) f(s,a)'."""
    gm, F0, F1, pi = _parts(contexts, theta)
    n = gm.shape[0]
    return (F0.T * (1.0 - pi)) @ F0 / n + (F1.T * pi) @ F1 / n


def j_score(mu, theta, g, f0, f1, lam: float) -> np.ndarray:
    """Per-context score: delta * pi (1 - pi) g - 2 lam g g' theta."""
    g = np.asarray(g, dtype=float)
    theta = np.asarray(theta, dtype=float)
    delta = (np.asarray(f1, dtype=float) - np.asarray(f0, dtype=float)) @ np.asarray(mu, dtype=float)
    pi = stable_logistic(g @ theta)
    return delta * pi * (1.0 - pi) * g - 2.0 * lam * g * (g @ theta)


def _scores(mu, theta, gm, F0, F1, pi, lam):
    delta = (F1 - F0) @ np.asarray(mu, dtype=float)
    w = delta * pi * (1.0 - pi)
    return w[:, None] * gm - 2.0 * lam * gm * (gm @ np.asarray(theta, dtype=float))[:, None], delta


def j_derivatives(mu, theta, contexts, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Empirical J_theta_theta (p x p) and J_theta_mu (p x k)."""
    gm, F0, F1, pi = _parts(contexts, theta)
    n = gm.shape[0]
    delta = (F1 - F0) @ np.asarray(mu, dtype=float)
    w2 = delta * pi * (1.0 - pi) * (1.0 - 2.0 * pi)
    G = gm.T @ gm / n
    J_tt = (gm.T * w2) @ gm / n - 2.0 * lam * G
    J_tm = (gm.T * (pi * (1.0 - pi))) @ (F1 - F0) / n
    return J_tt, J_tm


def critic_covariance(contexts, theta_hat, sigma2_hat: float) -> np.ndarray:
    inv = _checked_inverse(expected_ff(contexts, theta_hat), "expected f f'")
    return inv * sigma2_hat


def actor_covariance(mu_hat, theta_hat, contexts, lam: float, sigma2_hat: float) -> CovarianceReport:
    """Sandwich J^-1 V J^-1 with V = s2 J_tm [E f f']^-1 J_mt + E[j j']."""
    gm, F0, F1, pi = _parts(contexts, theta_hat)
    n = gm.shape[0]
    ff_inv = _checked_inverse((F0.T * (1.0 - pi)) @ F0 / n + (F1.T * pi) @ F1 / n, "expected f f'")
    J_tt, J_tm = j_derivatives(mu_hat, theta_hat, contexts, lam)
    scores, _ = _scores(mu_hat, theta_hat, gm, F0, F1, pi, lam)
    V = sigma2_hat * J_tm @ ff_inv @ J_tm.T + scores.T @ scores / n
    Jinv = _checked_inverse(J_tt, "J_theta_theta")
    cov = Jinv @ V @ Jinv
    cov = 0.5 * (cov + cov.T)
    return CovarianceReport(ff_inv * sigma2_hat, cov, float(sigma2_hat), J_tt, 0.5 * (V + V.T))


def _z(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise InferenceError(f"level must lie in (0, 1), got {level}")
    return float(norm.ppf(0.5 + level / 2.0))


def wald_ci(theta_hat, actor_cov, t: int, level: float = 0.95) -> IntervalSet:
    if t <= 0:
        raise InferenceError("t must be positive")
    cov = np.asarray(actor_cov, dtype=float)
    var = np.diag(cov) if cov.ndim == 2 else cov
    half = _z(level) * np.sqrt(np.maximum(var, 0.0) / t)
    th = np.asarray(theta_hat, dtype=float)
    return IntervalSet(th - half, th + half, level, "wald")


def t_pivots(theta_hat, bootstrap_pairs, T: int) -> np.ndarray:
    """sqrt(T) (theta_b - theta_hat) / sqrt(V_b) per draw and coordinate."""
    th = np.asarray(theta_hat, dtype=float)
    tb = np.array([np.asarray(b[0], dtype=float) for b in bootstrap_pairs])
    vb = np.array([np.asarray(b[1], dtype=float) for b in bootstrap_pairs])
    if vb.ndim == 3:
        vb = np.diagonal(vb, axis1=1, axis2=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sqrt(T) * (tb - th) / np.sqrt(vb)


def percentile_t_ci(theta_hat, var_hat, bootstrap_pairs, T: int, level: float = 0.95) -> IntervalSet:
    """Symmetric percentile-t interval from the level-quantile of |pivot|."""
    if len(bootstrap_pairs) < 2:
        raise InferenceError("need at least two bootstrap pairs")
    th = np.asarray(theta_hat, dtype=float)
    var = np.asarray(var_hat, dtype=float)
    var = np.diag(var) if var.ndim == 2 else var
    piv = np.abs(t_pivots(th, bootstrap_pairs, T))
    q = np.empty(th.size)
    for i in range(th.size):
        col = piv[:, i]
        col = col[np.isfinite(col)]
        if col.size < 2:
            raise InferenceError(f"fewer than two finite pivots for coordinate {i}")
        q[i] = np.quantile(col, level)
    half = q * np.sqrt(np.maximum(var, 0.0) / T)
    return IntervalSet(th - half, th + half, level, "percentile_t")


def plug_in(S, A, rewards, mu_hat, theta_hat, lam: float) -> CovarianceReport:
    """Covariance report from an observed history at its end-of-run estimates."""
    F = reward_feature_matrix(S, A)
    resid = np.asarray(rewards, dtype=float) - F @ mu_hat
    return actor_covariance(mu_hat, theta_hat, S, lam, _sigma2_hat(resid, F.shape[1]))


def bootstrap_replicate(context_history, mu_hat_T, residual_pool, cfg: RunConfig,
                        rng: np.random.Generator | int, spec: EnvSpec | None = None
                        ) -> tuple[np.ndarray, np.ndarray, bool]:
    """Rerun the learning loop over the fixed contexts with resampled rewards.

    Rewards are ``f(S_t, A_t^b).mu_hat_T + e_t^b`` with ``e^b`` drawn with
    replacement from the centered residuals; actions follow the evolving
    bootstrap policy.  Draw order: uniforms (T, 2), then residual indices.
    Returns ``(theta_b, var_b, ok)`` where ``var_b`` is the covariance
    diagonal; ``ok`` is False for a flagged replicate.  An integer ``rng``
    is taken as a seed.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(np.random.SeedSequence(int(rng)))
    S = np.asarray(context_history, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    T = S.shape[0]
    pool = np.asarray(residual_pool, dtype=float)
    pool = pool - pool.mean() if pool.size else np.zeros(1)
    spec = spec or (EnvSpec("toy_binary") if S.shape[1] == 1 else EnvSpec("iid"))
    u = rng.random((T, 2))
    eps = pool[rng.integers(0, pool.size, size=T)]
    z = np.zeros((T, S.shape[1] + 1))
    run = run_engine(spec, cfg, z, u, replay_ctx=S, replay_mu=mu_hat_T, replay_eps=eps, T=T)
    th = run.theta_hat
    if run.final_flag or not np.all(np.isfinite(th)):
        return th, np.full(th.size, np.nan), False
    try:
        rep = plug_in(run.S, run.A, run.rewards, run.mu_hat, th, run.lam_hat)
    except InferenceError:
        return th, np.full(th.size, np.nan), False
    var = np.diag(rep.actor_cov).copy()
    return th, var, bool(np.all(var > 0))
