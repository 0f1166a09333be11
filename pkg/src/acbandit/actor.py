"""Actor step: maximize the empirical regularized average reward and search the multiplier."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .critic import CriticState, clip_estimate
from .errors import ConfigError, DataError, LambdaSearchError, OptimizerError
from .policy import policy_feature_matrix

STATIONARY_TOL = 1e-3


@dataclass(frozen=True)
class ConstraintConfig:
    p0: float = 0.1
    alpha: float = 0.1
    lam: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.p0 < 0.5:
            raise ConfigError(f"must lie in (0, 0.5), got {self.p0}", key="p0")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"must lie in (0, 1), got {self.alpha}", key="alpha")
        if not (self.lam >= 0.0 and math.isfinite(self.lam)):
            raise ConfigError(f"must be a finite non-negative number, got {self.lam}", key="lambda")

    @property
    def budget(self) -> float:
        return constraint_budget(self.p0, self.alpha)


@dataclass(frozen=True)
class OptimizerSettings:
    """Grid and pattern-search constants of the actor maximizer.

    ``bound`` boxes every coordinate (infinite by default); the multiplier
    lattice is ``{lam_min} U {i * lam_step : i = 1..lam_count}``.
    """

    grid_lo: float = -2.0
    grid_hi: float = 2.0
    grid_step: float = 0.5
    step0: float = 0.25
    tol: float = 1e-4
    max_evals: int = 2000
    bound: float = math.inf
    lam_min: float = 1.0 / 1024
    lam_step: float = 1.0 / 256
    lam_count: int = 1024

    def __post_init__(self) -> None:
        if not self.grid_hi > self.grid_lo or not self.grid_step > 0:
            raise ConfigError("grid needs grid_hi > grid_lo and a positive step", key="grid")
        if not (self.step0 > 0 and self.tol > 0 and self.max_evals > 0):
            raise ConfigError("pattern search constants must be positive", key="step0")
        if not (0 < self.lam_min and 0 < self.lam_step and self.lam_count >= 1):
            raise ConfigError("multiplier lattice must be positive", key="lambda_step")

    @property
    def lam_max(self) -> float:
        return self.lam_count * self.lam_step


@dataclass(frozen=True)
class GramEstimate:
    G: np.ndarray
    n: int


@dataclass(frozen=True)
class ActorResult:
    theta: np.ndarray
    value: float
    grad_inf: float
    converged: bool


@dataclass(frozen=True)
class LambdaResult:
    lam: float
    theta: np.ndarray
    constraint: float


def constraint_budget(p0: float, alpha: float) -> float:
    """Right-hand side (log(p0/(1-p0)))^2 * alpha of the quadratic constraint."""
    if not 0.0 < p0 < 0.5:
        raise ConfigError(f"must lie in (0, 0.5), got {p0}", key="p0")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"must lie in (0, 1), got {alpha}", key="alpha")
    return math.log(p0 / (1.0 - p0)) ** 2 * alpha


def empirical_gram(policy_features) -> GramEstimate:
    gm = np.asarray(policy_features, dtype=float)
    if gm.ndim != 2 or gm.shape[0] == 0:
        raise DataError("need a non-empty (n, p) array of policy features")
    return GramEstimate(gm.T @ gm / gm.shape[0], gm.shape[0])


def constraint_value(theta, G) -> float:
    G = G.G if isinstance(G, GramEstimate) else np.asarray(G, dtype=float)
    th = np.asarray(theta, dtype=float)
    return float(th @ G @ th)


def estimated_effects(contexts, mu, clip: bool = False, K_clip: float = 1.0):
    """Estimated rewards of action 0 and the estimated treatment effect per context."""
    S = np.asarray(contexts, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    d = S.shape[1]
    mu = np.asarray(mu, dtype=float)
    if mu.size != 2 * d + 2:
        raise ConfigError(f"reward parameter has length {mu.size}, expected {2 * d + 2}", key="mu")
    r0 = mu[0] + S @ mu[1:d + 1]
    r1 = r0 + mu[d + 1] + S @ mu[d + 2:]
    if clip:
        r0 = clip_estimate(r0, K_clip)
        r1 = clip_estimate(r1, K_clip)
    return r0, r1 - r0


class EffectProblem:
    """Empirical objective mean(r0) + mean(delta * pi_theta) - lam * theta' G theta."""

    def __init__(self, gm, delta, base: float = 0.0) -> None:
        self.gm = np.ascontiguousarray(gm, dtype=float)
        self.delta = np.ascontiguousarray(delta, dtype=float)
        if self.gm.ndim != 2 or self.gm.shape[0] == 0 or self.delta.shape != (self.gm.shape[0],):
            raise DataError("need matching non-empty policy features and effects")
        self.G = np.ascontiguousarray(self.gm.T @ self.gm / self.gm.shape[0])
        self.base = float(base)

    @classmethod
    def from_critic(cls, contexts, critic: CriticState | np.ndarray, clip: bool = False,
                    K_clip: float = 1.0) -> "EffectProblem":
        mu = critic.mu_hat if isinstance(critic, CriticState) else critic
        r0, delta = estimated_effects(contexts, mu, clip, K_clip)
        return cls(policy_feature_matrix(contexts), delta, float(np.mean(r0)))

    @property
    def p(self) -> int:
        return self.gm.shape[1]

    def value(self, theta, lam: float) -> float:
        th = np.ascontiguousarray(theta, dtype=float)
        return self.base + K.actor_value(th, self.gm, self.delta, float(lam), self.G)

    def gradient(self, theta, lam: float) -> tuple[np.ndarray, np.ndarray]:
        th = np.ascontiguousarray(theta, dtype=float)
        grad = np.empty(self.p)
        hess = np.empty((self.p, self.p))
        K.actor_derivs(th, self.gm, self.delta, float(lam), self.G, grad, hess)
        return grad, hess

    def maximize(self, lam: float, warm_start=None, settings: OptimizerSettings | None = None,
                 use_global: bool = True) -> ActorResult:
        st = settings or OptimizerSettings()
        has_warm = warm_start is not None
        warm = np.zeros(self.p) if warm_start is None else np.ascontiguousarray(warm_start, dtype=float)
        if use_global:
            pts, rv, qv = K.grid_tables(K.OBJ_EMPIRICAL, self.gm, self.delta, self.G, 0.0, 0.0,
                                        _NO_XI, _NO_U, 0, self.p, st.grid_lo, st.grid_hi, st.grid_step)
        else:
            pts, rv, qv = np.zeros((1, self.p)), _NO_U, _NO_U
        th, v = K.solve_lambda(K.OBJ_EMPIRICAL, float(lam), self.gm, self.delta, self.G, 0.0, 0.0,
                               _NO_XI, _NO_U, 0, warm, has_warm, use_global, pts, rv, qv,
                               st.bound, st.step0, st.tol, st.max_evals)
        gi = K.grad_inf(th, self.gm, self.delta, float(lam), self.G)
        at_bound = np.any(np.abs(th) >= st.bound)
        return ActorResult(th, self.base + v, gi, bool(gi <= STATIONARY_TOL or at_bound))

    def lambda_search(self, budget: float, warm_start=None, settings: OptimizerSettings | None = None,
                      use_global: bool = True) -> LambdaResult:
        st = settings or OptimizerSettings()
        has_warm = warm_start is not None
        warm = np.zeros(self.p) if warm_start is None else np.ascontiguousarray(warm_start, dtype=float)
        budget = float(budget) if math.isfinite(budget) else 1e300
        lam, th, q, ok = K.lambda_bisect(K.OBJ_EMPIRICAL, self.gm, self.delta, self.G, 0.0, 0.0,
                                         _NO_XI, _NO_U, 0, budget, warm, has_warm, use_global,
                                         st.bound, st.lam_min, st.lam_step, st.lam_count,
                                         st.grid_lo, st.grid_hi, st.grid_step, st.step0, st.tol,
                                         st.max_evals)
        if not ok:
            raise LambdaSearchError(
                f"constraint value {q:.6g} exceeds budget {budget:.6g} even at lambda={lam}",
                theta=th, lam=lam)
        return LambdaResult(lam, th, q)


_NO_XI = np.zeros((1, 3))
_NO_U = np.zeros(1)


def objective(theta, contexts, critic, cfg: ConstraintConfig, clip_flag: bool = False,
              K_clip: float = 1.0) -> float:
    """Empirical regularized average reward at theta."""
    return EffectProblem.from_critic(contexts, critic, clip_flag, K_clip).value(theta, cfg.lam)


def maximize_objective(contexts, critic, cfg: ConstraintConfig, warm_start=None,
                       clip_flag: bool = False, K_clip: float = 1.0,
                       settings: OptimizerSettings | None = None, strict: bool = False) -> ActorResult:
    """Grid scan, compass search from the grid winner and the warm start, Newton polish.

    With ``strict`` a non-stationary result raises :class:`OptimizerError`
    carrying the best point; otherwise the result's ``converged`` flag says so.
    """
    prob = EffectProblem.from_critic(contexts, critic, clip_flag, K_clip)
    res = prob.maximize(cfg.lam, warm_start, settings)
    if strict and not res.converged:
        raise OptimizerError(f"stationarity check failed: |grad|_inf = {res.grad_inf:.3g}",
                             theta=res.theta, lam=cfg.lam)
    return res


def lambda_search(contexts, critic, cfg_base: ConstraintConfig, budget: float | None = None,
                  warm_start=None, clip_flag: bool = False, K_clip: float = 1.0,
                  settings: OptimizerSettings | None = None) -> tuple[float, np.ndarray]:
    """Smallest lattice multiplier whose maximizer satisfies the quadratic constraint."""
    b = cfg_base.budget if budget is None else budget
    prob = EffectProblem.from_critic(contexts, critic, clip_flag, K_clip)
    res = prob.lambda_search(b, warm_start, settings)
    return res.lam, res.theta
