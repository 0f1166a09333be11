"""Generative environments: HeartSteps-style cost models and the binary toy.

Random draws per decision point, in order: ``d`` standard normals for the
context innovations (the toy uses one uniform instead), then one standard
normal for the outcome noise.  The trajectory engine pre-draws these as
``z = rng.standard_normal((T, d + 1))`` and ``u = rng.random((T, 2))``
(``u[:, 0]`` for the action, ``u[:, 1]`` for the toy context).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ConfigError, EnvError

KINDS = {"iid": K.IID, "ar1": K.AR1, "burden": K.BURDEN, "nonlinear": K.NONLINEAR,
         "toy_binary": K.TOY}
AR_COEF = 0.4


@dataclass(frozen=True)
class EnvSpec:
    """Declarative environment description.

    ``ar_noise_var`` is the innovation variance of S1 and S2 for the
    autoregressive kinds; ``None`` picks 0.84 for ar1 (unit stationary
    variance) and 1.0 for burden.  ``noise_sd`` defaults to 1 for the cost
    models and 9 for the toy.
    """

    kind: str = "iid"
    tau: float | None = None
    alpha_nl: float | None = None
    sign: str | None = None
    ar_noise_var: float | None = None
    noise_sd: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown environment kind {self.kind!r}", key="kind")
        if self.kind == "burden":
            tau = 0.0 if self.tau is None else float(self.tau)
            if not tau >= 0:
                raise ConfigError(f"must be non-negative, got {tau}", key="tau")
            object.__setattr__(self, "tau", tau)
        elif self.tau is not None:
            raise ConfigError("only the burden kind takes tau", key="tau")
        if self.kind == "nonlinear":
            a = 0.0 if self.alpha_nl is None else float(self.alpha_nl)
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"must lie in [0, 1], got {a}", key="alpha_nl")
            object.__setattr__(self, "alpha_nl", a)
        elif self.alpha_nl is not None:
            raise ConfigError("only the nonlinear kind takes alpha_nl", key="alpha_nl")
        sign = self.sign or ("reward" if self.kind == "toy_binary" else "cost")
        if sign not in ("reward", "cost"):
            raise ConfigError(f"must be 'reward' or 'cost', got {sign!r}", key="sign")
        object.__setattr__(self, "sign", sign)
        if self.ar_noise_var is not None:
            if self.kind not in ("ar1", "burden"):
                raise ConfigError("only autoregressive kinds take ar_noise_var", key="ar_noise_var")
            if not self.ar_noise_var > 0:
                raise ConfigError("must be positive", key="ar_noise_var")
        nsd = self.noise_sd
        if nsd is None:
            nsd = 9.0 if self.kind == "toy_binary" else 1.0
        if not nsd >= 0:
            raise ConfigError("must be non-negative", key="noise_sd")
        object.__setattr__(self, "noise_sd", float(nsd))

    @property
    def code(self) -> int:
        return KINDS[self.kind]

    @property
    def d(self) -> int:
        return 1 if self.kind == "toy_binary" else 3

    @property
    def p(self) -> int:
        return self.d + 1

    @property
    def k(self) -> int:
        return 2 * self.d + 2

    @property
    def ar_sd(self) -> float:
        if self.ar_noise_var is not None:
            return math.sqrt(self.ar_noise_var)
        if self.kind == "ar1":
            return math.sqrt(1.0 - AR_COEF**2)
        return 1.0

    @property
    def outcome_sign(self) -> float:
        """Multiplier turning the native outcome into the reward the learner maximizes."""
        return -1.0 if self.sign == "cost" else 1.0

    @property
    def action_dependent(self) -> bool:
        return self.kind == "burden"

    @property
    def tau_value(self) -> float:
        return self.tau if self.tau is not None else 0.0

    @property
    def alpha_value(self) -> float:
        return self.alpha_nl if self.alpha_nl is not None else 0.0


@dataclass
class EnvState:
    prev_context: np.ndarray | None = None
    prev_action: int | None = None


def context_from_noise(spec: EnvSpec, state: EnvState, z_row, u_ctx: float) -> np.ndarray:
    """Next context given pre-drawn innovations (deterministic core of the dynamics)."""
    dynamic = spec.kind in ("ar1", "burden")
    first = state.prev_context is None
    if dynamic and not first and spec.kind == "burden" and state.prev_action is None:
        raise EnvError("burden dynamics need the previous action")
    prev = np.zeros(spec.d) if first else np.asarray(state.prev_context, dtype=float)
    t = 0 if first else 1
    out = np.empty(spec.d)
    z = np.zeros(3)
    z[:min(3, len(z_row))] = np.asarray(z_row, dtype=float)[:3]
    K.next_context(spec.code, spec.ar_sd, t, prev, int(state.prev_action or 0), z, float(u_ctx), out)
    return out


def env_next_context(spec: EnvSpec, state: EnvState, rng: np.random.Generator) -> np.ndarray:
    """Draw the next context and advance nothing; the caller records the action."""
    if spec.kind == "toy_binary":
        return context_from_noise(spec, state, np.zeros(3), rng.random())
    return context_from_noise(spec, state, rng.standard_normal(spec.d), 0.0)


def advance(state: EnvState, context, action: int) -> EnvState:
    return EnvState(np.asarray(context, dtype=float), int(action))


def env_true_mean(spec: EnvSpec, context, action: int) -> float:
    """Noise-free outcome mean in the environment's native sign."""
    s = np.atleast_1d(np.asarray(context, dtype=float))
    if s.size != spec.d:
        raise ConfigError(f"context has length {s.size}, expected {spec.d}", key="context")
    return float(K.env_mean(spec.code, spec.tau_value, spec.alpha_value, s, float(action)))


def env_outcome(spec: EnvSpec, context, action: int, rng: np.random.Generator) -> float:
    return env_true_mean(spec, context, action) + spec.noise_sd * rng.standard_normal()


def mean_outcomes(spec: EnvSpec, contexts) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized native-sign means under action 0 and action 1."""
    S = np.asarray(contexts, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if spec.kind == "toy_binary":
        s = S[:, 0]
        return 1.0 + s, 2.0 + 2.0 * s
    x1 = S[:, 0]
    if spec.kind == "nonlinear":
        a = spec.alpha_value
        x1 = (1.0 - a) * S[:, 0] + a * S[:, 0] ** 2
    c3 = spec.tau_value if spec.kind == "burden" else 0.4
    m0 = 10.0 - 0.4 * x1 - 0.4 * S[:, 1] + c3 * S[:, 2]
    m1 = m0 - (0.2 + 0.2 * x1 + 0.2 * S[:, 1])
    return m0, m1


def true_effects(spec: EnvSpec, contexts) -> tuple[np.ndarray, np.ndarray]:
    """Reward-sign mean of action 0 and treatment effect, per context."""
    m0, m1 = mean_outcomes(spec, contexts)
    sg = spec.outcome_sign
    return sg * m0, sg * (m1 - m0)


def sample_contexts(spec: EnvSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Contexts of an action-independent environment (ar1 as a chain)."""
    if spec.action_dependent:
        raise EnvError("burden contexts depend on the policy; use the chain simulator")
    if spec.kind == "toy_binary":
        return np.where(rng.random(n) < 0.5, 1.0, -1.0)[:, None]
    z = rng.standard_normal((n, 3))
    if spec.kind != "ar1":
        return z
    S = np.empty((n, 3))
    S[0] = z[0]
    sd = spec.ar_sd
    for t in range(1, n):
        S[t, :2] = AR_COEF * S[t - 1, :2] + sd * z[t, :2]
        S[t, 2] = z[t, 2]
    return S


def burden_chain(spec: EnvSpec, theta, n: int, rng: np.random.Generator, discard: int) -> np.ndarray:
    """Contexts visited by the burden chain under the logistic policy theta."""
    xi = rng.standard_normal((n, 3))
    uu = rng.random(n)
    return K.chain_contexts(np.asarray(theta, dtype=float), spec.ar_sd, xi, uu, discard)
