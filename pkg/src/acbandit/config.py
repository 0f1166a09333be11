"""Run configuration and the INI experiment file.

Sections and keys::

    [env]         kind, tau, alpha_nl, sign, ar_noise_var, noise_sd
    [constraint]  p0, alpha, lambda_mode, lambda, lambda_min, lambda_step,
                  lambda_count, search_every
    [run]         T, burn_in, zeta, clip, K, actor_global, seed, replicates,
                  workers, oracle_mc, chain_mc, chain_discard, grid_lo,
                  grid_hi, grid_step, step0, tol, max_evals, bound
    [inference]   bootstrap_B, level, wald, theta_star, lambda_star,
                  theta_myopic, pinned_from
    [output]      dir

Any key may be overridden from the environment as
``ACBANDIT_<SECTION>__<KEY>`` (for example ``ACBANDIT_RUN__T=500``).
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .actor import ConstraintConfig, OptimizerSettings, constraint_budget
from .envs import EnvSpec
from .errors import ConfigError

ENV_PREFIX = "ACBANDIT_"
GLOBAL_MODES = {"first": 0, "always": 1, "never": 2}


@dataclass(frozen=True)
class RunConfig:
    """Everything a trajectory or study needs besides the environment.

    ``lambda_mode`` is ``"search"`` (multiplier re-searched every
    ``search_every`` points) or ``"fixed"`` (``lam`` held throughout).
    """

    T: int = 200
    burn_in: int = 20
    p0: float = 0.1
    alpha: float = 0.1
    lambda_mode: str = "search"
    lam: float = 0.0
    search_every: int = 10
    clip: bool = True
    K: float = 1.0
    zeta: float = 1.0
    actor_global: str = "first"
    seed: int = 0
    replicate_count: int = 1
    bootstrap_B: int = 0
    level: float = 0.95
    oracle_mc: int = 5000
    chain_mc: int = 100_000
    chain_discard: float = 0.1
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self) -> None:
        if self.T < 1:
            raise ConfigError(f"must be at least 1, got {self.T}", key="T")
        if self.burn_in < 0:
            raise ConfigError(f"must be non-negative, got {self.burn_in}", key="burn_in")
        if self.T < self.burn_in:
            raise ConfigError(f"T={self.T} is shorter than burn_in={self.burn_in}", key="burn_in")
        ConstraintConfig(self.p0, self.alpha, self.lam)
        if self.lambda_mode not in ("search", "fixed"):
            raise ConfigError(f"must be 'search' or 'fixed', got {self.lambda_mode!r}", key="lambda_mode")
        if self.search_every < 1:
            raise ConfigError("must be at least 1", key="search_every")
        if not self.K > 0:
            raise ConfigError("must be positive", key="K")
        if not self.zeta > 0:
            raise ConfigError("must be positive", key="zeta")
        if self.actor_global not in GLOBAL_MODES:
            raise ConfigError(f"must be one of {sorted(GLOBAL_MODES)}", key="actor_global")
        if self.replicate_count < 1:
            raise ConfigError("must be at least 1", key="replicates")
        if self.bootstrap_B < 0 or self.bootstrap_B == 1:
            raise ConfigError("must be 0 (off) or at least 2", key="bootstrap_B")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("must lie in (0, 1)", key="level")
        if self.oracle_mc < 2 or self.chain_mc < 10:
            raise ConfigError("Monte Carlo sizes too small", key="oracle_mc")
        if not 0.0 <= self.chain_discard < 1.0:
            raise ConfigError("must lie in [0, 1)", key="chain_discard")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("must be a 64-bit unsigned integer", key="seed")

    @property
    def budget(self) -> float:
        return constraint_budget(self.p0, self.alpha)

    @property
    def fixed_lambda(self) -> float:
        """Multiplier passed to the engine; negative means search online."""
        return self.lam if self.lambda_mode == "fixed" else -1.0

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class Experiment:
    """A parsed experiment file."""

    env: EnvSpec
    run: RunConfig
    workers: int = 1
    wald: bool = False
    theta_star: np.ndarray | None = None
    lambda_star: float | None = None
    theta_myopic: np.ndarray | None = None
    pinned_from: str = ""
    out_dir: str | None = None


_SCHEMA: dict[str, dict[str, str]] = {
    "env": {"kind": "str", "tau": "float", "alpha_nl": "float", "sign": "str",
            "ar_noise_var": "float", "noise_sd": "float"},
    "constraint": {"p0": "float", "alpha": "float", "lambda_mode": "str", "lambda": "float",
                   "lambda_min": "float", "lambda_step": "float", "lambda_count": "int",
                   "search_every": "int"},
    "run": {"T": "int", "burn_in": "int", "zeta": "float", "clip": "bool", "K": "float",
            "actor_global": "str", "seed": "int", "replicates": "int", "workers": "int",
            "oracle_mc": "int", "chain_mc": "int", "chain_discard": "float",
            "grid_lo": "float", "grid_hi": "float", "grid_step": "float", "step0": "float",
            "tol": "float", "max_evals": "int", "bound": "float"},
    "inference": {"bootstrap_B": "int", "level": "float", "wald": "bool", "theta_star": "vec",
                  "lambda_star": "float", "theta_myopic": "vec", "pinned_from": "str"},
    "output": {"dir": "str"},
}


def _convert(kind: str, raw: str, key: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if math.isnan(v):
                raise ValueError
            return v
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind == "vec":
            return np.array([float(x) for x in raw.replace(",", " ").split()])
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {kind}", key=key) from None
    return raw


def _collect(parser: configparser.ConfigParser, environ) -> dict[str, dict[str, object]]:
    vals: dict[str, dict[str, object]] = {s: {} for s in _SCHEMA}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError("unknown section", key=f"[{section}]")
        for key, raw in parser.items(section):
            schema = {k.lower(): k for k in _SCHEMA[section]}
            if key.lower() not in schema:
                raise ConfigError("unknown key", key=f"{section}.{key}")
            name = schema[key.lower()]
            vals[section][name] = _convert(_SCHEMA[section][name], raw, f"{section}.{name}")
    for var, raw in sorted(environ.items()):
        if not var.startswith(ENV_PREFIX):
            continue
        rest = var[len(ENV_PREFIX):]
        if "__" not in rest:
            raise ConfigError("override must look like ACBANDIT_<SECTION>__<KEY>", key=var)
        section, key = rest.split("__", 1)
        section = section.lower()
        if section not in _SCHEMA:
            raise ConfigError("unknown section in override", key=var)
        schema = {k.lower(): k for k in _SCHEMA[section]}
        if key.lower() not in schema:
            raise ConfigError("unknown key in override", key=var)
        name = schema[key.lower()]
        vals[section][name] = _convert(_SCHEMA[section][name], raw, f"{section}.{name}")
    return vals


def parse_experiment(text: str, environ=None) -> Experiment:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed experiment file: {exc}") from None
    v = _collect(parser, os.environ if environ is None else environ)
    env = EnvSpec(**v["env"])
    c, r, inf = v["constraint"], v["run"], v["inference"]
    opt_keys = {"grid_lo": r, "grid_hi": r, "grid_step": r, "step0": r, "tol": r,
                "max_evals": r, "bound": r}
    opt = {k: src[k] for k, src in opt_keys.items() if k in src}
    for ck, ok in (("lambda_min", "lam_min"), ("lambda_step", "lam_step"), ("lambda_count", "lam_count")):
        if ck in c:
            opt[ok] = c[ck]
    run_kw: dict[str, object] = {"optimizer": OptimizerSettings(**opt)}
    for src, dst in (("p0", "p0"), ("alpha", "alpha"), ("lambda_mode", "lambda_mode"),
                     ("lambda", "lam"), ("search_every", "search_every")):
        if src in c:
            run_kw[dst] = c[src]
    for src, dst in (("T", "T"), ("burn_in", "burn_in"), ("zeta", "zeta"), ("clip", "clip"),
                     ("K", "K"), ("actor_global", "actor_global"), ("seed", "seed"),
                     ("replicates", "replicate_count"), ("oracle_mc", "oracle_mc"),
                     ("chain_mc", "chain_mc"), ("chain_discard", "chain_discard")):
        if src in r:
            run_kw[dst] = r[src]
    for src in ("bootstrap_B", "level"):
        if src in inf:
            run_kw[src] = inf[src]
    run = RunConfig(**run_kw)
    workers = int(r.get("workers", 1))
    if workers < 1:
        raise ConfigError("must be at least 1", key="run.workers")
    ts = inf.get("theta_star")
    if ts is not None and ts.size != env.p:
        raise ConfigError(f"needs {env.p} entries", key="inference.theta_star")
    tm = inf.get("theta_myopic")
    if tm is not None and tm.size != env.p:
        raise ConfigError(f"needs {env.p} entries", key="inference.theta_myopic")
    return Experiment(env=env, run=run, workers=workers, wald=bool(inf.get("wald", False)),
                      theta_star=ts, lambda_star=inf.get("lambda_star"), theta_myopic=tm,
                      pinned_from=str(inf.get("pinned_from", "")),
                      out_dir=v["output"].get("dir"))


def load_experiment(path, environ=None) -> Experiment:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read experiment file: {exc.strerror}", key=str(p)) from None
    return parse_experiment(text, environ)
