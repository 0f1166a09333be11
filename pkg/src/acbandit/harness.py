"""Experiment driver: trajectories, replicate studies, ground truth and regret."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .actor import EffectProblem
from .config import RunConfig
from .critic import DecisionRecord, reward_feature_matrix
from .engine import bootstrap_rng, derive_rng, draw_noise, replicate_rng, run_engine
from .envs import EnvSpec, sample_contexts, true_effects
from .errors import ConvergenceError, InferenceError, LambdaSearchError, StudyError
from .inference import bootstrap_replicate, percentile_t_ci, plug_in, wald_ci
from .policy import policy_feature_matrix, stable_logistic

# spawn keys reserved for ground-truth computations (replicates use (r, 0) and (r, b + 1))
ORACLE_KEY = 2**32 - 1
COST_KEY = 2**32 - 2
REGRET_KEY = 2**32 - 3

MAX_FLAG_FRACTION = 0.01


@dataclass
class Trajectory:
    contexts: np.ndarray
    actions: np.ndarray
    outcomes: np.ndarray
    rewards: np.ndarray
    theta_path: np.ndarray
    lambda_path: np.ndarray
    mu_hat: np.ndarray
    flagged: bool
    n_nonstationary: int
    n_infeasible: int

    @property
    def T(self) -> int:
        return self.actions.size

    @property
    def theta_hat(self) -> np.ndarray:
        return self.theta_path[-1].copy()

    @property
    def lambda_hat(self) -> float:
        return float(self.lambda_path[-1])

    def history(self) -> list[DecisionRecord]:
        return [DecisionRecord(s, int(a), float(r))
                for s, a, r in zip(self.contexts, self.actions, self.outcomes)]


def run_trajectory(spec: EnvSpec, cfg: RunConfig, rng: np.random.Generator | None = None) -> Trajectory:
    """One online actor-critic run; without ``rng`` it uses replicate 0 of ``cfg.seed``."""
    rng = rng if rng is not None else replicate_rng(cfg.seed, 0)
    z, u = draw_noise(spec, cfg.T, rng)
    raw = run_engine(spec, cfg, z, u)
    return Trajectory(raw.S, raw.A, raw.Y, raw.rewards, raw.theta_path, raw.lam_path, raw.mu_hat,
                      raw.final_flag, raw.n_nonstationary, raw.n_infeasible)


# ---------------------------------------------------------------------------
# ground truth


@dataclass(frozen=True)
class OracleResult:
    lam: float
    theta: np.ndarray
    constraint: float
    mc_size: int
    discard: int


def _chain_noise(cfg: RunConfig, key: int):
    rng = derive_rng(cfg.seed, key)
    xi = rng.standard_normal((cfg.chain_mc, 3))
    uu = rng.random(cfg.chain_mc)
    return xi, uu, int(cfg.chain_discard * cfg.chain_mc)


def population_contexts(spec: EnvSpec, cfg: RunConfig, key: int = ORACLE_KEY) -> np.ndarray:
    """Context sample standing in for the stationary law of an action-independent kind.

    The binary toy has an exact two-point law, which is used as is.
    """
    if spec.kind == "toy_binary":
        return np.array([[1.0], [-1.0]])
    return sample_contexts(spec, cfg.oracle_mc, derive_rng(cfg.seed, key))


def oracle_policy(spec: EnvSpec, cfg: RunConfig) -> OracleResult:
    """Population-optimal (lambda*, theta*) from Monte Carlo contexts.

    Action-independent kinds use ``cfg.oracle_mc`` contexts and the exact
    treatment effect; the burden kind re-simulates a ``cfg.chain_mc`` chain
    (first ``chain_discard`` share dropped) for every candidate theta with
    common random numbers.  In fixed-multiplier mode only the inner
    maximization runs.
    """
    o = cfg.optimizer
    if spec.action_dependent:
        xi, uu, discard = _chain_noise(cfg, ORACLE_KEY)
        gm0 = np.zeros((1, 4))
        d0 = np.zeros(1)
        G0 = np.zeros((4, 4))
        if cfg.lambda_mode == "fixed":
            pts, rv, qv = K.grid_tables(K.OBJ_CHAIN, gm0, d0, G0, spec.tau_value, spec.ar_sd, xi, uu,
                                        discard, 4, o.grid_lo, o.grid_hi, o.grid_step)
            th, _ = K.solve_lambda(K.OBJ_CHAIN, cfg.lam, gm0, d0, G0, spec.tau_value, spec.ar_sd,
                                   xi, uu, discard, np.zeros(4), False, True, pts, rv, qv,
                                   o.bound, o.step0, o.tol, o.max_evals)
            q = K.constraint_of(K.OBJ_CHAIN, th, G0, spec.ar_sd, xi, uu, discard)
            return OracleResult(cfg.lam, th, q, cfg.chain_mc, discard)
        lam, th, q, ok = K.lambda_bisect(K.OBJ_CHAIN, gm0, d0, G0, spec.tau_value, spec.ar_sd,
                                         xi, uu, discard, cfg.budget, np.zeros(4), False, True,
                                         o.bound, o.lam_min, o.lam_step, o.lam_count,
                                         o.grid_lo, o.grid_hi, o.grid_step, o.step0, o.tol,
                                         o.max_evals)
        if not ok:
            raise LambdaSearchError("no feasible multiplier on the lattice", theta=th, lam=lam)
        return OracleResult(lam, th, q, cfg.chain_mc, discard)
    S = population_contexts(spec, cfg)
    r0, delta = true_effects(spec, S)
    prob = EffectProblem(policy_feature_matrix(S), delta, float(np.mean(r0)))
    if cfg.lambda_mode == "fixed":
        res = prob.maximize(cfg.lam, settings=o)
        return OracleResult(cfg.lam, res.theta, float(res.theta @ prob.G @ res.theta), S.shape[0], 0)
    lr = prob.lambda_search(cfg.budget, settings=o)
    return OracleResult(lr.lam, lr.theta, lr.constraint, S.shape[0], 0)


@dataclass(frozen=True)
class MyopicResult:
    theta: np.ndarray
    lam: float
    sweeps: int
    constraint: float


def myopic_equilibrium(spec: EnvSpec, cfg: RunConfig, theta0=None, tol: float = 1e-3,
                       max_sweeps: int = 50) -> MyopicResult:
    """Fixed point theta = argmax of the bandit objective under the contexts theta induces.

    Each sweep simulates the stationary contexts under the current theta
    (common random numbers across sweeps), then solves the multiplier
    search against the true treatment effect on those contexts.
    """
    o = cfg.optimizer
    th = np.zeros(spec.p) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    if spec.action_dependent:
        xi, uu, discard = _chain_noise(cfg, ORACLE_KEY)
    else:
        S_fixed = population_contexts(spec, cfg)
    prev = None
    for sweep in range(1, max_sweeps + 1):
        S = K.chain_contexts(th, spec.ar_sd, xi, uu, discard) if spec.action_dependent else S_fixed
        r0, delta = true_effects(spec, S)
        prob = EffectProblem(policy_feature_matrix(S), delta, float(np.mean(r0)))
        if cfg.lambda_mode == "fixed":
            lam = cfg.lam
            new = prob.maximize(lam, warm_start=th, settings=o, use_global=sweep == 1).theta
        else:
            lr = prob.lambda_search(cfg.budget, warm_start=th if sweep > 1 else None, settings=o,
                                    use_global=sweep == 1)
            lam, new = lr.lam, lr.theta
        step = float(np.max(np.abs(new - th)))
        prev, th = th, new
        if step < tol:
            return MyopicResult(th, lam, sweep, float(th @ prob.G @ th))
    raise ConvergenceError(f"no fixed point after {max_sweeps} sweeps", iterates=(prev, th))


def regularized_cost_eval(theta, spec: EnvSpec, cfg: RunConfig, lam: float | None = None) -> float:
    """Monte Carlo regularized average outcome of pi_theta, in the native sign.

    Cost environments return mean cost + lam * q, reward environments mean
    reward - lam * q; ``lam`` defaults to the fixed multiplier of ``cfg``.
    """
    lam = cfg.lam if lam is None else lam
    th = np.ascontiguousarray(theta, dtype=float)
    sg = spec.outcome_sign
    if spec.action_dependent:
        xi, uu, discard = _chain_noise(cfg, COST_KEY)
        v, _ = K.chain_value(th, lam, spec.tau_value, spec.ar_sd, xi, uu, discard)
        return float(sg * v)
    S = population_contexts(spec, cfg, COST_KEY)
    r0, delta = true_effects(spec, S)
    prob = EffectProblem(policy_feature_matrix(S), delta, float(np.mean(r0)))
    return float(sg * prob.value(th, lam))


def population_reward(theta, spec: EnvSpec, cfg: RunConfig) -> float:
    """Unregularized average reward (reward sign) of pi_theta."""
    return -regularized_cost_eval(theta, spec, cfg, 0.0) if spec.sign == "cost" else \
        regularized_cost_eval(theta, spec, cfg, 0.0)


def _step_rewards(spec: EnvSpec, S, A) -> np.ndarray:
    r0, delta = true_effects(spec, S)
    return r0 + delta * A


def regret_curve(spec: EnvSpec, cfg: RunConfig, theta_star, checkpoints, replicates: int | None = None,
                 pinned: bool = False) -> list[tuple[int, float]]:
    """Average over replicates of sum_{tau <= t} (V(theta*) - r(S_tau, A_tau)).

    ``r`` is the noise-free mean reward.  With ``pinned`` the actions follow
    pi_theta* throughout instead of the learned policy.
    """
    th_star = np.asarray(theta_star, dtype=float)
    cps = sorted(int(c) for c in checkpoints)
    if not cps or cps[0] < 1 or cps[-1] > cfg.T:
        raise ValueError("checkpoints must lie in [1, T]")
    vstar = population_reward(th_star, spec, cfg)
    R = cfg.replicate_count if replicates is None else replicates
    acc = np.zeros(len(cps))
    for r in range(R):
        rng = replicate_rng(cfg.seed, r)
        if pinned:
            S, A = _pinned_history(spec, cfg.T, th_star, rng)
        else:
            tr = run_trajectory(spec, cfg, rng)
            S, A = tr.contexts, tr.actions
        gap = np.cumsum(vstar - _step_rewards(spec, S, A))
        acc += gap[np.array(cps) - 1]
    return [(c, float(v / R)) for c, v in zip(cps, acc)]


def _pinned_history(spec: EnvSpec, T: int, theta, rng) -> tuple[np.ndarray, np.ndarray]:
    z, u = draw_noise(spec, T, rng)
    S = np.empty((T, spec.d))
    A = np.empty(T)
    prev = np.zeros(spec.d)
    a_prev = 0
    out = np.empty(spec.d)
    for t in range(T):
        K.next_context(spec.code, spec.ar_sd, t, prev, a_prev, z[t], u[t, 1], out)
        S[t] = out
        pi = stable_logistic(theta[0] + out @ theta[1:])
        a_prev = int(u[t, 0] < pi)
        A[t] = a_prev
        prev = out.copy()
    return S, A


# ---------------------------------------------------------------------------
# replicate studies


@dataclass
class StudyReport:
    """Per-replicate rows and aggregates against ``theta_star``."""

    rows: list[dict]
    theta_star: np.ndarray
    bias: np.ndarray
    mse: np.ndarray
    coverage: np.ndarray
    coverage_wald: np.ndarray
    mean_plugin_var: np.ndarray
    mean_lambda: float
    mean_reg_cost: float
    n_flagged: int
    n_used: int
    bias_myopic: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.n_flagged < MAX_FLAG_FRACTION * len(self.rows) or self.n_flagged == 0


def _nan(p: int) -> list[float]:
    return [math.nan] * p


def run_replicate(spec: EnvSpec, cfg: RunConfig, r: int, theta_star, wald: bool = True,
                  lam_star: float | None = None) -> dict:
    """Everything a study records about replicate ``r``, as a JSON-friendly dict."""
    p = spec.p
    th_star = np.asarray(theta_star, dtype=float)
    tr = run_trajectory(spec, cfg, replicate_rng(cfg.seed, r))
    th = tr.theta_hat
    row: dict = {"replicate": r, "theta_hat": th.tolist(), "lambda_hat": tr.lambda_hat,
                 "flagged": bool(tr.flagged), "n_nonstationary": tr.n_nonstationary,
                 "n_infeasible": tr.n_infeasible, "plugin_var": _nan(p),
                 "wald_lo": _nan(p), "wald_hi": _nan(p), "pt_lo": _nan(p), "pt_hi": _nan(p),
                 "n_boot_ok": 0, "reg_cost": math.nan}
    try:
        rep = plug_in(tr.contexts, tr.actions, tr.rewards, tr.mu_hat, th, tr.lambda_hat)
        var = np.diag(rep.actor_cov)
        row["plugin_var"] = var.tolist()
    except InferenceError:
        var = None
    if wald and var is not None:
        ci = wald_ci(th, var, tr.T, cfg.level)
        row["wald_lo"], row["wald_hi"] = ci.lower.tolist(), ci.upper.tolist()
    if cfg.bootstrap_B >= 2 and var is not None:
        resid = tr.rewards - reward_feature_matrix(tr.contexts, tr.actions) @ tr.mu_hat
        pairs = []
        for b in range(cfg.bootstrap_B):
            tb, vb, ok = bootstrap_replicate(tr.contexts, tr.mu_hat, resid, cfg,
                                             bootstrap_rng(cfg.seed, r, b), spec)
            if ok:
                pairs.append((tb, vb))
        row["n_boot_ok"] = len(pairs)
        if len(pairs) >= 2:
            try:
                ci = percentile_t_ci(th, var, pairs, tr.T, cfg.level)
                row["pt_lo"], row["pt_hi"] = ci.lower.tolist(), ci.upper.tolist()
            except InferenceError:
                pass
    if lam_star is not None:
        row["reg_cost"] = regularized_cost_eval(th, spec, cfg, lam_star)
    row["hit_pt"] = [bool(lo <= t <= hi) if np.isfinite(lo) else None
                     for lo, t, hi in zip(row["pt_lo"], th_star, row["pt_hi"])]
    row["hit_wald"] = [bool(lo <= t <= hi) if np.isfinite(lo) else None
                       for lo, t, hi in zip(row["wald_lo"], th_star, row["wald_hi"])]
    return row


def _task(args) -> dict:
    return run_replicate(*args)


def _coverage(rows, key: str, p: int) -> np.ndarray:
    out = np.full(p, np.nan)
    for i in range(p):
        hits = [r[key][i] for r in rows if r[key][i] is not None]
        if hits:
            out[i] = float(np.mean(hits))
    return out


def aggregate(rows: list[dict], theta_star, theta_myopic=None, meta=None) -> StudyReport:
    rows = sorted(rows, key=lambda r: r["replicate"])
    ts = np.asarray(theta_star, dtype=float)
    used = [r for r in rows if not r["flagged"]]
    p = ts.size
    if used:
        th = np.array([r["theta_hat"] for r in used])
        bias = th.mean(axis=0) - ts
        mse = ((th - ts) ** 2).mean(axis=0)
        pv = np.array([r["plugin_var"] for r in used], dtype=float)
        mean_var = np.array([np.nanmean(pv[:, i]) if np.any(np.isfinite(pv[:, i])) else np.nan
                             for i in range(p)])
        lam = float(np.mean([r["lambda_hat"] for r in used]))
        costs = np.array([r["reg_cost"] for r in used], dtype=float)
        cost = float(np.mean(costs)) if np.all(np.isfinite(costs)) else math.nan
        bm = th.mean(axis=0) - np.asarray(theta_myopic, dtype=float) if theta_myopic is not None else None
    else:
        bias = mse = mean_var = np.full(p, np.nan)
        lam = cost = math.nan
        bm = None
    return StudyReport(rows, ts, bias, mse, _coverage(used, "hit_pt", p), _coverage(used, "hit_wald", p),
                       mean_var, lam, cost, len(rows) - len(used), len(used), bm, dict(meta or {}))


def _fingerprint(*parts) -> str:
    """Digest of everything a replicate row depends on, so stale checkpoints are ignored."""
    return hashlib.sha256(repr(parts).encode()).hexdigest()[:16]


def _read_checkpoint(path: Path, key: str) -> dict[int, dict]:
    """Rows of ``path`` written under ``key``; the file is rewritten without torn or stale lines."""
    done: dict[int, dict] = {}
    if not path.exists():
        return done
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError:
                break  # a torn final line from an interrupted run
            if row.get("run_key") == key:
                done[int(row["replicate"])] = row
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w") as fh:
        for r in sorted(done):
            fh.write(json.dumps(done[r]) + "\n")
    os.replace(tmp, path)
    return done


def replicate_study(spec: EnvSpec, cfg: RunConfig, theta_star, workers: int = 1,
                    checkpoint: str | os.PathLike | None = None, wald: bool = True,
                    lam_star: float | None = None, theta_myopic=None, strict: bool = True,
                    stop_after: int | None = None) -> StudyReport:
    """Run ``cfg.replicate_count`` replicates and aggregate them in index order.

    Replicate ``r`` draws from ``SeedSequence(cfg.seed, spawn_key=(r, 0))``,
    so the result does not depend on ``workers``.  With ``checkpoint`` each
    finished replicate is appended as one JSON line and a rerun skips the
    replicates already present.  ``stop_after`` ends the run after that many
    new replicates (used to exercise resumption).
    """
    ts = np.asarray(theta_star, dtype=float)
    if ts.size != spec.p:
        raise ValueError(f"theta_star needs {spec.p} entries")
    ck = Path(checkpoint) if checkpoint is not None else None
    key = _fingerprint(spec, cfg, ts.tolist(), wald, lam_star)
    done = _read_checkpoint(ck, key) if ck is not None else {}
    todo = [r for r in range(cfg.replicate_count) if r not in done]
    if stop_after is not None:
        todo = todo[:stop_after]
    jobs = [(spec, cfg, r, ts, wald, lam_star) for r in todo]
    fh = ck.open("a") if ck is not None else None
    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                for row in ex.map(_task, jobs, chunksize=max(1, len(jobs) // (4 * workers))):
                    row["run_key"] = key
                    done[row["replicate"]] = row
                    if fh is not None:
                        fh.write(json.dumps(row) + "\n")
                        fh.flush()
        else:
            for job in jobs:
                row = _task(job)
                row["run_key"] = key
                done[row["replicate"]] = row
                if fh is not None:
                    fh.write(json.dumps(row) + "\n")
                    fh.flush()
    finally:
        if fh is not None:
            fh.close()
    rows = [done[r] for r in sorted(done) if r < cfg.replicate_count]
    rep = aggregate(rows, ts, theta_myopic, {"T": cfg.T, "replicates": cfg.replicate_count,
                                             "bootstrap_B": cfg.bootstrap_B, "seed": cfg.seed})
    if strict and len(rows) == cfg.replicate_count and not rep.ok:
        raise StudyError(f"{rep.n_flagged} of {len(rows)} replicates flagged (limit 1%)")
    return rep
