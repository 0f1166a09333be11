"""Command-line entry point: ``acbandit {run,study,oracle,myopic} CONFIG``."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import Experiment, load_experiment
from .errors import ACBanditError, ConfigError
from .harness import myopic_equilibrium, oracle_policy, replicate_study, run_trajectory
from .inference import plug_in

DIGITS = 9


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return "nan"
    return f"{x:.{DIGITS}g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _out_dir(args, exp: Experiment) -> Path:
    out = args.out or exp.out_dir
    if not out:
        raise ConfigError("no output directory (use --out or [output] dir)", key="output.dir")
    return Path(out)


def _apply_flags(args, exp: Experiment) -> Experiment:
    run = exp.run
    if args.seed is not None:
        run = run.with_(seed=args.seed)
    if getattr(args, "replicates", None) is not None:
        run = run.with_(replicate_count=args.replicates)
    workers = args.workers if args.workers is not None else exp.workers
    if workers < 1:
        raise ConfigError("must be at least 1", key="--workers")
    return replace(exp, run=run, workers=workers)


def _theta_cols(p: int, prefix: str = "theta") -> list[str]:
    return [f"{prefix}_{i}" for i in range(p)]


def cmd_run(exp: Experiment, out: Path) -> int:
    tr = run_trajectory(exp.env, exp.run)
    d, p = exp.env.d, exp.env.p
    header = ["t"] + [f"s{i + 1}" for i in range(d)] + ["a", "outcome"] + _theta_cols(p) + ["lambda"]
    rows = []
    for t in range(tr.T):
        rows.append([t + 1, *tr.contexts[t], int(tr.actions[t]), tr.outcomes[t],
                     *tr.theta_path[t], tr.lambda_path[t]])
    write_csv(out / "trajectory.csv", header, rows)
    try:
        var = np.diag(plug_in(tr.contexts, tr.actions, tr.rewards, tr.mu_hat, tr.theta_hat,
                              tr.lambda_hat).actor_cov)
    except ACBanditError:
        var = np.full(p, np.nan)
    write_csv(out / "summary.csv",
              ["T", "seed", "lambda_hat"] + _theta_cols(p) + _theta_cols(p, "plugin_var") + ["flagged"],
              [[tr.T, str(exp.run.seed), tr.lambda_hat, *tr.theta_hat, *var, int(tr.flagged)]])
    return 1 if tr.flagged else 0


def _theta_star(exp: Experiment) -> tuple[np.ndarray, float | None, str]:
    if exp.theta_star is not None:
        return exp.theta_star, exp.lambda_star, f"pinned:{exp.pinned_from or 'config'}"
    res = oracle_policy(exp.env, exp.run)
    return res.theta, res.lam, "computed"


def cmd_study(exp: Experiment, out: Path) -> int:
    ts, lam_star, source = _theta_star(exp)
    if lam_star is None and exp.run.lambda_mode == "fixed":
        lam_star = exp.run.lam
    out.mkdir(parents=True, exist_ok=True)
    rep = replicate_study(exp.env, exp.run, ts, workers=exp.workers,
                          checkpoint=out / "replicates.jsonl", wald=True, lam_star=lam_star,
                          theta_myopic=exp.theta_myopic, strict=False)
    p = exp.env.p
    header = (["replicate", "lambda_hat"] + _theta_cols(p) + _theta_cols(p, "plugin_var")
              + _theta_cols(p, "pt_lo") + _theta_cols(p, "pt_hi")
              + _theta_cols(p, "wald_lo") + _theta_cols(p, "wald_hi")
              + ["n_boot_ok", "reg_cost", "flagged"])
    rows = [[r["replicate"], r["lambda_hat"], *r["theta_hat"], *r["plugin_var"], *r["pt_lo"],
             *r["pt_hi"], *r["wald_lo"], *r["wald_hi"], r["n_boot_ok"], r["reg_cost"],
             int(r["flagged"])] for r in rep.rows]
    write_csv(out / "study.csv", header, rows)
    blank = [""] * (p - 1)
    agg = [["theta_star", *ts], ["bias", *rep.bias], ["mse", *rep.mse],
           ["coverage_percentile_t", *rep.coverage], ["coverage_wald", *rep.coverage_wald],
           ["mean_plugin_var", *rep.mean_plugin_var]]
    if rep.bias_myopic is not None:
        agg.append(["bias_vs_myopic", *rep.bias_myopic])
    agg += [["mean_lambda_hat", rep.mean_lambda, *blank],
            ["mean_regularized_outcome", rep.mean_reg_cost, *blank],
            ["n_used", rep.n_used, *blank], ["n_flagged", rep.n_flagged, *blank],
            ["theta_star_source", source, *blank]]
    write_csv(out / "aggregates.csv", ["metric"] + _theta_cols(p), agg)
    return 0 if rep.ok else 1


def cmd_oracle(exp: Experiment, out: Path) -> int:
    res = oracle_policy(exp.env, exp.run)
    p = exp.env.p
    write_csv(out / "oracle.csv",
              ["lambda_star"] + _theta_cols(p) + ["constraint", "budget", "mc_size", "discard"],
              [[res.lam, *res.theta, res.constraint, exp.run.budget, res.mc_size, res.discard]])
    return 0


def cmd_myopic(exp: Experiment, out: Path) -> int:
    res = myopic_equilibrium(exp.env, exp.run)
    p = exp.env.p
    write_csv(out / "myopic.csv", _theta_cols(p) + ["lambda", "sweeps", "constraint"],
              [[*res.theta, res.lam, res.sweeps, res.constraint]])
    return 0


COMMANDS = {"run": cmd_run, "study": cmd_study, "oracle": cmd_oracle, "myopic": cmd_myopic}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="acbandit",
                                 description="Stochasticity-constrained actor-critic bandit simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="experiment INI file")
        sp.add_argument("--seed", type=int, default=None, help="64-bit master seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--workers", type=int, default=None, help="parallel worker processes")
        if name == "study":
            sp.add_argument("--replicates", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        exp = _apply_flags(args, load_experiment(args.config))
        out = _out_dir(args, exp)
        return COMMANDS[args.command](exp, out)
    except ConfigError as exc:
        print(f"acbandit: configuration error: {exc}", file=sys.stderr)
        return 2
    except ACBanditError as exc:
        print(f"acbandit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
