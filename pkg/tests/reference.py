"""Slow pure-Python trajectory loop used as a second route against the compiled engine.

Context dynamics, outcome means, the ridge critic (batch solve, no rank-one
updates) and the search schedule are re-derived here with plain numpy; only
the inner maximizer is shared, through the public ``EffectProblem`` API.
"""

from __future__ import annotations

import math

import numpy as np

from acbandit.actor import EffectProblem
from acbandit.errors import LambdaSearchError


def _context(kind, t, prev, prev_a, z, u_ctx, ar_var):
    if kind == "toy_binary":
        return np.array([1.0 if u_ctx < 0.5 else -1.0])
    if t == 0 or kind in ("iid", "nonlinear"):
        return z[:3].copy()
    sd = math.sqrt(ar_var)
    s = np.empty(3)
    s[0] = 0.4 * prev[0] + sd * z[0]
    s[1] = 0.4 * prev[1] + sd * z[1]
    if kind == "ar1":
        s[2] = z[2]
    else:
        s[2] = 0.4 * prev[2] + 0.2 * prev[2] * prev_a + 0.4 * prev_a + z[2]
    return s


def _mean(kind, s, a, tau, alpha):
    if kind == "toy_binary":
        return 1.0 + s[0] + a + a * s[0]
    x1 = s[0] if kind != "nonlinear" else (1 - alpha) * s[0] + alpha * s[0] ** 2
    c3 = tau if kind == "burden" else 0.4
    return 10 - 0.4 * x1 - 0.4 * s[1] + c3 * s[2] - a * (0.2 + 0.2 * x1 + 0.2 * s[1])


def reference_loop(kind, z, u, *, burn_in, lam_fixed, budget, zeta, clip=False, K=1.0,
                   search_every=10, tau=0.0, alpha=0.0, ar_var=0.84, noise_sd=1.0, sign=-1.0,
                   settings=None):
    T = z.shape[0]
    d = 1 if kind == "toy_binary" else 3
    S, A, R = np.empty((T, d)), np.empty(T, dtype=int), np.empty(T)
    theta = np.zeros(d + 1)
    lam = lam_fixed
    prev, prev_a = np.zeros(d), 0
    thetas = np.full((T, d + 1), np.nan)
    lams = np.full(T, np.nan)
    first = True
    for t in range(T):
        s = _context(kind, t, prev, prev_a, z[t], u[t, 1], ar_var)
        if t < burn_in:
            a = int(u[t, 0] < 0.5)
        else:
            a = int(u[t, 0] < 1.0 / (1.0 + math.exp(-(theta[0] + s @ theta[1:]))))
        y = _mean(kind, s, a, tau, alpha) + noise_sd * z[t, d]
        S[t], A[t], R[t] = s, a, sign * y
        prev, prev_a = s, a
        n = t + 1
        if n < burn_in:
            continue
        F = np.column_stack([np.ones(n), S[:n], A[:n], A[:n, None] * S[:n]])
        mu = np.linalg.solve(zeta * np.eye(F.shape[1]) + F.T @ F, F.T @ R[:n])
        r0 = mu[0] + S[:n] @ mu[1:d + 1]
        r1 = r0 + mu[d + 1] + S[:n] @ mu[d + 2:]
        if clip:
            r0, r1 = np.clip(r0, -(K + 1), K + 1), np.clip(r1, -(K + 1), K + 1)
        prob = EffectProblem(np.column_stack([np.ones(n), S[:n]]), r1 - r0)
        warm = None if first else theta
        if lam_fixed < 0 and (first or n % search_every == 0 or n == T):
            try:
                res = prob.lambda_search(budget, warm_start=warm, settings=settings, use_global=first)
                lam, theta = res.lam, res.theta
            except LambdaSearchError as exc:
                lam, theta = exc.lam, exc.theta
        else:
            theta = prob.maximize(lam, warm_start=warm, settings=settings, use_global=first).theta
        first = False
        thetas[t], lams[t] = theta, lam
    return S, A, R, thetas, lams, mu
