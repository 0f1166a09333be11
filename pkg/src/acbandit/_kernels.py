"""Compiled inner loops.

Everything here works on plain float64 arrays so that numba can compile it
once and cache it.  The public modules wrap these with validation and
dataclasses; tests compare both routes against straightforward numpy code.
"""

from __future__ import annotations

import numpy as np
from numba import njit

IID = 0
AR1 = 1
BURDEN = 2
NONLINEAR = 3
TOY = 4

GLOBAL_FIRST = 0
GLOBAL_ALWAYS = 1
GLOBAL_NEVER = 2

OBJ_EMPIRICAL = 0
OBJ_CHAIN = 1

TIE_TOL = 1e-12


@njit(cache=True)
def logistic(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def _norm2(x):
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    return s


@njit(cache=True)
def _quad(theta, G):
    p = theta.shape[0]
    q = 0.0
    for i in range(p):
        for j in range(p):
            q += theta[i] * G[i, j] * theta[j]
    return q


@njit(cache=True)
def cholesky_inplace(M):
    """Lower Cholesky factor written over ``M``; returns False if not PD."""
    n = M.shape[0]
    for j in range(n):
        s = M[j, j]
        for k in range(j):
            s -= M[j, k] * M[j, k]
        if s <= 0.0 or not np.isfinite(s):
            return False
        d = np.sqrt(s)
        M[j, j] = d
        for i in range(j + 1, n):
            s = M[i, j]
            for k in range(j):
                s -= M[i, k] * M[j, k]
            M[i, j] = s / d
    for i in range(n):
        for j in range(i + 1, n):
            M[i, j] = 0.0
    return True


@njit(cache=True)
def cholesky_solve(L, b):
    n = L.shape[0]
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return x


@njit(cache=True)
def spd_inverse(B):
    n = B.shape[0]
    L = B.copy()
    if not cholesky_inplace(L):
        return L, False
    inv = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[:] = 0.0
        e[j] = 1.0
        col = cholesky_solve(L, e)
        for i in range(n):
            inv[i, j] = col[i]
    for i in range(n):
        for j in range(i + 1, n):
            v = 0.5 * (inv[i, j] + inv[j, i])
            inv[i, j] = v
            inv[j, i] = v
    return inv, True


@njit(cache=True)
def sm_update(Binv, f):
    """Sherman-Morrison rank-one update of ``Binv`` after ``B += f f^T``."""
    k = f.shape[0]
    v = np.zeros(k)
    for i in range(k):
        s = 0.0
        for j in range(k):
            s += Binv[i, j] * f[j]
        v[i] = s
    den = 1.0
    for i in range(k):
        den += f[i] * v[i]
    for i in range(k):
        for j in range(k):
            Binv[i, j] -= v[i] * v[j] / den


# ---------------------------------------------------------------------------
# actor objective on an empirical context sample
#
#   J(theta) = mean_tau delta_tau * sigma(g_tau . theta) - lam * theta' G theta
#
# the additive constant mean_tau r0_tau does not move the maximizer and is
# added back by the caller.


@njit(cache=True)
def actor_value(theta, gm, delta, lam, G):
    n, p = gm.shape
    tot = 0.0
    for t in range(n):
        x = 0.0
        for i in range(p):
            x += gm[t, i] * theta[i]
        tot += delta[t] * logistic(x)
    return tot / n - lam * _quad(theta, G)


@njit(cache=True)
def actor_derivs(theta, gm, delta, lam, G, grad, hess):
    n, p = gm.shape
    grad[:] = 0.0
    hess[:, :] = 0.0
    tot = 0.0
    for t in range(n):
        x = 0.0
        for i in range(p):
            x += gm[t, i] * theta[i]
        pi = logistic(x)
        tot += delta[t] * pi
        w1 = delta[t] * pi * (1.0 - pi)
        w2 = w1 * (1.0 - 2.0 * pi)
        for i in range(p):
            grad[i] += w1 * gm[t, i]
            for j in range(i + 1):
                hess[i, j] += w2 * gm[t, i] * gm[t, j]
    for i in range(p):
        grad[i] /= n
        for j in range(i + 1):
            hess[i, j] /= n
            hess[j, i] = hess[i, j]
    for i in range(p):
        s = 0.0
        for j in range(p):
            s += G[i, j] * theta[j]
            hess[i, j] -= 2.0 * lam * G[i, j]
        grad[i] -= 2.0 * lam * s
    return tot / n - lam * _quad(theta, G)


@njit(cache=True)
def chain_value(theta, lam, tau, ar_sd, xi, uu, discard):
    """Population regularized reward of the burden chain under ``theta``.

    Contexts follow the action-dependent recursion driven by the fixed
    innovations ``xi`` and action uniforms ``uu`` (common random numbers
    across candidates).  Returns ``(value, q)`` in reward sign, where the
    expected cost uses the exact conditional mean given each visited state.
    """
    n = xi.shape[0]
    s1 = xi[0, 0]
    s2 = xi[0, 1]
    s3 = xi[0, 2]
    a_prev = 0
    tot = 0.0
    G = np.zeros((4, 4))
    cnt = 0
    g = np.empty(4)
    for t in range(n):
        if t > 0:
            n1 = 0.4 * s1 + ar_sd * xi[t, 0]
            n2 = 0.4 * s2 + ar_sd * xi[t, 1]
            n3 = 0.4 * s3 + 0.2 * s3 * a_prev + 0.4 * a_prev + xi[t, 2]
            s1 = n1
            s2 = n2
            s3 = n3
        x = theta[0] + theta[1] * s1 + theta[2] * s2 + theta[3] * s3
        pi = logistic(x)
        a = 1 if uu[t] < pi else 0
        if t >= discard:
            cost0 = 10.0 - 0.4 * s1 - 0.4 * s2 + tau * s3
            eff = 0.2 + 0.2 * s1 + 0.2 * s2
            tot += cost0 - eff * pi
            g[0] = 1.0
            g[1] = s1
            g[2] = s2
            g[3] = s3
            for i in range(4):
                for j in range(4):
                    G[i, j] += g[i] * g[j]
            cnt += 1
        a_prev = a
    for i in range(4):
        for j in range(4):
            G[i, j] /= cnt
    q = _quad(theta, G)
    return -(tot / cnt) - lam * q, q


@njit(cache=True)
def chain_contexts(theta, ar_sd, xi, uu, discard):
    """Visited contexts of the burden chain under ``theta`` after ``discard``."""
    n = xi.shape[0]
    out = np.empty((n - discard, 3))
    s1 = xi[0, 0]
    s2 = xi[0, 1]
    s3 = xi[0, 2]
    a_prev = 0
    for t in range(n):
        if t > 0:
            n1 = 0.4 * s1 + ar_sd * xi[t, 0]
            n2 = 0.4 * s2 + ar_sd * xi[t, 1]
            n3 = 0.4 * s3 + 0.2 * s3 * a_prev + 0.4 * a_prev + xi[t, 2]
            s1 = n1
            s2 = n2
            s3 = n3
        pi = logistic(theta[0] + theta[1] * s1 + theta[2] * s2 + theta[3] * s3)
        a_prev = 1 if uu[t] < pi else 0
        if t >= discard:
            out[t - discard, 0] = s1
            out[t - discard, 1] = s2
            out[t - discard, 2] = s3
    return out


@njit(cache=True)
def _objective(kind, theta, gm, delta, lam, G, tau, ar_sd, xi, uu, discard):
    if kind == OBJ_EMPIRICAL:
        return actor_value(theta, gm, delta, lam, G)
    v, q = chain_value(theta, lam, tau, ar_sd, xi, uu, discard)
    return v


@njit(cache=True)
def constraint_of(kind, theta, G, ar_sd, xi, uu, discard):
    if kind == OBJ_EMPIRICAL:
        return _quad(theta, G)
    v, q = chain_value(theta, 0.0, 0.0, ar_sd, xi, uu, discard)
    return q


@njit(cache=True)
def _better(v_new, x_new, v_old, x_old):
    if v_new > v_old + TIE_TOL:
        return True
    if v_new >= v_old - TIE_TOL and _norm2(x_new) < _norm2(x_old):
        return True
    return False


@njit(cache=True)
def grid_tables(kind, gm, delta, G, tau, ar_sd, xi, uu, discard, p, lo, hi, step):
    """Reward part and constraint part at every point of the lattice [lo, hi]^p.

    The objective at multiplier ``lam`` is ``rv - lam * qv``, so one scan
    serves a whole multiplier search.  Points are enumerated in
    lexicographic order, which fixes the tie-breaking order.
    """
    m = int(np.floor((hi - lo) / step + 1e-9)) + 1
    total = 1
    for _ in range(p):
        total *= m
    pts = np.empty((total, p))
    rv = np.empty(total)
    qv = np.empty(total)
    for idx in range(total):
        r = idx
        for i in range(p - 1, -1, -1):
            pts[idx, i] = lo + step * (r % m)
            r //= m
        x = pts[idx]
        if kind == OBJ_EMPIRICAL:
            qv[idx] = _quad(x, G)
            rv[idx] = actor_value(x, gm, delta, 0.0, G)
        else:
            v, q = chain_value(x, 0.0, tau, ar_sd, xi, uu, discard)
            qv[idx] = q
            rv[idx] = v
    return pts, rv, qv


@njit(cache=True)
def grid_pick(pts, rv, qv, lam):
    """Best lattice point at multiplier ``lam``; ties go to the smaller norm."""
    best = 0
    best_v = rv[0] - lam * qv[0]
    for idx in range(1, pts.shape[0]):
        v = rv[idx] - lam * qv[idx]
        if _better(v, pts[idx], best_v, pts[best]):
            best_v = v
            best = idx
    return pts[best].copy(), best_v


@njit(cache=True)
def compass_search(kind, x0, gm, delta, lam, G, tau, ar_sd, xi, uu, discard,
                   step0, tol, max_evals, bound):
    """Compass pattern search: poll +/- each axis, halve the step on failure."""
    p = x0.shape[0]
    x = x0.copy()
    fx = _objective(kind, x, gm, delta, lam, G, tau, ar_sd, xi, uu, discard)
    evals = 1
    step = step0
    y = np.empty(p)
    while step >= tol and evals < max_evals:
        moved = False
        for i in range(p):
            for sgn in (1.0, -1.0):
                y[:] = x
                y[i] += sgn * step
                if abs(y[i]) > bound:
                    continue
                fy = _objective(kind, y, gm, delta, lam, G, tau, ar_sd, xi, uu, discard)
                evals += 1
                if fy > fx + TIE_TOL:
                    x[:] = y
                    fx = fy
                    moved = True
                    break
            if moved or evals >= max_evals:
                break
        if not moved:
            step *= 0.5
    return x, fx, evals


@njit(cache=True)
def newton_ascent(theta0, gm, delta, lam, G, gtol, max_iter, bound):
    """Safeguarded Newton ascent with Armijo backtracking.

    Returns ``(theta, value, grad_inf, ok)``.  ``ok`` is False when the
    iteration stalls, leaves the box, or hits ``max_iter``.
    """
    p = theta0.shape[0]
    theta = theta0.copy()
    grad = np.empty(p)
    hess = np.empty((p, p))
    M = np.empty((p, p))
    trial = np.empty(p)
    v = actor_derivs(theta, gm, delta, lam, G, grad, hess)
    for it in range(max_iter):
        gi = 0.0
        for i in range(p):
            gi = max(gi, abs(grad[i]))
        if gi <= gtol:
            return theta, v, gi, True
        shift = 0.0
        scale = 0.0
        for i in range(p):
            scale = max(scale, abs(hess[i, i]))
        scale = max(scale, 1e-12)
        while True:
            for i in range(p):
                for j in range(p):
                    M[i, j] = -hess[i, j]
                M[i, i] += shift
            if cholesky_inplace(M):
                break
            shift = 1e-8 * scale if shift == 0.0 else shift * 10.0
            if shift > 1e12 * scale:
                return theta, v, gi, False
        d = cholesky_solve(M, grad)
        slope = 0.0
        for i in range(p):
            slope += grad[i] * d[i]
        alpha = 1.0
        accepted = False
        while alpha > 1e-12:
            for i in range(p):
                trial[i] = theta[i] + alpha * d[i]
            vt = actor_value(trial, gm, delta, lam, G)
            if vt >= v + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return theta, v, gi, gi <= 1e-6
        for i in range(p):
            if abs(trial[i]) > bound:
                return theta, v, gi, False
        theta[:] = trial
        v = actor_derivs(theta, gm, delta, lam, G, grad, hess)
    gi = 0.0
    for i in range(p):
        gi = max(gi, abs(grad[i]))
    return theta, v, gi, gi <= gtol


@njit(cache=True)
def grad_inf(theta, gm, delta, lam, G):
    p = theta.shape[0]
    grad = np.empty(p)
    hess = np.empty((p, p))
    actor_derivs(theta, gm, delta, lam, G, grad, hess)
    gi = 0.0
    for i in range(p):
        gi = max(gi, abs(grad[i]))
    return gi


@njit(cache=True)
def _polish(kind, x, v, gm, delta, lam, G, bound):
    """Newton refinement of a pattern-search point, kept only if not worse."""
    if kind != OBJ_EMPIRICAL:
        return x, v
    xn, vn, gi, ok = newton_ascent(x, gm, delta, lam, G, 1e-9, 50, bound)
    if ok and vn >= v - TIE_TOL:
        return xn, vn
    return x, v


@njit(cache=True)
def solve_lambda(kind, lam, gm, delta, G, tau, ar_sd, xi, uu, discard,
                 warm, has_warm, use_global, pts, rv, qv, bound, step0, tol, max_evals):
    """Maximize the objective at a fixed multiplier.

    Global mode seeds compass search with the grid winner and the warm
    start.  Local mode runs Newton from the warm start and falls back to
    compass search (always compass for the chain objective).
    Returns ``(theta, value)``.
    """
    if use_global:
        gx, gv = grid_pick(pts, rv, qv, lam)
        x1, v1, e1 = compass_search(kind, gx, gm, delta, lam, G, tau, ar_sd, xi, uu, discard,
                                    step0, tol, max_evals, bound)
        x1, v1 = _polish(kind, x1, v1, gm, delta, lam, G, bound)
        if has_warm:
            x2, v2, e2 = compass_search(kind, warm, gm, delta, lam, G, tau, ar_sd, xi, uu, discard,
                                        step0, tol, max_evals, bound)
            x2, v2 = _polish(kind, x2, v2, gm, delta, lam, G, bound)
            if _better(v2, x2, v1, x1):
                return x2, v2
        return x1, v1
    if kind == OBJ_EMPIRICAL:
        x, v, gi, ok = newton_ascent(warm, gm, delta, lam, G, 1e-9, 50, bound)
        if ok:
            return x, v
    xc, vc, ev = compass_search(kind, warm, gm, delta, lam, G, tau, ar_sd, xi, uu, discard,
                                step0, tol, max_evals, bound)
    return _polish(kind, xc, vc, gm, delta, lam, G, bound)


@njit(cache=True)
def lattice_lambda(idx, lam_min, lam_step):
    if idx == 0:
        return lam_min
    return idx * lam_step


@njit(cache=True)
def lambda_bisect(kind, gm, delta, G, tau, ar_sd, xi, uu, discard, budget,
                  warm, has_warm, use_global, bound, lam_min, lam_step, n_lattice,
                  grid_lo, grid_hi, grid_step, step0, tol, max_evals):
    """Smallest lattice multiplier whose maximizer meets the constraint budget.

    The lattice is ``{lam_min} U {i * lam_step : i = 1..n_lattice}``; the
    largest point is tried first, then bisection on the index.  Returns
    ``(lam, theta, q, feasible)``.  When even the largest multiplier is
    infeasible its result comes back with ``feasible=False``.
    """
    p = warm.shape[0]
    if use_global:
        pts, rv, qv = grid_tables(kind, gm, delta, G, tau, ar_sd, xi, uu, discard, p,
                                  grid_lo, grid_hi, grid_step)
    else:
        pts = np.zeros((1, p))
        rv = np.zeros(1)
        qv = np.zeros(1)
    hi = n_lattice
    th_hi, v = solve_lambda(kind, lattice_lambda(hi, lam_min, lam_step), gm, delta, G, tau, ar_sd,
                            xi, uu, discard, warm, has_warm, use_global, pts, rv, qv,
                            bound, step0, tol, max_evals)
    q_hi = constraint_of(kind, th_hi, G, ar_sd, xi, uu, discard)
    if q_hi > budget:
        return lattice_lambda(hi, lam_min, lam_step), th_hi, q_hi, False
    th0, v = solve_lambda(kind, lam_min, gm, delta, G, tau, ar_sd, xi, uu, discard,
                          warm, has_warm, use_global, pts, rv, qv, bound, step0, tol, max_evals)
    q0 = constraint_of(kind, th0, G, ar_sd, xi, uu, discard)
    if q0 <= budget:
        return lam_min, th0, q0, True
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        th, v = solve_lambda(kind, lattice_lambda(mid, lam_min, lam_step), gm, delta, G, tau,
                             ar_sd, xi, uu, discard, warm, has_warm, use_global, pts, rv, qv,
                             bound, step0, tol, max_evals)
        q = constraint_of(kind, th, G, ar_sd, xi, uu, discard)
        if q <= budget:
            hi = mid
            th_hi = th
            q_hi = q
        else:
            lo = mid
    return lattice_lambda(hi, lam_min, lam_step), th_hi, q_hi, True


# ---------------------------------------------------------------------------
# environments


@njit(cache=True)
def env_mean(kind, tau, alpha_nl, s, a):
    """Noise-free outcome mean in the environment's native sign."""
    if kind == TOY:
        return 1.0 + s[0] + a + s[0] * a
    x1 = s[0]
    if kind == NONLINEAR:
        x1 = (1.0 - alpha_nl) * s[0] + alpha_nl * s[0] * s[0]
    c3 = tau if kind == BURDEN else 0.4
    return 10.0 - 0.4 * x1 - 0.4 * s[1] - a * (0.2 + 0.2 * x1 + 0.2 * s[1]) + c3 * s[2]


@njit(cache=True)
def next_context(kind, ar_sd, t, prev, prev_a, z_row, u_ctx, out):
    """Write the context for step ``t`` into ``out``.

    ``z_row`` carries the innovations in index order, ``u_ctx`` the uniform
    used by the binary toy context.
    """
    if kind == TOY:
        out[0] = 1.0 if u_ctx < 0.5 else -1.0
        return
    if t == 0 or kind == IID or kind == NONLINEAR:
        out[0] = z_row[0]
        out[1] = z_row[1]
        out[2] = z_row[2]
        return
    out[0] = 0.4 * prev[0] + ar_sd * z_row[0]
    out[1] = 0.4 * prev[1] + ar_sd * z_row[1]
    if kind == AR1:
        out[2] = z_row[2]
    else:
        out[2] = 0.4 * prev[2] + 0.2 * prev[2] * prev_a + 0.4 * prev_a + z_row[2]


@njit(cache=True)
def fill_features(s, a, f):
    d = s.shape[0]
    f[0] = 1.0
    for i in range(d):
        f[1 + i] = s[i]
    f[d + 1] = a
    for i in range(d):
        f[d + 2 + i] = a * s[i]


@njit(cache=True)
def _clip(x, bound):
    if x > bound:
        return bound
    if x < -bound:
        return -bound
    return x


@njit(cache=True)
def fill_delta(S, n, mu, clip, K, delta):
    """Estimated treatment effect r(s,1) - r(s,0) for the first ``n`` contexts."""
    d = S.shape[1]
    for t in range(n):
        r0 = mu[0]
        r1 = mu[0] + mu[d + 1]
        for i in range(d):
            r0 += mu[1 + i] * S[t, i]
            r1 += (mu[1 + i] + mu[d + 2 + i]) * S[t, i]
        if clip:
            r0 = _clip(r0, K + 1.0)
            r1 = _clip(r1, K + 1.0)
        delta[t] = r1 - r0


@njit(cache=True)
def run_loop(kind, tau, alpha_nl, ar_sd, noise_sd, outcome_sign,
             z, u, replay, replay_ctx, replay_mu, replay_eps,
             burn_in, lam_fixed, budget, search_every,
             clip, K, zeta, refactor_every,
             global_mode, bound, lam_min, lam_step, n_lattice,
             grid_lo, grid_hi, grid_step, step0, tol, max_evals,
             S, A, Y, theta_path, lam_path, status):
    """One online actor-critic trajectory.

    ``outcome_sign`` maps the native outcome to the reward the learner sees
    (``-1`` for cost environments).  In replay mode the contexts come from
    ``replay_ctx`` and rewards are ``f(s,a).replay_mu + replay_eps``.

    ``status`` receives ``[non-stationary actor steps, infeasible lambda
    searches, final step flagged]``.  Returns ``(mu_hat, Binv, G_sum)``.
    """
    T = z.shape[0]
    d = S.shape[1]
    p = d + 1
    k = 2 * d + 2
    Binv = np.zeros((k, k))
    Bfull = np.zeros((k, k))
    for i in range(k):
        Binv[i, i] = 1.0 / zeta
        Bfull[i, i] = zeta
    Avec = np.zeros(k)
    mu = np.zeros(k)
    f = np.empty(k)
    s = np.empty(d)
    prev = np.zeros(d)
    prev_a = 0
    gm = np.empty((T, p))
    Gsum = np.zeros((p, p))
    G = np.empty((p, p))
    delta = np.empty(T)
    theta = np.zeros(p)
    lam = lam_fixed
    first_actor = True
    since_refactor = 0
    no_xi = np.zeros((1, 3))
    no_u = np.zeros(1)
    no_pts = np.zeros((1, p))
    status[0] = 0
    status[1] = 0
    status[2] = 0
    for t in range(T):
        if replay:
            for i in range(d):
                s[i] = replay_ctx[t, i]
        else:
            next_context(kind, ar_sd, t, prev, prev_a, z[t], u[t, 1], s)
        gm[t, 0] = 1.0
        for i in range(d):
            gm[t, 1 + i] = s[i]
        if t < burn_in:
            a = 1 if u[t, 0] < 0.5 else 0
        else:
            x = 0.0
            for i in range(p):
                x += gm[t, i] * theta[i]
            a = 1 if u[t, 0] < logistic(x) else 0
        fill_features(s, a, f)
        if replay:
            r = replay_eps[t]
            for i in range(k):
                r += f[i] * replay_mu[i]
            y = r
        else:
            y = env_mean(kind, tau, alpha_nl, s, a) + noise_sd * z[t, d]
            r = outcome_sign * y
        for i in range(d):
            S[t, i] = s[i]
        A[t] = a
        Y[t] = y
        # critic
        for i in range(k):
            Avec[i] += f[i] * r
            for j in range(k):
                Bfull[i, j] += f[i] * f[j]
        since_refactor += 1
        if since_refactor >= refactor_every:
            inv, okinv = spd_inverse(Bfull)
            if okinv:
                Binv[:, :] = inv
            else:
                sm_update(Binv, f)
            since_refactor = 0
        else:
            sm_update(Binv, f)
        for i in range(k):
            acc = 0.0
            for j in range(k):
                acc += Binv[i, j] * Avec[j]
            mu[i] = acc
        for i in range(p):
            for j in range(p):
                Gsum[i, j] += gm[t, i] * gm[t, j]
        n = t + 1
        for i in range(p):
            for j in range(p):
                G[i, j] = Gsum[i, j] / n
        prev[:] = s
        prev_a = a
        lam_path[t] = np.nan
        for i in range(p):
            theta_path[t, i] = np.nan
        if n < burn_in:
            continue
        # actor
        fill_delta(S, n, mu, clip, K, delta)
        gview = gm[:n]
        dview = delta[:n]
        use_global = global_mode == GLOBAL_ALWAYS or (global_mode == GLOBAL_FIRST and first_actor)
        searching = lam_fixed < 0.0 and (first_actor or n % search_every == 0 or n == T)
        if searching:
            lam_new, th, q, feas = lambda_bisect(OBJ_EMPIRICAL, gview, dview, G, 0.0, 0.0,
                                                 no_xi, no_u, 0, budget, theta, not first_actor,
                                                 use_global, bound, lam_min, lam_step, n_lattice,
                                                 grid_lo, grid_hi, grid_step, step0, tol, max_evals)
            lam = lam_new
            if not feas:
                status[1] += 1
        else:
            if use_global:
                pts, rv, qv = grid_tables(OBJ_EMPIRICAL, gview, dview, G, 0.0, 0.0, no_xi, no_u, 0,
                                          p, grid_lo, grid_hi, grid_step)
            else:
                pts = no_pts
                rv = no_u
                qv = no_u
            th, v = solve_lambda(OBJ_EMPIRICAL, lam, gview, dview, G, 0.0, 0.0, no_xi, no_u, 0,
                                 theta, not first_actor, use_global, pts, rv, qv,
                                 bound, step0, tol, max_evals)
        theta[:] = th
        first_actor = False
        bad = grad_inf(theta, gview, dview, lam, G) > 1e-3
        if bad:
            status[0] += 1
        if n == T and bad:
            status[2] = 1
        lam_path[t] = lam
        for i in range(p):
            theta_path[t, i] = theta[i]
    return mu, Binv, Gsum
