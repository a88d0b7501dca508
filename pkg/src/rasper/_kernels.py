"""Compiled inner loop for the MM solver.

The numpy implementation in ``solver`` spends most of its time dispatching
small array operations; this module fuses one whole fit (pair sums, SPD
solve, objective evaluations, monotone acceleration) into a single compiled
kernel for the common single-table case. The algorithm is identical to the
numpy path; ``solver.fit_rasper`` dispatches here when possible.

Two identities keep the transcendental count down: only the upper triangle
is visited (sigma(-u) = 1 - sigma(u)), and the logistic-bound curvature
tanh(u/2)/(4u) is rewritten as (sigma(u) - 1/2)/(2u), reusing the sigmoid.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


@njit(cache=True, inline="always")
def _sigmoid(u):
    if u >= 0.0:
        return 1.0 / (1.0 + np.exp(-u))
    e = np.exp(u)
    return e / (1.0 + e)


@njit(cache=True, inline="always")
def _jj_from_sigma(u, s):
    # tanh(u/2)/(4u) = (sigma(u) - 1/2)/(2u), with the series value at 0
    if abs(u) <= 1e-4:
        return 0.125 - u * u / 96.0
    return (s - 0.5) / (2.0 * u)


@njit(cache=True)
def _objective(x, y, w, nu, lam, alpha, beta0, beta):
    n, p = x.shape
    eta = x @ beta
    rss = 0.0
    for i in range(n):
        r = y[i] - beta0 - eta[i]
        rss += r * r
    val = 0.5 * rss
    for j in range(p):
        val += 0.5 * alpha * beta[j] * beta[j]
    if lam > 0.0:
        d = 0.0
        for i in range(n):
            d += 0.5 * w[i, i]
            for j in range(i + 1, n):
                wij = w[i, j]
                wji = w[j, i]
                if wij == 0.0 and wji == 0.0:
                    continue
                s = _sigmoid((eta[i] - eta[j]) / nu)
                d += wij * s + wji * (1.0 - s)
        if d <= 0.0:
            return np.inf
        val -= lam * np.log(d)
    return val


@njit(cache=True)
def _mm_fit(x, y, w, nu, lam, alpha, beta_init, tol, max_iter):
    """Full MM fit with monotone step extrapolation.

    Returns (beta0, beta, trace, iters, converged, ok); ok is False when the
    SPD solve fails or the concordance vanishes, in which case the caller
    falls back to the numpy path for proper error reporting.
    """
    n, p = x.shape
    xbar = np.zeros(p)
    for j in range(p):
        xbar[j] = x[:, j].mean()
    xc = x - xbar
    ybar = y.mean()
    yc = y - ybar
    xtx = xc.T @ xc
    xty = xc.T @ yc

    beta = beta_init.copy()
    beta0 = ybar - xbar @ beta
    trace = np.empty(max_iter + 1)
    trace[0] = _objective(x, y, w, nu, lam, alpha, beta0, beta)
    converged = False
    iters = 0
    ok = True
    lin = np.zeros(p)
    quad = np.zeros((p, p))
    diff = np.zeros(p)
    for it in range(1, max_iter + 1):
        iters = it
        system = xtx.copy()
        for j in range(p):
            system[j, j] += alpha
        rhs = xty.copy()
        if lam > 0.0:
            eta = x @ beta
            sv = 0.0
            for a in range(p):
                lin[a] = 0.0
                for b in range(p):
                    quad[a, b] = 0.0
            for i in range(n):
                # diagonal pairs: u = 0, zero difference vector, sigma = 1/2
                sv += 0.5 * w[i, i]
                for j2 in range(i + 1, n):
                    wij = w[i, j2]
                    wji = w[j2, i]
                    if wij == 0.0 and wji == 0.0:
                        continue
                    u = (eta[i] - eta[j2]) / nu
                    s = _sigmoid(u)
                    vij = wij * s
                    vji = wji * (1.0 - s)
                    sv += vij + vji
                    c = _jj_from_sigma(u, s)
                    t = c * (vij + vji)
                    dv = vij - vji
                    for a in range(p):
                        diff[a] = (x[i, a] - x[j2, a]) / nu
                    for a in range(p):
                        lin[a] += dv * diff[a]
                        ta = t * diff[a]
                        for b in range(a, p):
                            quad[a, b] += ta * diff[b]
            if sv <= 0.0:
                ok = False
                break
            for a in range(p):
                rhs[a] += 0.5 * lam * lin[a] / sv
                system[a, a] += 2.0 * lam * quad[a, a] / sv
                for b in range(a + 1, p):
                    inc = 2.0 * lam * quad[a, b] / sv
                    system[a, b] += inc
                    system[b, a] += inc
        beta_new = np.linalg.solve(system, rhs)
        if not np.all(np.isfinite(beta_new)):
            ok = False
            break
        beta0_new = ybar - xbar @ beta_new
        value = _objective(x, y, w, nu, lam, alpha, beta0_new, beta_new)
        # Monotone acceleration: extrapolate along the MM direction while the
        # objective keeps improving; the plain step already guarantees descent.
        step = beta_new - beta
        factor = 2.0
        while factor <= 16.0:
            cand = beta + factor * step
            cand0 = ybar - xbar @ cand
            cand_val = _objective(x, y, w, nu, lam, alpha, cand0, cand)
            if cand_val < value:
                value = cand_val
                beta_new = cand
                beta0_new = cand0
            else:
                break
            factor *= 2.0
        beta = beta_new
        beta0 = beta0_new
        trace[it] = value
        prev = trace[it - 1]
        if abs(prev - value) <= tol * (1.0 + abs(prev)):
            converged = True
            break
    return beta0, beta, trace[:iters + 1], iters, converged, ok


@njit(cache=True)
def _loocv(x, y, fold_w, nu, lam, alpha, warm, tol, max_iter):
    """Leave-one-out half squared prediction error, folds run in compiled code.

    ``fold_w`` stacks the per-fold weight matrices, shape (n, n-1, n-1);
    ``warm`` holds one starting beta per fold, shape (n, p), and is updated
    in place with each fold's solution so a caller sweeping a penalty path
    can restart every fold from its own previous fit. Returns (mean loss,
    ok); ok is False when any fold fit fails, and the caller falls back to
    the Python path for error reporting.
    """
    n, p = x.shape
    xs = np.empty((n - 1, p))
    ys = np.empty(n - 1)
    total = 0.0
    for i in range(n):
        k = 0
        for j in range(n):
            if j == i:
                continue
            for a in range(p):
                xs[k, a] = x[j, a]
            ys[k] = y[j]
            k += 1
        beta0, beta, trace, iters, conv, ok = _mm_fit(
            xs, ys, fold_w[i], nu, lam, alpha, warm[i], tol, max_iter)
        if not ok:
            return 0.0, False
        warm[i] = beta
        pred = beta0 + x[i] @ beta
        total += 0.5 * (y[i] - pred) ** 2
    return total / n, True
