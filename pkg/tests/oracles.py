"""Independent reference solutions used by the test-suite."""

import itertools

import numpy as np
import scipy.linalg as sl


def active_set_qp(R, G, h, tol=1e-9):
    """Minimize ``z' R z`` subject to ``G z <= h`` by enumerating active sets.

    Every subset of rows is tried as the equality-active set; subsets whose
    KKT matrix is rank deficient are skipped. Returns the feasible KKT point
    with non-negative multipliers and the lowest cost.
    """
    n = R.shape[0]
    best, best_cost = None, np.inf
    scale = max(1.0, np.abs(h).max())
    for k in range(0, min(n, G.shape[0]) + 1):
        for S in itertools.combinations(range(G.shape[0]), k):
            S = list(S)
            GS = G[S]
            KKT = np.block([[2 * R, GS.T], [GS, np.zeros((k, k))]])
            if np.linalg.matrix_rank(KKT) < n + k:
                continue
            sol = np.linalg.solve(KKT, np.concatenate([np.zeros(n), h[S]]))
            z, lam = sol[:n], sol[n:]
            if np.any(lam < -tol * scale) or np.any(G @ z > h + tol * scale):
                continue
            cost = z @ R @ z
            if cost < best_cost:
                best, best_cost = z, cost
    return best


def linear_affine_flow(A, b, z0, t):
    """Exact solution of ``z' = A z + b`` at times ``t`` via an augmented exponential."""
    n = A.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n] = b
    out = np.empty((len(t), n))
    for k, tk in enumerate(t):
        out[k] = (sl.expm(M * tk) @ np.append(z0, 1.0))[:n]
    return out


def scalar_piecewise(a_cl, c0, x_min, x_max, x0, t):
    """Closed-form trajectory of the scalar limited-state loop.

    Active max branch: ``x' = -c0 (x - x_max)`` until the nominal decay takes
    over at ``x_s = c0 x_max / (c0 + a_cl)``; free branch: ``x' = a_cl x``.
    Only the max branch is needed for initial states above ``x_s``.
    """
    t = np.asarray(t, dtype=float)
    x_s = c0 * x_max / (c0 + a_cl)
    if x0 <= x_s:
        return x0 * np.exp(a_cl * t)
    t_s = np.log((x0 - x_max) / (x_s - x_max)) / c0
    active = x_max + (x0 - x_max) * np.exp(-c0 * t)
    free = x_s * np.exp(a_cl * (t - t_s))
    return np.where(t <= t_s, active, free)


def match_spectra(a, b):
    """Largest distance after greedy nearest matching of two eigenvalue lists."""
    b = list(b)
    worst = 0.0
    for z in a:
        j = int(np.argmin([abs(z - w) for w in b]))
        worst = max(worst, abs(z - b.pop(j)))
    return worst
