"""Independent oracles shared by the unit and acceptance tests.

These deliberately re-derive results by brute force and never call the
implementation paths they check.
"""

import math

import numpy as np


def cosine_ref(u, v):
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return sum(a * b for a, b in zip(u, v)) / (nu * nv)


def dtw_enumerate(ev, ea):
    """Exhaustive enumeration of monotone paths with steps (1,0),(0,1),(1,1).

    Returns (min_total_cost, path_length_of_the_minimizer). Exact-total ties
    are resolved the way backtracking does: walking backward from the end,
    prefer the diagonal step, then (0,1), then (1,0) - i.e. the minimizer
    with the lexicographically smallest reversed step-rank sequence. Exact
    ties across implementations only arise for inputs whose cosines are
    exact in floating point (e.g. one-dimensional frames with power-of-two
    magnitudes); elsewhere ties have measure zero.
    """
    n, m = len(ev), len(ea)
    cost = [[1.0 - cosine_ref(ev[i], ea[j]) for j in range(m)] for i in range(n)]
    best = [math.inf, 0, None]  # total, length, reversed step ranks
    ranks = []

    def dfs(i, j, total):
        total += cost[i][j]
        if i == n - 1 and j == m - 1:
            key = tuple(reversed(ranks))
            if total < best[0] or (total == best[0] and key < best[2]):
                best[0] = total
                best[1] = len(ranks) + 1
                best[2] = key
            return
        if i + 1 < n and j + 1 < m:
            ranks.append(0)
            dfs(i + 1, j + 1, total)
            ranks.pop()
        if j + 1 < m:
            ranks.append(1)
            dfs(i, j + 1, total)
            ranks.pop()
        if i + 1 < n:
            ranks.append(2)
            dfs(i + 1, j, total)
            ranks.pop()

    dfs(0, 0, 0.0)
    return best[0], best[1]


def dtw_score_enumerated(ev, ea):
    total, length = dtw_enumerate(ev, ea)
    return 1.0 - total / length


def random_dtw_pair(rng, T, dim):
    """Random frames for DTW oracle trials; dimension 1 uses exact
    power-of-two magnitudes so cost ties are bit-identical across
    implementations (cosines collapse to exactly +-1)."""
    import numpy as np

    if dim == 1:
        vals = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
        ev = rng.choice(vals, size=(T, 1))
        ea = rng.choice(vals, size=(T, 1))
    else:
        ev = rng.normal(size=(T, dim))
        ea = rng.normal(size=(T, dim))
    return ev, ea


def auc_pairwise_ref(scores, labels):
    """O(n^2) pairwise AUC with ties counted 1/2; labels True for real."""
    reals = [s for s, l in zip(scores, labels) if l]
    fakes = [s for s, l in zip(scores, labels) if not l]
    wins = 0.0
    for r in reals:
        for f in fakes:
            if r > f:
                wins += 1.0
            elif r == f:
                wins += 0.5
    return wins / (len(reals) * len(fakes))


def finite_difference_grads(loss_fn, encoder, step=1e-4):
    """Central finite differences of loss_fn(encoder) w.r.t. every weight."""
    from avsf.encoder import PARAM_FIELDS

    grads = {}
    for name in PARAM_FIELDS:
        arr = getattr(encoder, name)
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = loss_fn(encoder)
            flat[i] = orig - step
            lo = loss_fn(encoder)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        grads[name] = g
    return grads


def max_relative_grad_error(analytic, numeric):
    worst = 0.0
    for name, a in analytic.items():
        f = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-8)
        worst = max(worst, float((np.abs(a - f) / denom).max()))
    return worst
