"""Modality alignment and matching scores.

Three modes, one decision rule (higher score = more likely real):

* plain        -- mean frame-wise cosine similarity;
* fixed_offset -- max of the plain score over a single global shift
                  delta in [-tau, +tau], zero vectors substituted for audio
                  frames shifted out of range;
* dtw          -- dynamic time warping with cost 1 - cosine, steps
                  (1,0),(0,1),(1,1), score = 1 - path_cost / path_length.

All arithmetic is float64; scores live in [-1, 1].
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .validation import as_float_matrix, check_same_dim

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

ALIGNMENT_MODES = ("plain", "fixed_offset", "dtw")


@dataclass
class AlignmentConfig:
    mode: str = "fixed_offset"
    tau: int = 15  # max offset in frames; window length 2*tau+1 = 31
    dtw_band: Optional[int] = None  # Sakoe-Chiba band half-width

    def __post_init__(self):
        if self.mode not in ALIGNMENT_MODES:
            raise ValueError(f"unknown alignment mode {self.mode!r}")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.dtw_band is not None and self.dtw_band < 0:
            raise ValueError("dtw_band must be >= 0")


@dataclass
class MatchResult:
    score: float
    best_offset: Optional[int] = None  # fixed_offset mode only
    path: Optional[np.ndarray] = None  # dtw mode only, (L, 2) index pairs

    def __post_init__(self):
        if self.best_offset is not None and self.path is not None:
            raise ValueError("at most one of best_offset/path may be set")


def cosine(u, v):
    """Cosine similarity; 0 when either vector has zero norm (zero-pad rule)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _unit_rows(X):
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)


def _rowwise_cosine(U, V):
    # U, V already unit rows (zero rows stay zero -> cosine 0)
    return np.clip(np.einsum("ij,ij->i", U, V), -1.0, 1.0)


def _check_pair(ev, ea, equal_frames=True):
    ev = as_float_matrix(ev, "visual embeddings")
    ea = as_float_matrix(ea, "audio embeddings")
    check_same_dim(ev, ea, "visual", "audio")
    if equal_frames and ev.shape[0] != ea.shape[0]:
        raise ValueError(
            f"frame count mismatch: {ev.shape[0]} vs {ea.shape[0]} "
            "(truncate to the common length first)"
        )
    return ev, ea


def score_plain(ev, ea):
    """Mean frame-wise cosine similarity between two equal-length sequences."""
    ev, ea = _check_pair(ev, ea)
    sims = _rowwise_cosine(_unit_rows(ev), _unit_rows(ea))
    return MatchResult(score=float(sims.mean()))


def score_fixed_offset(ev, ea, tau=15):
    """Max mean cosine over one global offset delta in [-tau, tau].

    Audio frames shifted outside [0, T) count as zero vectors (similarity 0);
    the mean always divides by the full frame count T. Ties prefer the
    smallest |delta|, negative before positive.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    ev, ea = _check_pair(ev, ea)
    T = ev.shape[0]
    U = _unit_rows(ev)
    V = _unit_rows(ea)

    best_score = -np.inf
    best_delta = 0
    for mag in range(tau + 1):
        deltas = (0,) if mag == 0 else (-mag, mag)
        for delta in deltas:
            lo = max(0, -delta)
            hi = min(T, T - delta)
            if hi <= lo:
                s = 0.0
            else:
                s = float(_rowwise_cosine(U[lo:hi], V[lo + delta:hi + delta]).sum()) / T
            if s > best_score:
                best_score = s
                best_delta = delta
    return MatchResult(score=best_score, best_offset=best_delta)


def _cost_matrix(ev, ea):
    return 1.0 - np.clip(_unit_rows(ev) @ _unit_rows(ea).T, -1.0, 1.0)


def _band_mask(n, m, band):
    if band is None:
        return np.ones((n, m), dtype=np.bool_)
    # symmetric slanted band; reduces to |i - j| <= band for equal lengths
    i = np.arange(n)[:, None]
    j = np.arange(m)[None, :]
    scale = max(n - 1, m - 1, 1)
    return np.abs(i * (m - 1) - j * (n - 1)) <= band * scale


@njit(cache=True)
def _dtw_table(cost, feasible):  # pragma: no cover - exercised via score_dtw
    n, m = cost.shape
    acc = np.full((n, m), np.inf)
    direction = np.full((n, m), -1, dtype=np.int8)
    for i in range(n):
        for j in range(m):
            if not feasible[i, j]:
                continue
            if i == 0 and j == 0:
                acc[0, 0] = cost[0, 0]
                continue
            best = np.inf
            d = -1
            if i > 0 and j > 0 and acc[i - 1, j - 1] < best:
                best = acc[i - 1, j - 1]
                d = 0
            if j > 0 and acc[i, j - 1] < best:
                best = acc[i, j - 1]
                d = 1
            if i > 0 and acc[i - 1, j] < best:
                best = acc[i - 1, j]
                d = 2
            if d >= 0:
                acc[i, j] = best + cost[i, j]
                direction[i, j] = d
    return acc, direction


def _backtrack(direction):
    i = direction.shape[0] - 1
    j = direction.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        d = direction[i, j]
        if d == 0:
            i, j = i - 1, j - 1
        elif d == 1:
            j = j - 1
        else:
            i = i - 1
        path.append((i, j))
    path.reverse()
    return np.asarray(path, dtype=np.int64)


def score_dtw(ev, ea, band=None):
    """DTW with cosine cost; frame counts may differ.

    Cost(i,j) = 1 - cosine(ev_i, ea_j); the DP minimizes the total node cost
    along monotone paths from (0,0) to (Tv-1,Ta-1); score = 1 - total / length.
    Backtracking ties prefer the diagonal step, then (0,1), then (1,0).
    """
    ev, ea = _check_pair(ev, ea, equal_frames=False)
    if band is not None and band < 0:
        raise ValueError("band must be >= 0")
    cost = _cost_matrix(ev, ea)
    feasible = _band_mask(cost.shape[0], cost.shape[1], band)
    acc, direction = _dtw_table(cost, feasible)
    total = acc[-1, -1]
    if not np.isfinite(total):
        raise ValueError(f"band {band} too narrow to connect the corners")
    path = _backtrack(direction)
    score = float(np.clip(1.0 - total / path.shape[0], -1.0, 1.0))
    return MatchResult(score=score, path=path)


def score_sequences(ev, ea, config):
    """Dispatch on AlignmentConfig; truncates to the common length for the
    plain and fixed-offset modes (DTW accepts unequal lengths as-is)."""
    if config.mode == "dtw":
        return score_dtw(ev, ea, band=config.dtw_band)
    T = min(len(ev), len(ea))
    ev, ea = ev[:T], ea[:T]
    if config.mode == "plain":
        return score_plain(ev, ea)
    return score_fixed_offset(ev, ea, tau=config.tau)
