"""Discrete per-frame targets via k-means over feature frames.

Round 0 fits on stacked audio features; refinement rounds re-fit on fused
features from a trained encoder. Labels are 0-based cluster indices.
"""

import struct
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .validation import as_float_matrix, as_rng, check_finite, check_fitted

CODEBOOK_MAGIC = b"AVSC"
CODEBOOK_VERSION = 1
_CB_HEADER = struct.Struct("<4sIB3xIQI")

FEATURE_SOURCES = ("mfcc", "learned")


@dataclass
class Codebook:
    centroids: np.ndarray  # (C, dim)
    feature_source: str = "mfcc"
    iteration: int = 0

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 2:
            raise ValueError("codebook needs a (C>=2, dim) centroid matrix")
        if self.feature_source not in FEATURE_SOURCES:
            raise ValueError(f"unknown feature source {self.feature_source!r}")
        check_finite(self.centroids, "centroids")

    @property
    def n_clusters(self):
        return self.centroids.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]


@dataclass
class ClusterAssignment:
    labels: np.ndarray  # (T,) int64, values in [0, n_clusters)
    n_clusters: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise ValueError("labels must be a 1-D vector")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_clusters):
            raise ValueError("labels out of range")


def _sq_dists(X, centroids):
    # (N, C) squared Euclidean distances; explicit form keeps accumulation order fixed
    return ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def kmeans_pp_init(X, n_clusters, rng):
    """k-means++ seeding: first center uniform, then prob proportional to D^2."""
    n = X.shape[0]
    centers = np.empty((n_clusters, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, n_clusters):
        total = closest.sum()
        if total <= 0:
            centers[i] = X[rng.integers(n)]
            continue
        probs = closest / total
        centers[i] = X[rng.choice(n, p=probs)]
        closest = np.minimum(closest, ((X - centers[i]) ** 2).sum(axis=1))
    return centers


def _reseed_empty(X, centroids, labels, dists):
    """Move each empty cluster's centroid to the point farthest from its own
    centroid; never steals a singleton cluster's only point."""
    n_clusters = centroids.shape[0]
    point_dist = dists[np.arange(X.shape[0]), labels].copy()
    sizes = np.bincount(labels, minlength=n_clusters)
    for c in range(n_clusters):
        if sizes[c] == 0:
            candidates = np.where(sizes[labels] >= 2, point_dist, -np.inf)
            far = int(np.argmax(candidates))
            sizes[labels[far]] -= 1
            labels[far] = c
            sizes[c] = 1
            centroids[c] = X[far]
            point_dist[far] = 0.0
    return centroids, labels


def lloyd(X, centroids, max_iter=100):
    """Plain Lloyd iterations until the assignment reaches a fixpoint.

    Returns (centroids, labels, inertia, n_iter, inertia_history).
    """
    centroids = centroids.copy()
    labels = None
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        dists = _sq_dists(X, centroids)
        new_labels = np.argmin(dists, axis=1)  # ties -> lowest centroid index
        centroids, new_labels = _reseed_empty(X, centroids, new_labels, dists)
        inertia = float(_sq_dists(X, centroids)[np.arange(X.shape[0]), new_labels].sum())
        history.append(inertia)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        if n_iter < max_iter:
            for c in range(centroids.shape[0]):
                centroids[c] = X[labels == c].mean(axis=0)
    return centroids, labels, history[-1], n_iter, history


def kmeans_fit(X, n_clusters, seed=0, max_iter=100, feature_source="mfcc", iteration=0):
    """Deterministic k-means++ plus Lloyd; returns a Codebook."""
    X = as_float_matrix(X, "features")
    check_finite(X, "features")
    if X.shape[0] < n_clusters:
        raise ValueError(f"need at least n_clusters={n_clusters} points, got {X.shape[0]}")
    rng = as_rng(seed)
    init = kmeans_pp_init(X, n_clusters, rng)
    centroids, _, _, _, _ = lloyd(X, init, max_iter=max_iter)
    return Codebook(centroids=centroids, feature_source=feature_source, iteration=iteration)


def assign(codebook, X):
    """Nearest-centroid labels; ties break to the lowest centroid index."""
    X = as_float_matrix(X, "features")
    if X.shape[1] != codebook.dim:
        raise ValueError(
            f"dimension mismatch: features dim {X.shape[1]}, codebook dim {codebook.dim}"
        )
    labels = np.argmin(_sq_dists(X, codebook.centroids), axis=1)
    return ClusterAssignment(labels=labels, n_clusters=codebook.n_clusters)


class CodebookKMeans(BaseEstimator):
    """k-means codebook estimator (k-means++ init, Lloyd refinement).

    Deterministic given random_state; empty clusters are re-seeded to the point
    farthest from its current centroid.
    """

    def __init__(self, n_clusters=100, max_iter=100, random_state=0, feature_source="mfcc"):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.random_state = random_state
        self.feature_source = feature_source

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        check_finite(X, "X")
        if X.shape[0] < self.n_clusters:
            raise ValueError(
                f"need at least n_clusters={self.n_clusters} points, got {X.shape[0]}"
            )
        rng = as_rng(self.random_state)
        init = kmeans_pp_init(X, self.n_clusters, rng)
        centroids, labels, inertia, n_iter, history = lloyd(X, init, max_iter=self.max_iter)
        self.cluster_centers_ = centroids
        self.labels_ = labels
        self.inertia_ = inertia
        self.n_iter_ = n_iter
        self.inertia_history_ = history
        self.codebook_ = Codebook(
            centroids=centroids, feature_source=self.feature_source, iteration=0
        )
        return self

    def predict(self, X):
        check_fitted(self, "codebook_")
        return assign(self.codebook_, X).labels

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_


def write_codebook(codebook, dest):
    header = _CB_HEADER.pack(
        CODEBOOK_MAGIC,
        CODEBOOK_VERSION,
        FEATURE_SOURCES.index(codebook.feature_source),
        codebook.dim,
        codebook.n_clusters,
        codebook.iteration,
    )
    with open(dest, "wb") as fh:
        fh.write(header)
        fh.write(codebook.centroids.astype("<f8").tobytes())


def read_codebook(src):
    from .io import BadMagicError, TruncatedFileError, UnsupportedVersionError

    with open(src, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CB_HEADER.size:
        raise TruncatedFileError(f"{src}: file shorter than codebook header")
    magic, version, source, dim, C, iteration = _CB_HEADER.unpack_from(raw, 0)
    if magic != CODEBOOK_MAGIC:
        raise BadMagicError(f"{src}: bad magic {magic!r}")
    if version != CODEBOOK_VERSION:
        raise UnsupportedVersionError(f"{src}: unsupported codebook version {version}")
    expected = C * dim * 8
    body = raw[_CB_HEADER.size:]
    if len(body) < expected:
        raise TruncatedFileError(f"{src}: truncated codebook payload")
    centroids = np.frombuffer(body[:expected], dtype="<f8").reshape(C, dim)
    return Codebook(
        centroids=centroids.copy(),
        feature_source=FEATURE_SOURCES[source],
        iteration=iteration,
    )
