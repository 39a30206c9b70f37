"""Toy-scale audio-visual representation learner.

Affine frontends per modality, channel-wise fusion with modality dropout,
span masking with learned mask vectors, and an affine predictor over a
(2w+1)-frame context window that emits cluster logits. Trained by minimizing
the negative log-likelihood of cluster targets at masked frames, with
analytic gradients (checked against central finite differences).

The detection embedding is the predictor's linear response over the context
window (final-layer output without the shared bias): with one modality
dropped, both streams land in the same cluster-logit space, where the cosine
similarity of matched content is high. context_w=0 gives a strictly
frame-local model; context_w>=5 gives the contextual model.
"""

import struct
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from .io import EmbeddingSequence
from .validation import as_float_matrix, as_rng, check_fitted

ENCODER_MAGIC = b"AVSE"
ENCODER_VERSION = 1
_ENC_HEADER = struct.Struct("<4sI5I")

DROPOUT_STATES = ("both", "audio_only", "visual_only")

PARAM_FIELDS = ("W_v", "b_v", "W_a", "b_a", "m_v", "m_a", "W_p", "b_p")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class ToyEncoder:
    W_v: np.ndarray  # (df, dv) visual frontend
    b_v: np.ndarray  # (df,)
    W_a: np.ndarray  # (df, da) audio frontend
    b_a: np.ndarray  # (df,)
    m_v: np.ndarray  # (df,) learned mask vector, visual
    m_a: np.ndarray  # (df,)
    W_p: np.ndarray  # (C, (2w+1)*2df) context-window predictor
    b_p: np.ndarray  # (C,)
    context_w: int

    @property
    def dv(self):
        return self.W_v.shape[1]

    @property
    def da(self):
        return self.W_a.shape[1]

    @property
    def df(self):
        return self.W_v.shape[0]

    @property
    def n_clusters(self):
        return self.W_p.shape[0]

    def copy(self):
        return replace(self, **{f: getattr(self, f).copy() for f in PARAM_FIELDS})


def init_encoder(dv, da, frontend_dim, n_clusters, context_w, seed=0):
    """Gaussian 1/sqrt(fan_in) weights, zero biases and mask vectors."""
    if context_w < 0:
        raise ValueError("context_w must be >= 0")
    rng = as_rng(seed)
    df = frontend_dim
    win = (2 * context_w + 1) * 2 * df
    return ToyEncoder(
        W_v=rng.normal(0.0, 1.0 / np.sqrt(dv), (df, dv)),
        b_v=np.zeros(df),
        W_a=rng.normal(0.0, 1.0 / np.sqrt(da), (df, da)),
        b_a=np.zeros(df),
        m_v=np.zeros(df),
        m_a=np.zeros(df),
        W_p=rng.normal(0.0, 1.0 / np.sqrt(win), (n_clusters, win)),
        b_p=np.zeros(n_clusters),
        context_w=context_w,
    )


@dataclass
class MaskSpec:
    visual_masked: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    audio_masked: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    span_len: int = 5
    mask_prob: float = 0.3

    def __post_init__(self):
        self.visual_masked = np.unique(np.asarray(self.visual_masked, dtype=np.int64))
        self.audio_masked = np.unique(np.asarray(self.audio_masked, dtype=np.int64))

    @property
    def union(self):
        return np.union1d(self.visual_masked, self.audio_masked)

    def check_range(self, T):
        for idx in (self.visual_masked, self.audio_masked):
            if idx.size and (idx.min() < 0 or idx.max() >= T):
                raise ValueError("mask indices out of range")
        return self


def sample_mask_indices(T, mask_prob, span_len, rng):
    """Contiguous spans with geometric lengths (mean span_len), >= 1 frame masked."""
    n_spans = max(1, int(round(mask_prob * T / span_len)))
    idx = []
    for _ in range(n_spans):
        length = int(rng.geometric(1.0 / span_len))
        start = int(rng.integers(0, T))
        idx.extend(range(start, min(start + length, T)))
    return np.unique(np.asarray(idx, dtype=np.int64))


def sample_mask(T, mask_prob, span_len, rng):
    return MaskSpec(
        visual_masked=sample_mask_indices(T, mask_prob, span_len, rng),
        audio_masked=sample_mask_indices(T, mask_prob, span_len, rng),
        span_len=span_len,
        mask_prob=mask_prob,
    )


def _window_stack(H, w):
    """(T, d) -> (T, (2w+1)*d); block k of row t is H[t+k-w], zero-padded."""
    if w == 0:
        return H
    T, d = H.shape
    Z = np.zeros((T, (2 * w + 1) * d))
    for k in range(2 * w + 1):
        off = k - w
        lo = max(0, -off)
        hi = min(T, T - off)
        if hi > lo:
            Z[lo:hi, k * d:(k + 1) * d] = H[lo + off:hi + off]
    return Z


def _frontends(encoder, visual_obs, audio_obs, mask, dropout_state):
    visual_obs = as_float_matrix(visual_obs, "visual_obs")
    audio_obs = as_float_matrix(audio_obs, "audio_obs")
    if visual_obs.shape[0] != audio_obs.shape[0]:
        raise ValueError("modalities must share the frame count (truncate upstream)")
    if visual_obs.shape[1] != encoder.dv or audio_obs.shape[1] != encoder.da:
        raise ValueError("observation dims do not match the encoder frontends")
    if dropout_state not in DROPOUT_STATES:
        raise ValueError(f"unknown dropout state {dropout_state!r}")
    T = visual_obs.shape[0]

    F_v = visual_obs @ encoder.W_v.T + encoder.b_v
    F_a = audio_obs @ encoder.W_a.T + encoder.b_a
    if mask is not None:
        mask.check_range(T)
        F_v[mask.visual_masked] = encoder.m_v
        F_a[mask.audio_masked] = encoder.m_a
    if dropout_state == "audio_only":
        F_v[:] = 0.0
    elif dropout_state == "visual_only":
        F_a[:] = 0.0
    return visual_obs, audio_obs, np.hstack([F_v, F_a])


def forward(encoder, visual_obs, audio_obs, mask=None, dropout_state="both"):
    """Returns (logits, embeddings), both (T, C).

    embeddings = Z @ W_p.T (final-layer linear response over the context
    window); logits = embeddings + b_p.
    """
    _, _, H = _frontends(encoder, visual_obs, audio_obs, mask, dropout_state)
    Z = _window_stack(H, encoder.context_w)
    embeddings = Z @ encoder.W_p.T
    logits = embeddings + encoder.b_p
    return logits, embeddings


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def masked_nll(logits, targets, mask):
    """Negative log-likelihood of targets over the masked-frame union (a sum)."""
    labels = np.asarray(getattr(targets, "labels", targets), dtype=np.int64)
    union = mask.union
    if union.size == 0:
        raise ValueError("mask union is empty")
    ls = _log_softmax(np.asarray(logits, dtype=np.float64))
    return float(-ls[union, labels[union]].sum())


def grad_masked_nll(encoder, visual_obs, audio_obs, targets, mask,
                    dropout_state="both"):
    """Analytic gradient of masked_nll w.r.t. every encoder weight.

    Returns (loss, grads) with grads keyed by PARAM_FIELDS.
    """
    labels = np.asarray(getattr(targets, "labels", targets), dtype=np.int64)
    union = mask.union
    if union.size == 0:
        raise ValueError("mask union is empty")
    visual_obs, audio_obs, H = _frontends(
        encoder, visual_obs, audio_obs, mask, dropout_state
    )
    T = H.shape[0]
    df = encoder.df
    w = encoder.context_w
    Z = _window_stack(H, w)
    logits = Z @ encoder.W_p.T + encoder.b_p

    ls = _log_softmax(logits)
    loss = float(-ls[union, labels[union]].sum())

    dlogits = np.zeros_like(logits)
    probs = np.exp(ls[union])
    probs[np.arange(union.size), labels[union]] -= 1.0
    dlogits[union] = probs

    grads = {
        "W_p": dlogits.T @ Z,
        "b_p": dlogits.sum(axis=0),
    }

    dZ = dlogits @ encoder.W_p
    if w == 0:
        dH = dZ
    else:
        d = H.shape[1]
        dH = np.zeros_like(H)
        for k in range(2 * w + 1):
            off = k - w
            lo = max(0, -off)
            hi = min(T, T - off)
            if hi > lo:
                dH[lo + off:hi + off] += dZ[lo:hi, k * d:(k + 1) * d]

    dF_v = dH[:, :df].copy()
    dF_a = dH[:, df:].copy()
    if dropout_state == "audio_only":
        dF_v[:] = 0.0
    elif dropout_state == "visual_only":
        dF_a[:] = 0.0

    grads["m_v"] = dF_v[mask.visual_masked].sum(axis=0)
    grads["m_a"] = dF_a[mask.audio_masked].sum(axis=0)
    dF_v[mask.visual_masked] = 0.0
    dF_a[mask.audio_masked] = 0.0

    grads["W_v"] = dF_v.T @ visual_obs
    grads["b_v"] = dF_v.sum(axis=0)
    grads["W_a"] = dF_a.T @ audio_obs
    grads["b_a"] = dF_a.sum(axis=0)
    return loss, grads


def sgd_step(encoder, visual_obs, audio_obs, targets, mask, dropout_state, lr):
    """One in-place gradient-descent update on the mean masked NLL (sum / |M|)."""
    loss, grads = grad_masked_nll(
        encoder, visual_obs, audio_obs, targets, mask, dropout_state
    )
    n = mask.union.size
    for name in PARAM_FIELDS:
        getattr(encoder, name)[...] -= (lr / n) * grads[name]
    return loss / n


def train_encoder(encoder, pairs, targets, lr=0.3, epochs=30, batch_size=1,
                  mask_prob=0.3, span_len=5, dropout_probs=(0.5, 0.25, 0.25),
                  seed=0, log_fn=None):
    """Plain gradient descent over sequences; deterministic given seed.

    pairs: list of (visual_obs, audio_obs); targets: list of per-frame label
    arrays. Updates average the per-sequence mean-NLL gradients over each
    batch. Returns (encoder, loss_history) where loss_history holds the mean
    per-masked-frame NLL per epoch. Raises TrainingDivergedError on NaN loss.
    """
    if not pairs:
        raise ValueError("empty training set")
    if len(targets) != len(pairs):
        raise ValueError("need one target sequence per training pair")
    dropout_probs = np.asarray(dropout_probs, dtype=np.float64)
    if dropout_probs.shape != (3,) or abs(dropout_probs.sum() - 1.0) > 1e-9:
        raise ValueError("dropout_probs must be three probabilities summing to 1")
    rng = as_rng(seed)
    encoder = encoder.copy()
    history = []
    n = len(pairs)
    for epoch in range(epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            acc = None
            for si in batch:
                v, a = pairs[si]
                T = len(v)
                mask = sample_mask(T, mask_prob, span_len, rng)
                state = DROPOUT_STATES[rng.choice(3, p=dropout_probs)]
                loss, grads = grad_masked_nll(encoder, v, a, targets[si], mask, state)
                m = mask.union.size
                losses.append(loss / m)
                if acc is None:
                    acc = {k: g / m for k, g in grads.items()}
                else:
                    for k, g in grads.items():
                        acc[k] += g / m
            scale = lr / len(batch)
            for name in PARAM_FIELDS:
                getattr(encoder, name)[...] -= scale * acc[name]
        epoch_loss = float(np.mean(losses))
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(
                f"loss became non-finite at epoch {epoch + 1} (lr={lr}); "
                "lower the learning rate"
            )
        history.append(epoch_loss)
        if log_fn is not None:
            log_fn(epoch + 1, epoch_loss)
    return encoder, history


def embed(encoder, obs, modality, fps=25.0):
    """Detection embedding for one modality (the other is dropped out, no mask)."""
    obs = as_float_matrix(obs, "obs")
    T = obs.shape[0]
    if modality == "visual":
        _, e = forward(encoder, obs, np.zeros((T, encoder.da)),
                       dropout_state="visual_only")
    elif modality == "audio":
        _, e = forward(encoder, np.zeros((T, encoder.dv)), obs,
                       dropout_state="audio_only")
    else:
        raise ValueError(f"modality must be 'visual' or 'audio', got {modality!r}")
    return EmbeddingSequence(modality=modality, data=e, fps=fps)


def fused_features(encoder, visual_obs, audio_obs):
    """(T, 2*df) fused frontend features, no masking or dropout (for cluster refinement)."""
    _, _, H = _frontends(encoder, visual_obs, audio_obs, None, "both")
    return H


class MaskedPredictionEncoder(BaseEstimator):
    """sklearn-style wrapper: fit on (visual, audio) pairs with cluster targets,
    then embed either modality into the shared cluster-logit space."""

    def __init__(self, context_window=5, n_clusters=100, frontend_dim=16,
                 lr=0.3, epochs=30, batch_size=1, mask_prob=0.3, span_len=5,
                 dropout_both=0.5, dropout_audio_only=0.25,
                 dropout_visual_only=0.25, random_state=0):
        self.context_window = context_window
        self.n_clusters = n_clusters
        self.frontend_dim = frontend_dim
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.mask_prob = mask_prob
        self.span_len = span_len
        self.dropout_both = dropout_both
        self.dropout_audio_only = dropout_audio_only
        self.dropout_visual_only = dropout_visual_only
        self.random_state = random_state

    def fit(self, X, y):
        """X: list of (visual_obs, audio_obs); y: list of per-frame targets."""
        if y is None:
            raise ValueError("targets are required (precompute with cluster_targets)")
        pairs = [(as_float_matrix(v, "visual"), as_float_matrix(a, "audio"))
                 for v, a in X]
        targets = [np.asarray(getattr(t, "labels", t), dtype=np.int64) for t in y]
        dv = pairs[0][0].shape[1]
        da = pairs[0][1].shape[1]
        enc = init_encoder(dv, da, self.frontend_dim, self.n_clusters,
                           self.context_window, seed=self.random_state)
        enc, history = train_encoder(
            enc, pairs, targets, lr=self.lr, epochs=self.epochs,
            batch_size=self.batch_size, mask_prob=self.mask_prob,
            span_len=self.span_len,
            dropout_probs=(self.dropout_both, self.dropout_audio_only,
                           self.dropout_visual_only),
            seed=self.random_state,
        )
        self.model_ = enc
        self.loss_history_ = history
        return self

    def embed(self, obs, modality, fps=25.0):
        check_fitted(self, "model_")
        return embed(self.model_, obs, modality, fps=fps)

    def transform(self, X):
        """List of (visual, audio) pairs -> list of (visual, audio) embedding pairs."""
        check_fitted(self, "model_")
        return [(self.embed(v, "visual"), self.embed(a, "audio")) for v, a in X]


def fit_encoder_with_refinement(pairs, n_clusters=100, rounds=2,
                                context_window=5, random_state=0, **fit_kwargs):
    """Iterative target refinement: round 0 clusters audio features, later
    rounds re-cluster the fused features of the previously trained encoder
    and retrain on the new targets.

    Returns (estimator, codebook) for the final round.
    """
    from .cluster import assign, kmeans_fit

    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    audio_stack = np.vstack([a for _, a in pairs])
    codebook = kmeans_fit(audio_stack, n_clusters, seed=random_state,
                          feature_source="mfcc", iteration=0)
    est = None
    for r in range(rounds):
        if r > 0:
            fused = np.vstack([fused_features(est.model_, v, a) for v, a in pairs])
            codebook = kmeans_fit(fused, n_clusters, seed=random_state + r,
                                  feature_source="learned", iteration=r)
        feats = audio_stack if r == 0 else fused
        offsets = np.cumsum([0] + [len(v) for v, _ in pairs])
        all_labels = assign(codebook, feats).labels
        targets = [all_labels[offsets[i]:offsets[i + 1]] for i in range(len(pairs))]
        est = MaskedPredictionEncoder(
            context_window=context_window, n_clusters=n_clusters,
            random_state=random_state + 1000 * r, **fit_kwargs,
        )
        est.fit(pairs, targets)
    return est, codebook


def write_encoder(encoder, dest):
    header = _ENC_HEADER.pack(
        ENCODER_MAGIC, ENCODER_VERSION,
        encoder.dv, encoder.da, encoder.df, encoder.n_clusters, encoder.context_w,
    )
    with open(dest, "wb") as fh:
        fh.write(header)
        for name in PARAM_FIELDS:
            fh.write(getattr(encoder, name).astype("<f8").tobytes())


def read_encoder(src):
    from .io import BadMagicError, TruncatedFileError, UnsupportedVersionError

    with open(src, "rb") as fh:
        raw = fh.read()
    if len(raw) < _ENC_HEADER.size:
        raise TruncatedFileError(f"{src}: file shorter than encoder header")
    magic, version, dv, da, df, C, w = _ENC_HEADER.unpack_from(raw, 0)
    if magic != ENCODER_MAGIC:
        raise BadMagicError(f"{src}: bad magic {magic!r}")
    if version != ENCODER_VERSION:
        raise UnsupportedVersionError(f"{src}: unsupported encoder version {version}")
    shapes = {
        "W_v": (df, dv), "b_v": (df,), "W_a": (df, da), "b_a": (df,),
        "m_v": (df,), "m_a": (df,),
        "W_p": (C, (2 * w + 1) * 2 * df), "b_p": (C,),
    }
    offset = _ENC_HEADER.size
    arrays = {}
    for name in PARAM_FIELDS:
        count = int(np.prod(shapes[name]))
        end = offset + count * 8
        if len(raw) < end:
            raise TruncatedFileError(f"{src}: truncated encoder payload at {name}")
        arrays[name] = np.frombuffer(raw[offset:end], dtype="<f8").reshape(
            shapes[name]).copy()
        offset = end
    return ToyEncoder(context_w=w, **arrays)
