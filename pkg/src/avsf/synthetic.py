"""Hidden-Markov "speech world": paired audio/visual streams plus forgeries.

States play the role of phonemes; a surjective state->viseme map with classes
of size >= 2 encodes homophene ambiguity: a lone visual frame reveals only
the viseme class, never which class member produced it. Audio means add a
unit per-state offset to the shared class centers, so the audio stream
identifies states and the two observation streams are aligned in one space:
raw observations can stand in for already-aligned embeddings (oracle mode).

Within-class information travels across frames through coarticulation
trails: each visual frame carries a vector identifying the previous state
(see make_world). Real streams chain these consistently; per-frame
re-rendering (lip-sync forgery) breaks the chaining without changing any
single frame's plausibility.

Categories:
  real           -- both streams emitted from one state path;
  swap           -- visual re-emitted from an independent path (fake);
  lipsync        -- visual re-emitted per frame from a random state of the
                    same viseme class: frame-locally plausible but
                    transition-inconsistent (fake);
  offset_fixed   -- real content, audio shifted by a constant delta;
  offset_dynamic -- real content, piecewise-constant audio shifts.

Offset categories keep the label "real": the content matches, only the
alignment is degraded (offsets occur in real recordings too).
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .io import EmbeddingSequence, Manifest, ManifestEntry, save_manifest, write_embeddings
from .validation import as_rng

CATEGORIES = ("real", "swap", "lipsync", "offset_fixed", "offset_dynamic")
CATEGORY_LABELS = {
    "real": "real",
    "swap": "fake",
    "lipsync": "fake",
    "offset_fixed": "real",
    "offset_dynamic": "real",
}
OFFSET_RANGE = (5, 12)  # |delta| drawn uniformly from this closed range
DYNAMIC_SEGMENT = 50  # frames per constant-offset segment


@dataclass
class SyntheticWorld:
    transition: np.ndarray  # (K, K) row-stochastic
    viseme_map: np.ndarray  # (K,) ints in [0, V)
    audio_means: np.ndarray  # (K, da)
    visual_means: np.ndarray  # (K, dv)
    coart: np.ndarray  # (K, K, dv) coarticulation appearance per state bigram
    sigma_a: float = 0.3
    sigma_v: float = 0.3
    seed: int = 7

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=np.float64)
        self.viseme_map = np.asarray(self.viseme_map, dtype=np.int64)
        self.audio_means = np.asarray(self.audio_means, dtype=np.float64)
        self.visual_means = np.asarray(self.visual_means, dtype=np.float64)
        self.coart = np.asarray(self.coart, dtype=np.float64)

    @property
    def n_states(self):
        return self.transition.shape[0]

    @property
    def n_visemes(self):
        return int(self.viseme_map.max()) + 1

    @property
    def da(self):
        return self.audio_means.shape[1]

    @property
    def dv(self):
        return self.visual_means.shape[1]

    def viseme_members(self, viseme):
        return np.flatnonzero(self.viseme_map == viseme)

    def validate(self):
        K = self.n_states
        rows = self.transition.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-9):
            raise ValueError("transition rows must sum to 1 within 1e-9")
        if np.any(self.transition < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if self.coart.shape != (K, K, self.dv):
            raise ValueError("coart must be a (K, K, dv) table")
        counts = np.bincount(self.viseme_map, minlength=self.n_visemes)
        if np.any(counts < 2):
            raise ValueError("every viseme class needs >= 2 states")
        for means, name in ((self.audio_means, "audio"), (self.visual_means, "visual")):
            if means.shape[0] != K:
                raise ValueError(f"{name} means must have one row per state")
        diff = self.audio_means[:, None, :] - self.audio_means[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        if dist.min() <= 0:
            raise ValueError("audio emission means must be pairwise distinct")
        # visual means may coincide within a viseme class (homophenes); they
        # must be distinct across classes
        diff = self.visual_means[:, None, :] - self.visual_means[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        cross = self.viseme_map[:, None] != self.viseme_map[None, :]
        if cross.any() and dist[cross].min() <= 0:
            raise ValueError("visual emission means must differ across viseme classes")
        return self


def stationary_distribution(transition):
    vals, vecs = np.linalg.eig(transition.T)
    pi = np.real(vecs[:, np.argmax(np.real(vals))])
    return np.abs(pi) / np.abs(pi).sum()


def make_world(n_states=20, n_visemes=7, obs_dim=8, sigma_a=0.3, sigma_v=0.3,
               seed=7, p_stay=0.0, viseme_spread=0.0, audio_spread=1.0,
               coart_scale=0.8):
    """Build the default world.

    Geometry: orthonormal viseme class centers shared by both modalities;
    audio means add a unit per-state offset (audio identifies states), visual
    means add only a viseme_spread-scaled offset (default 0: a lone visual
    frame reveals just the viseme - homophene ambiguity).

    Coarticulation trails carry the within-class information across frames:
    the visual frame at time t includes coart[prev, cur] = coart_scale *
    trail(prev), a vector identifying the PREVIOUS state. The visual means
    absorb the chain-conditional expectation of the trail, so the marginal
    frame distribution given the current state is identical for every state
    of a viseme class: a single frame (even paired with its audio frame)
    carries no usable evidence about which class member produced it, while
    adjacent frames plus audio context pin it down. Lip-sync forgeries
    re-render frames independently, so their trails are transition-
    inconsistent - exactly the signal a frame-local detector cannot see.
    """
    if n_states < 2 * n_visemes:
        raise ValueError("need n_states >= 2 * n_visemes so every class has >= 2 states")
    if n_visemes > obs_dim:
        raise ValueError("need n_visemes <= obs_dim for orthonormal class centers")
    if not 0.0 <= p_stay < 1.0:
        raise ValueError("p_stay must lie in [0, 1)")
    rng = as_rng(seed)

    # self-loop weight plus a uniform spread over the other states: ergodic,
    # uniform stationary distribution, high predecessor entropy
    transition = np.full((n_states, n_states), (1.0 - p_stay) / (n_states - 1))
    np.fill_diagonal(transition, p_stay)
    transition /= transition.sum(axis=1, keepdims=True)

    perm = rng.permutation(n_states)
    viseme_map = np.empty(n_states, dtype=np.int64)
    splits = np.array_split(perm, n_visemes)
    for viseme, members in enumerate(splits):
        viseme_map[members] = viseme

    centers, _ = np.linalg.qr(rng.normal(size=(obs_dim, obs_dim)))
    centers = centers.T[:n_visemes]  # (V, obs_dim) orthonormal rows

    def unit_rows(n):
        v = rng.normal(size=(n, obs_dim))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    offsets = unit_rows(n_states)
    audio_means = centers[viseme_map] + audio_spread * offsets
    visual_means = centers[viseme_map] + viseme_spread * offsets

    trails = unit_rows(n_states)
    coart = np.broadcast_to(
        coart_scale * trails[:, None, :], (n_states, n_states, obs_dim)
    ).copy()
    # absorb the chain-conditional trail expectation into the visual means so
    # E[frame | current state] is constant within each viseme class
    pi = stationary_distribution(transition)
    for b in range(n_states):
        w = pi * transition[:, b]
        w /= w.sum()
        visual_means[b] -= (w[:, None] * coart[:, b, :]).sum(axis=0)

    return SyntheticWorld(
        transition=transition, viseme_map=viseme_map,
        audio_means=audio_means, visual_means=visual_means, coart=coart,
        sigma_a=sigma_a, sigma_v=sigma_v, seed=seed,
    ).validate()


def world_to_json(world, dest):
    doc = {
        "transition": world.transition.tolist(),
        "viseme_map": world.viseme_map.tolist(),
        "audio_means": world.audio_means.tolist(),
        "visual_means": world.visual_means.tolist(),
        "coart": world.coart.tolist(),
        "sigma_a": world.sigma_a,
        "sigma_v": world.sigma_v,
        "seed": world.seed,
    }
    with open(dest, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def world_from_json(src):
    with open(src, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return SyntheticWorld(**doc).validate()


@dataclass
class SyntheticVideo:
    id: str
    state_path: np.ndarray  # length-T content path (the audio's path)
    visual_obs: np.ndarray  # (T, dv)
    audio_obs: np.ndarray  # (T, da)
    label: str
    category: str
    visual_state_path: Optional[np.ndarray] = None  # per-frame emitting states
    injected_offsets: Optional[list] = None  # (start_frame, delta) segments

    def __post_init__(self):
        if self.visual_state_path is None:
            self.visual_state_path = self.state_path


def _sample_path(world, T, rng):
    path = np.empty(T, dtype=np.int64)
    path[0] = rng.integers(world.n_states)
    for t in range(1, T):
        path[t] = rng.choice(world.n_states, p=world.transition[path[t - 1]])
    return path


def _emit_audio(world, path, rng):
    obs = world.audio_means[path].copy()
    if world.sigma_a > 0:
        obs += world.sigma_a * rng.standard_normal(obs.shape)
    return obs


def _emit_visual(world, path, rng):
    """Per-state mean plus the coarticulation vector of each state bigram."""
    obs = world.visual_means[path].copy()
    if len(path) > 1:
        obs[1:] += world.coart[path[:-1], path[1:]]
    if world.sigma_v > 0:
        obs += world.sigma_v * rng.standard_normal(obs.shape)
    return obs


def gen_real(world, T, n, seed=None):
    """n real videos of length T; deterministic given seed (defaults to world.seed)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    world.validate()
    seed = world.seed if seed is None else seed
    children = np.random.SeedSequence([seed, 0]).spawn(n)
    videos = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        path = _sample_path(world, T, rng)
        audio = _emit_audio(world, path, rng)
        visual = _emit_visual(world, path, rng)
        videos.append(SyntheticVideo(
            id=f"real_{i:04d}", state_path=path, visual_obs=visual,
            audio_obs=audio, label="real", category="real",
        ))
    return videos


def _shift_zero_pad(stream, delta):
    out = np.zeros_like(stream)
    T = stream.shape[0]
    lo = max(0, delta)
    hi = min(T, T + delta)
    out[lo:hi] = stream[lo - delta:hi - delta]
    return out


def gen_forgery(world, real_video, kind, seed=0):
    """Derive one forgery/variant from a real video; never mutates the input."""
    if kind not in CATEGORIES or kind == "real":
        raise ValueError(f"unknown forgery kind {kind!r}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, CATEGORIES.index(kind)]))
    path = real_video.state_path
    T = len(path)
    vid = SyntheticVideo(
        id=f"{kind}_{real_video.id.split('_')[-1]}",
        state_path=path.copy(),
        visual_obs=real_video.visual_obs.copy(),
        audio_obs=real_video.audio_obs.copy(),
        label=CATEGORY_LABELS[kind],
        category=kind,
    )
    if kind == "swap":
        new_path = _sample_path(world, T, rng)
        vid.visual_obs = _emit_visual(world, new_path, rng)
        vid.visual_state_path = new_path
    elif kind == "lipsync":
        # each frame independently re-rendered from a random state of the
        # true frame's viseme class; the resampled sequence's bigrams are
        # therefore transition-inconsistent while every frame stays plausible
        resampled = np.empty(T, dtype=np.int64)
        for t in range(T):
            members = world.viseme_members(world.viseme_map[path[t]])
            resampled[t] = members[rng.integers(len(members))]
        vid.visual_obs = _emit_visual(world, resampled, rng)
        vid.visual_state_path = resampled
    elif kind == "offset_fixed":
        mag = int(rng.integers(OFFSET_RANGE[0], OFFSET_RANGE[1] + 1))
        delta = mag if rng.random() < 0.5 else -mag
        vid.audio_obs = _shift_zero_pad(real_video.audio_obs, delta)
        vid.injected_offsets = [(0, delta)]
    else:  # offset_dynamic
        shifted = np.zeros_like(real_video.audio_obs)
        segments = []
        for start in range(0, T, DYNAMIC_SEGMENT):
            mag = int(rng.integers(OFFSET_RANGE[0], OFFSET_RANGE[1] + 1))
            delta = mag if rng.random() < 0.5 else -mag
            segments.append((start, delta))
            end = min(start + DYNAMIC_SEGMENT, T)
            for t in range(start, end):
                src = t - delta
                if 0 <= src < T:
                    shifted[t] = real_video.audio_obs[src]
        vid.audio_obs = shifted
        vid.injected_offsets = segments
    return vid


def _derived_sources(world, T, n, kind, seed):
    """Fresh real source videos for a forgery category (disjoint seed stream)."""
    videos = gen_real(world, T, n, seed=seed + 1000 * (CATEGORIES.index(kind)))
    return videos


def build_benchmark(world, sizes, out_dir, T=400, seed=None, encoder=None,
                    fps=25.0):
    """Write AVSF streams plus a JSONL manifest; reproducible from seed.

    In oracle mode (encoder=None) the observation streams are written as
    embeddings; with an encoder they are passed through its embed() first.
    Returns the Manifest (paths relative to out_dir).
    """
    from .encoder import embed as encode

    world.validate()
    seed = world.seed if seed is None else seed
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for cat_idx, cat in enumerate(CATEGORIES):
        n = int(sizes.get(cat, 0))
        if n == 0:
            continue
        if cat == "real":
            videos = gen_real(world, T, n, seed=seed)
        else:
            sources = _derived_sources(world, T, n, cat, seed)
            videos = [
                gen_forgery(world, src, cat, seed=seed + 7919 * cat_idx + i)
                for i, src in enumerate(sources)
            ]
        for i, vid in enumerate(videos):
            vid_id = f"{cat}_{i:04d}"
            visual_rel = f"{vid_id}.visual.avsf"
            audio_rel = f"{vid_id}.audio.avsf"
            if encoder is None:
                visual_seq = EmbeddingSequence("visual", vid.visual_obs, fps=fps)
                audio_seq = EmbeddingSequence("audio", vid.audio_obs, fps=fps)
            else:
                visual_seq = encode(encoder, vid.visual_obs, "visual", fps=fps)
                audio_seq = encode(encoder, vid.audio_obs, "audio", fps=fps)
            write_embeddings(visual_seq, out_dir / visual_rel)
            write_embeddings(audio_seq, out_dir / audio_rel)
            entries.append(ManifestEntry(
                id=vid_id, label=vid.label, category=cat,
                visual_path=visual_rel, audio_path=audio_rel,
            ))
    manifest = Manifest(entries=entries)
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest
