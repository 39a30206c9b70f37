"""Video-level evaluation: ROC-AUC, per-category tables, score histograms,
clip-length/window sweeps and embedding-noise robustness sweeps.

Real videos are the positive class (higher score = more likely real); AUC is
the probability that a random real video outscores a random fake one, ties
counted 1/2 (Mann-Whitney).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .alignment import AlignmentConfig, score_sequences
from .io import Manifest, load_manifest, read_embeddings


@dataclass
class ScoredVideo:
    id: str
    score: float
    label: str
    category: str
    offset: Optional[int] = None


@dataclass
class EvalReport:
    auc_overall: float
    auc_by_category: dict
    n_real: int
    n_fake: int
    histogram: dict  # {"edges": [...], "real": [...], "fake": [...]}
    scored: list = field(default_factory=list)
    sweep_results: Optional[dict] = None
    skipped: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "auc_overall": self.auc_overall,
            "auc_by_category": self.auc_by_category,
            "n_real": self.n_real,
            "n_fake": self.n_fake,
            "histogram": self.histogram,
            "sweep_results": self.sweep_results,
            "skipped": self.skipped,
            "meta": self.meta,
        }


def _average_ranks(values):
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    return ranks


def auc(scored):
    """Mann-Whitney AUC of real-vs-fake scores, ties counted 1/2, O(n log n)."""
    scores = np.asarray([s.score for s in scored], dtype=np.float64)
    is_real = np.asarray([s.label == "real" for s in scored])
    n_real = int(is_real.sum())
    n_fake = int(len(scored) - n_real)
    if n_real == 0 or n_fake == 0:
        raise ValueError("AUC needs at least one real and one fake video")
    ranks = _average_ranks(scores)
    u = ranks[is_real].sum() - n_real * (n_real + 1) / 2.0
    return float(u / (n_real * n_fake))


def auc_pairwise(scored):
    """O(n^2) pairwise counting oracle for auc()."""
    reals = [s.score for s in scored if s.label == "real"]
    fakes = [s.score for s in scored if s.label != "real"]
    if not reals or not fakes:
        raise ValueError("AUC needs at least one real and one fake video")
    wins = 0.0
    for r in reals:
        for f in fakes:
            if r > f:
                wins += 1.0
            elif r == f:
                wins += 0.5
    return wins / (len(reals) * len(fakes))


def classify(scored, threshold=0.3):
    """Predict real iff score >= threshold (default from the score-distribution gap)."""
    return [
        {"id": s.id, "predicted_label": "real" if s.score >= threshold else "fake"}
        for s in scored
    ]


def calibrate_threshold(real_scores, target_fpr):
    """Lower empirical quantile of real-only scores: order statistic at
    ceil(q * n). A real video scoring below the threshold is a false positive."""
    scores = sorted(float(s) for s in real_scores)
    if not scores:
        raise ValueError("need at least one real score")
    if not 0.0 < target_fpr < 1.0:
        raise ValueError("target_fpr must lie strictly between 0 and 1")
    k = max(1, math.ceil(target_fpr * len(scores)))
    return scores[k - 1]


def _histogram(scored, bins):
    edges = np.linspace(-1.0, 1.0, bins + 1)
    out = {"edges": edges.tolist()}
    for label in ("real", "fake"):
        vals = [s.score for s in scored if s.label == label]
        counts, _ = np.histogram(np.clip(vals, -1.0, 1.0), bins=edges)
        out[label] = counts.astype(int).tolist()
    return out


def histogram_overlap(histogram):
    """Overlapping probability mass of the per-label normalized histograms."""
    real = np.asarray(histogram["real"], dtype=np.float64)
    fake = np.asarray(histogram["fake"], dtype=np.float64)
    if real.sum() == 0 or fake.sum() == 0:
        return 0.0
    return float(np.minimum(real / real.sum(), fake / fake.sum()).sum())


def _resolve_manifest(manifest):
    if isinstance(manifest, Manifest):
        return manifest, Path(".")
    path = Path(manifest)
    return load_manifest(path), path.parent


def _load_pair(entry, base_dir):
    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base_dir / p

    ev = read_embeddings(resolve(entry.visual_path))
    ea = read_embeddings(resolve(entry.audio_path))
    return ev, ea


def _clip_frames(data, clip_seconds, fps):
    if clip_seconds is None:
        return data
    return data[: max(1, int(clip_seconds * fps))]


def _score_entry(entry, base_dir, config, clip_seconds, noise=None):
    ev, ea = _load_pair(entry, base_dir)
    fps = ev.fps or 25.0
    v = _clip_frames(ev.data, clip_seconds, fps)
    a = _clip_frames(ea.data, clip_seconds, fps)
    if noise is not None:
        v = v + noise[: v.shape[0]]
    result = score_sequences(v, a, config)
    return ScoredVideo(
        id=entry.id, score=result.score, label=entry.label,
        category=entry.category, offset=result.best_offset,
    )


def score_manifest(manifest, config, clip_seconds=None, threads=1,
                   noise_sigma=0.0, noise_seed=0, noise_level_index=0):
    """Score every manifest entry; returns (scored, skipped).

    Optional Gaussian noise (noise_sigma) is added to the visual embeddings,
    seeded per entry so results are independent of thread count and order.
    """
    mf, base_dir = _resolve_manifest(manifest)

    def work(item):
        idx, entry = item
        noise = None
        if noise_sigma > 0.0:
            ev, _ = _load_pair(entry, base_dir)
            rng = np.random.default_rng(
                np.random.SeedSequence([noise_seed, noise_level_index, idx])
            )
            noise = noise_sigma * rng.standard_normal(ev.data.shape)
        try:
            return _score_entry(entry, base_dir, config, clip_seconds, noise), None
        except (OSError, ValueError) as exc:
            return None, {"id": entry.id, "error": str(exc)}

    items = list(enumerate(mf.entries))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, items))
    else:
        outcomes = [work(item) for item in items]

    scored = [s for s, _ in outcomes if s is not None]
    skipped = [e for _, e in outcomes if e is not None]
    return scored, skipped


def evaluate(manifest, config=None, clip_seconds=None, hist_bins=50, threads=1,
             sweep=None):
    """Full evaluation report; per-category AUC pits one fake category against
    all real videos. sweep in {None, "tau", "clip"} adds a parameter sweep."""
    config = config or AlignmentConfig()
    scored, skipped = score_manifest(manifest, config, clip_seconds, threads)
    report = build_report(scored, hist_bins=hist_bins)
    report.skipped = skipped
    report.meta = {
        "alignment": config.mode,
        "tau": config.tau,
        "dtw_band": config.dtw_band,
        "dtw_normalization": "one-minus-mean-path-cost",
        "clip_seconds": clip_seconds,
    }
    if sweep == "tau":
        report.sweep_results = {}
        for tau in range(0, 16):
            cfg = AlignmentConfig(mode="fixed_offset", tau=tau, dtw_band=config.dtw_band)
            s, _ = score_manifest(manifest, cfg, clip_seconds, threads)
            report.sweep_results[str(tau)] = auc(s)
    elif sweep == "clip":
        report.sweep_results = {}
        for seconds in range(1, 21):
            s, _ = score_manifest(manifest, config, seconds, threads)
            report.sweep_results[str(seconds)] = auc(s)
    elif sweep is not None:
        raise ValueError("sweep must be 'tau' or 'clip'")
    return report


def build_report(scored, hist_bins=50):
    labels = {s.label for s in scored}
    if not {"real", "fake"} <= labels:
        raise ValueError("evaluation needs both real and fake videos")
    reals = [s for s in scored if s.label == "real"]
    by_cat = {}
    for cat in sorted({s.category for s in scored}):
        cat_fakes = [s for s in scored if s.category == cat and s.label == "fake"]
        if cat_fakes:
            by_cat[cat] = auc(reals + cat_fakes)
    return EvalReport(
        auc_overall=auc(scored),
        auc_by_category=by_cat,
        n_real=len(reals),
        n_fake=len(scored) - len(reals),
        histogram=_histogram(scored, hist_bins),
        scored=scored,
    )


def robustness_sweep(manifest, noise_levels, seed=0, config=None, threads=1,
                     hist_bins=50):
    """AUC per noise level; Gaussian noise on visual embeddings only.

    Returns {sigma: auc}; deterministic given seed regardless of threads.
    """
    config = config or AlignmentConfig()
    results = {}
    for level_index, sigma in enumerate(noise_levels):
        scored, skipped = score_manifest(
            manifest, config, threads=threads,
            noise_sigma=float(sigma), noise_seed=seed,
            noise_level_index=level_index,
        )
        if skipped:
            raise ValueError(f"robustness sweep skipped entries: {skipped}")
        results[float(sigma)] = auc(scored)
    return results
