"""On-disk formats: AVSF embedding files, WAV input, JSONL manifests, CSV reports.

AVSF layout (little-endian):
    magic ``AVSF`` | version u32 = 1 | modality u8 (0 visual, 1 audio, 2 fused)
    | 3 reserved zero bytes | dim u32 | frames u64 | fps f32
    | payload frames x dim f32, frame-major.

Payload is float32 on disk, widened to float64 in memory.
"""

import csv
import json
import struct
import wave
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"AVSF"
VERSION = 1
_HEADER = struct.Struct("<4sIB3xIQf")

MODALITIES = ("visual", "audio", "fused")
_MODALITY_CODE = {m: i for i, m in enumerate(MODALITIES)}

LABELS = ("real", "fake")


class AvsfError(ValueError):
    """Base class for file-format errors."""


class BadMagicError(AvsfError):
    pass


class UnsupportedVersionError(AvsfError):
    pass


class TruncatedFileError(AvsfError):
    pass


class NonFiniteDataError(AvsfError):
    pass


class WavFormatError(AvsfError):
    pass


class ManifestError(AvsfError):
    pass


@dataclass
class EmbeddingSequence:
    """Time-major matrix of per-frame speech representations for one modality."""

    modality: str
    data: np.ndarray  # (frames, dim) float64
    fps: float = 25.0

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        self.data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if self.data.ndim != 2:
            raise ValueError("data must be a 2-D (frames, dim) matrix")
        if self.frames < 1 or self.dim < 1:
            raise ValueError("frames and dim must both be >= 1")

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]

    def validate(self):
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteDataError("embedding data contains non-finite values")
        return self


@dataclass
class AudioWaveform:
    sample_rate: int
    samples: np.ndarray  # float64 in [-1, 1]

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass
class ManifestEntry:
    id: str
    label: str
    category: str
    visual_path: str
    audio_path: str


@dataclass
class Manifest:
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def write_embeddings(seq, dest):
    """Serialize an EmbeddingSequence; rejects non-finite data before writing."""
    seq.validate()
    payload = seq.data.astype("<f4").tobytes()
    header = _HEADER.pack(
        MAGIC, VERSION, _MODALITY_CODE[seq.modality], seq.dim, seq.frames, seq.fps
    )
    with open(dest, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_embeddings(src):
    """Parse an AVSF file, checking magic, version, payload size and finiteness."""
    with open(src, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{src}: file shorter than the {_HEADER.size}-byte header")
    magic, version, mod_code, dim, frames, fps = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{src}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"{src}: unsupported version {version}")
    if mod_code >= len(MODALITIES):
        raise AvsfError(f"{src}: unknown modality code {mod_code}")
    if dim < 1 or frames < 1:
        raise AvsfError(f"{src}: invalid shape frames={frames} dim={dim}")
    expected = frames * dim * 4
    body = raw[_HEADER.size:]
    if len(body) < expected:
        raise TruncatedFileError(
            f"{src}: truncated payload, expected {expected} bytes, got {len(body)}"
        )
    data = np.frombuffer(body[:expected], dtype="<f4").astype(np.float64)
    data = data.reshape(frames, dim)
    if not np.all(np.isfinite(data)):
        raise NonFiniteDataError(f"{src}: payload contains non-finite values")
    return EmbeddingSequence(modality=MODALITIES[mod_code], data=data, fps=float(fps))


def read_wav(src):
    """Read a 16-bit PCM mono WAV; samples scaled to [-1, 1] by dividing by 32768."""
    try:
        with wave.open(str(src), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise WavFormatError(f"{src}: compressed WAV not supported")
            if wf.getnchannels() != 1:
                raise WavFormatError(f"{src}: expected mono, got {wf.getnchannels()} channels")
            if wf.getsampwidth() != 2:
                raise WavFormatError(
                    f"{src}: expected 16-bit samples, got {8 * wf.getsampwidth()}-bit"
                )
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise WavFormatError(f"{src}: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioWaveform(sample_rate=rate, samples=samples)


def write_wav(wave_data, dest):
    """Write an AudioWaveform as 16-bit PCM mono (inverse of read_wav scaling)."""
    pcm = np.clip(np.round(wave_data.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(dest), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(wave_data.sample_rate)
        wf.writeframes(pcm.tobytes())


_MANIFEST_FIELDS = ("id", "label", "category", "visual_path", "audio_path")


def load_manifest(src):
    """Load a JSON-Lines manifest; ids must be unique, labels lowercase exact."""
    entries = []
    seen = set()
    with open(src, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{src}:{lineno}: invalid JSON: {exc}") from exc
            missing = [f for f in _MANIFEST_FIELDS if f not in obj]
            if missing:
                raise ManifestError(f"{src}:{lineno}: missing field(s) {missing}")
            if obj["label"] not in LABELS:
                raise ManifestError(
                    f"{src}:{lineno}: unknown label {obj['label']!r} (must be 'real' or 'fake')"
                )
            if obj["id"] in seen:
                raise ManifestError(f"{src}:{lineno}: duplicate id {obj['id']!r}")
            seen.add(obj["id"])
            entries.append(ManifestEntry(**{f: obj[f] for f in _MANIFEST_FIELDS}))
    return Manifest(entries=entries)


def save_manifest(manifest, dest):
    with open(dest, "w", encoding="utf-8") as fh:
        for e in manifest:
            fh.write(json.dumps({
                "id": e.id, "label": e.label, "category": e.category,
                "visual_path": e.visual_path, "audio_path": e.audio_path,
            }) + "\n")


REPORT_COLUMNS = ("id", "score", "offset", "label", "category")


def write_report(results, dest):
    """Write per-video scores as CSV, columns exactly id,score,offset,label,category.

    ``results`` is an iterable of objects with those attributes; offset may be
    None (fixed-offset alignment fills it, plain/DTW leave it empty).
    """
    with open(dest, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in results:
            offset = "" if r.offset is None else r.offset
            writer.writerow([r.id, round(r.score, 12), offset, r.label, r.category])
