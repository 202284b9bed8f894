"""Audio ingestion and the MFCC front end.

Everything runs at 16 kHz mono. Features are 40 cepstra from 40 mel
filters; frame ``i`` is stamped at ``start_offset + i * hop`` and owns the
hop-length interval centred on its analysis window, so consecutive frames
tile the timeline without gaps.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from math import gcd

import numpy as np
from scipy.fft import dct
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import AudioError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TARGET_RATE = 16000
NUM_CEPS = 40


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray  # float64, mono, in [-1, 1]
    sample_rate: int
    channel_count: int = 1

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise AudioError(f"sample rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 1:
            raise AudioError("AudioBuffer holds mono samples only")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return np.clip(data.astype(np.float64), -1.0, 1.0)
    raise AudioError(f"unsupported sample type {data.dtype}")


def resample(samples: np.ndarray, orig_rate: int, target_rate: int = TARGET_RATE) -> np.ndarray:
    if orig_rate == target_rate:
        return samples
    g = gcd(orig_rate, target_rate)
    return resample_poly(samples, target_rate // g, orig_rate // g)


def load_audio(path: str | os.PathLike, target_rate: int = TARGET_RATE) -> AudioBuffer:
    """Read a PCM/float WAV file as mono float samples at ``target_rate``."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"audio file not found: {path}")
    try:
        rate, data = wavfile.read(path)
    except OSError:
        raise
    except Exception as exc:  # scipy raises assorted types on malformed headers
        raise AudioError(f"{path}: unreadable or unsupported WAV ({exc!r})") from exc
    x = _to_float(np.asarray(data))
    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.size == 0:
        raise AudioError(f"{path}: zero-length audio")
    x = resample(x, int(rate), target_rate)
    return AudioBuffer(np.clip(x, -1.0, 1.0), target_rate)


def write_wav(path: str | os.PathLike, samples: np.ndarray, sample_rate: int = TARGET_RATE) -> None:
    """Write 16-bit PCM. Samples outside [-1, 1] are clipped."""
    pcm = np.round(np.clip(samples, -1.0, 1.0) * 32767.0).astype(np.int16)
    wavfile.write(path, sample_rate, pcm)


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = TARGET_RATE
    window_ms: float = 25.0
    hop_ms: float = 10.0
    num_ceps: int = NUM_CEPS
    num_filters: int = 40
    preemphasis: float = 0.97
    low_freq: float = 20.0
    high_freq: float = 0.0  # 0 means Nyquist
    dither: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_ceps != NUM_CEPS:
            raise ValueError(f"num_ceps must be {NUM_CEPS}")
        if self.num_filters < self.num_ceps:
            raise ValueError("num_filters must be >= num_ceps")
        if self.hop_ms <= 0 or self.window_ms < self.hop_ms:
            raise ValueError("need 0 < hop_ms <= window_ms")

    @property
    def window_samples(self) -> int:
        return int(round(self.window_ms * self.sample_rate / 1000.0))

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_ms * self.sample_rate / 1000.0))

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_feature_config(path: str | os.PathLike) -> FeatureConfig:
    """Read ``window_ms``/``hop_ms``/``num_ceps``/``dither``... from a TOML file.

    Keys may sit at top level or under a ``[features]`` table.
    ``dither = false`` is accepted and means 0.
    """
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    doc = doc.get("features", doc)
    return feature_config_from_dict(doc)


def feature_config_from_dict(doc: dict) -> FeatureConfig:
    known = {f.name for f in fields(FeatureConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown feature config keys: {sorted(unknown)}")
    doc = dict(doc)
    if isinstance(doc.get("dither"), bool):
        doc["dither"] = 1.0 if doc["dither"] else 0.0
    return FeatureConfig(**doc)


@dataclass(frozen=True)
class FeatureMatrix:
    frames: np.ndarray
    frame_hop: float
    frame_length: float
    start_offset: float = 0.0
    fingerprint: str = field(default="", compare=False)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != NUM_CEPS:
            raise ValueError(f"frames must be (n, {NUM_CEPS}), got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("non-finite feature values")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def frame_time(self, i: int | np.ndarray):
        return self.start_offset + np.asarray(i) * self.frame_hop

    def frame_range(self, start: float, end: float) -> tuple[int, int]:
        """Half-open range of frames whose owned interval is centred inside [start, end)."""
        lo = int(np.ceil((start - self.start_offset) / self.frame_hop - 0.5 - 1e-9))
        hi = int(np.ceil((end - self.start_offset) / self.frame_hop - 0.5 - 1e-9))
        lo = min(max(lo, 0), self.num_frames)
        return lo, min(max(hi, lo), self.num_frames)

    def slice(self, lo: int, hi: int) -> "FeatureMatrix":
        return FeatureMatrix(self.frames[lo:hi], self.frame_hop, self.frame_length,
                             self.start_offset + lo * self.frame_hop, self.fingerprint)


def num_frames(num_samples: int, window: int, hop: int) -> int:
    if num_samples < window:
        return 0
    return (num_samples - window) // hop + 1


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_filterbank(config: FeatureConfig, nfft: int) -> np.ndarray:
    """Triangular filters evaluated on the mel value of every FFT bin centre."""
    high = config.high_freq or config.sample_rate / 2.0
    edges = np.linspace(_hz_to_mel(config.low_freq), _hz_to_mel(high), config.num_filters + 2)
    bin_mel = _hz_to_mel(np.arange(nfft // 2 + 1) * config.sample_rate / nfft)
    left, centre, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (bin_mel - left) / (centre - left)
    down = (right - bin_mel) / (right - centre)
    return np.maximum(0.0, np.minimum(up, down))


def extract_mfcc(audio: AudioBuffer, config: FeatureConfig | None = None) -> FeatureMatrix:
    config = config or FeatureConfig()
    if audio.sample_rate != config.sample_rate:
        raise AudioError(f"audio at {audio.sample_rate} Hz, features expect {config.sample_rate} Hz")
    win, hop = config.window_samples, config.hop_samples
    n = num_frames(len(audio.samples), win, hop)
    if n == 0:
        raise AudioError(f"audio shorter than one analysis window ({config.window_ms} ms)")

    x = np.asarray(audio.samples, dtype=np.float64)
    if config.dither > 0:
        rng = np.random.default_rng(config.seed)
        x = x + config.dither * rng.standard_normal(x.shape) / 32768.0
    x = np.append(x[0], x[1:] - config.preemphasis * x[:-1])

    idx = np.arange(win)[None, :] + hop * np.arange(n)[:, None]
    frames = x[idx] * np.hamming(win)
    nfft = 1 << (win - 1).bit_length()
    power = np.abs(np.fft.rfft(frames, nfft)) ** 2
    fbank = power @ mel_filterbank(config, nfft).T
    logmel = np.log(np.maximum(fbank, 1e-10))
    ceps = dct(logmel, type=2, axis=1, norm="ortho")[:, : config.num_ceps]

    return FeatureMatrix(
        ceps,
        frame_hop=hop / config.sample_rate,
        frame_length=win / config.sample_rate,
        start_offset=(win - hop) / (2.0 * config.sample_rate),
        fingerprint=config.fingerprint(),
    )


def apply_cmvn(features: FeatureMatrix) -> FeatureMatrix:
    """Per-utterance mean and variance normalization; constant dimensions become 0."""
    if features.num_frames < 2:
        raise ValueError("CMVN needs at least 2 frames")
    x = features.frames
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    constant = std <= 1e-10 * (1.0 + np.abs(mean))
    out = (x - mean) / np.where(constant, 1.0, std)
    out[:, constant] = 0.0
    return replace(features, frames=out)
