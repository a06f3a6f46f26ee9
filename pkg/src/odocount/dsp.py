"""Audio front end: spectrograms, band limiting, median noise reduction, patches.

All operations are pure functions of their inputs; magnitudes are linear
(not power) and stay float64 until patch extraction, which emits float32
feature matrices for the learners.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window

from . import kernels


@dataclass(frozen=True)
class AudioClip:
    """Single-channel audio: samples nominally in [-1, 1] plus a sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.samples.ndim != 1:
            raise ValueError("AudioClip holds a single channel")

    @property
    def duration_seconds(self):
        return len(self.samples) / self.sample_rate


@dataclass
class Spectrogram:
    """Time x frequency magnitude matrix with frame-rate and band metadata."""

    magnitudes: np.ndarray  # [n_frames, n_bins]
    hop_seconds: float
    bin_freqs: np.ndarray  # ascending, Hz

    def __post_init__(self):
        if self.magnitudes.ndim != 2:
            raise ValueError("magnitudes must be 2-D [frames, bins]")
        if self.magnitudes.shape[1] != len(self.bin_freqs):
            raise ValueError("bin_freqs length must match bin count")
        if len(self.bin_freqs) > 1 and not np.all(np.diff(self.bin_freqs) > 0):
            raise ValueError("bin_freqs must be strictly ascending")

    @property
    def n_frames(self):
        return self.magnitudes.shape[0]

    @property
    def n_bins(self):
        return self.magnitudes.shape[1]


class DiffSpectrogram(Spectrogram):
    """First time-difference of a Spectrogram; values may be negative."""


@dataclass(frozen=True)
class FeatureVector:
    """Flattened spectrogram patch plus where it came from."""

    values: np.ndarray
    center_frame: int
    before: int
    after: int


def read_wav(path):
    """Read a single-channel WAV (16-bit PCM or 32-bit float) as an AudioClip.

    Multi-channel files are rejected; downmix before use.
    """
    rate, data = wavfile.read(path)
    if data.ndim > 1:
        raise ValueError(
            f"{path}: {data.shape[1]}-channel audio is not supported; "
            "downmix to a single channel first"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported WAV sample format {data.dtype}")
    return AudioClip(samples=samples, sample_rate=int(rate))


def write_wav(path, clip):
    wavfile.write(path, clip.sample_rate, clip.samples.astype(np.float32))


def compute_spectrogram(clip, frame_len=2048, hop=None, window="hann"):
    """Magnitude spectrogram of the windowed DFT, bins 0..frame_len/2.

    n_frames = floor((len - frame_len) / hop) + 1; no padding, so the final
    partial frame is dropped.
    """
    if hop is None:
        hop = frame_len // 2
    if frame_len % hop != 0:
        raise ValueError("hop must divide frame_len")
    n = len(clip.samples)
    if n < frame_len:
        raise ValueError(
            f"insufficient samples: need at least {frame_len}, got {n}"
        )
    n_frames = (n - frame_len) // hop + 1
    win = get_window(window, frame_len, fftbins=True).astype(np.float64)
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, frame_len)[::hop]
    n_bins = frame_len // 2 + 1
    mags = np.empty((n_frames, n_bins), dtype=np.float64)
    chunk = max(1, (1 << 22) // frame_len)
    for start in range(0, n_frames, chunk):
        stop = min(start + chunk, n_frames)
        mags[start:stop] = np.abs(np.fft.rfft(frames[start:stop] * win, axis=1))
    bin_freqs = np.arange(n_bins, dtype=np.float64) * clip.sample_rate / frame_len
    return Spectrogram(magnitudes=mags, hop_seconds=hop / clip.sample_rate, bin_freqs=bin_freqs)


def band_limit(spec, lo_hz, hi_hz):
    """Retain exactly the bins with lo_hz <= freq <= hi_hz."""
    if lo_hz >= hi_hz:
        raise ValueError("lo_hz must be < hi_hz")
    keep = (spec.bin_freqs >= lo_hz) & (spec.bin_freqs <= hi_hz)
    if not np.any(keep):
        raise ValueError(f"band {lo_hz}-{hi_hz} Hz retains no bins")
    cls = type(spec)
    return cls(
        magnitudes=spec.magnitudes[:, keep],
        hop_seconds=spec.hop_seconds,
        bin_freqs=spec.bin_freqs[keep],
    )


def reduce_noise_median(spec, window_seconds=10.0, clamp=True):
    """Subtract the per-band sliding median (window truncated at the edges).

    Negative residuals clamp to zero unless ``clamp`` is disabled.
    """
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive")
    radius = int((window_seconds / 2.0) / spec.hop_seconds + 1e-9)
    out = kernels.median_subtract(spec.magnitudes, radius, clamp)
    return Spectrogram(magnitudes=out, hop_seconds=spec.hop_seconds, bin_freqs=spec.bin_freqs.copy())


def time_difference(spec):
    """First difference in time: out[t] = spec[t+1] - spec[t]."""
    if spec.n_frames < 2:
        raise ValueError("time_difference needs at least 2 frames")
    return DiffSpectrogram(
        magnitudes=np.diff(spec.magnitudes, axis=0),
        hop_seconds=spec.hop_seconds,
        bin_freqs=spec.bin_freqs.copy(),
    )


def pool_frequencies(spec, group):
    """Average adjacent bins in groups of ``group`` (final partial group kept).

    Reduces feature dimensionality for the learners; group=1 is the identity.
    """
    if group <= 1:
        return spec
    n_bins = spec.n_bins
    edges = np.arange(0, n_bins + group, group)
    edges[-1] = min(edges[-1], n_bins)
    if edges[-1] == edges[-2]:
        edges = edges[:-1]
    pooled = np.add.reduceat(spec.magnitudes, edges[:-1], axis=1)
    pooled /= np.diff(edges)[None, :]
    freqs = np.add.reduceat(spec.bin_freqs, edges[:-1]) / np.diff(edges)
    cls = type(spec)
    return cls(magnitudes=pooled, hop_seconds=spec.hop_seconds, bin_freqs=freqs)


def extract_patch(spec, center, before, after):
    """Row-major flattening of frames [center-before .. center+after] x all bins.

    Out-of-range frames are zero-padded so every frame yields a vector of
    dimension (before + after + 1) * n_bins.
    """
    n_bins = spec.n_bins
    rows = np.zeros((before + after + 1, n_bins), dtype=np.float64)
    for i, t in enumerate(range(center - before, center + after + 1)):
        if 0 <= t < spec.n_frames:
            rows[i] = spec.magnitudes[t]
    return FeatureVector(values=rows.ravel(), center_frame=center, before=before, after=after)


def extract_patch_matrix(spec, before, after, n_frames=None, dtype=np.float32):
    """All patches at once: [n_frames, (before+after+1)*n_bins], zero-padded.

    ``n_frames`` defaults to the spectrogram's frame count; pass the original
    frame count when patching a DiffSpectrogram so curve lengths line up.
    """
    if n_frames is None:
        n_frames = spec.n_frames
    width = before + after + 1
    padded = np.zeros((n_frames + width - 1, spec.n_bins), dtype=dtype)
    avail = min(spec.n_frames, n_frames + after)
    padded[before:before + avail] = spec.magnitudes[:avail]
    windows = np.lib.stride_tricks.sliding_window_view(padded, width, axis=0)
    # windows[t] is [n_bins, width]; transpose to frame-major before flattening
    return windows.transpose(0, 2, 1).reshape(n_frames, width * spec.n_bins).copy()


def export_csv(spec, path):
    """Debug spectrogram dump: one header line, then one row per frame."""
    with open(path, "w") as fh:
        fh.write(",".join([repr(spec.hop_seconds)] + [repr(float(f)) for f in spec.bin_freqs]))
        fh.write("\n")
        np.savetxt(fh, spec.magnitudes, delimiter=",")
