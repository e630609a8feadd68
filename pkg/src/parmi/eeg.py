"""EEG stream processing: band-pass filtering, overlapped epoching and
shrinkage covariance estimation.

A stream is a channels x T sample matrix with an optional per-sample label
track.  The pipeline turns it into labeled covariance matrices:

    bandpass -> epoch_stream -> covariance

The band-pass is an order-N Butterworth (bilinear transform, scipy design)
applied forward and backward for zero phase; the default coefficient tables
for the stock configurations are listed in docs/formats.md so independent
implementations can compare bit-for-bit at 1e-6.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace

import numpy as np
import scipy.signal

from .spd import SpdMatrix, _sym

IDLE = "idle"


class DegenerateEpochError(ValueError):
    """Raised for an epoch with zero total variance (dead channel set)."""


@dataclass(frozen=True)
class EegStream:
    """Multichannel EEG segment (uV), channels x T, at a fixed rate."""

    fs: float
    samples: np.ndarray
    label_track: np.ndarray | None = None
    channel_names: tuple[str, ...] | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[1] < 1:
            raise ValueError(f"samples must be channels x T with T >= 1, got {s.shape}")
        if self.fs <= 0:
            raise ValueError("sampling rate must be positive")
        object.__setattr__(self, "samples", s)
        if self.label_track is not None:
            labels = np.asarray(self.label_track, dtype=object)
            if labels.shape != (s.shape[1],):
                raise ValueError("label track must have one label per sample")
            object.__setattr__(self, "label_track", labels)
        if self.channel_names is not None and len(self.channel_names) != s.shape[0]:
            raise ValueError("need one channel name per channel")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs

    def slice_seconds(self, start: float, end: float) -> "EegStream":
        """Sub-stream covering [start, end) seconds."""
        i0 = max(0, int(round(start * self.fs)))
        i1 = min(self.n_samples, int(round(end * self.fs)))
        if i1 <= i0:
            raise ValueError(f"empty slice [{start}, {end})")
        labels = None if self.label_track is None else self.label_track[i0:i1]
        return EegStream(self.fs, self.samples[:, i0:i1], labels, self.channel_names)


@dataclass(frozen=True)
class Epoch:
    """A fixed-length window cut from a stream, with its majority label."""

    data: np.ndarray
    start_time: float
    label: str = IDLE

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PipelineConfig:
    """Stream-to-covariance parameters shared by training and live sessions."""

    low_hz: float = 8.0
    high_hz: float = 30.0
    order: int = 4
    epoch_seconds: float = 0.5
    overlap_fraction: float = 0.5
    shrinkage: float = 0.1


def design_bandpass(low_hz: float, high_hz: float, order: int, fs: float) -> np.ndarray:
    """Second-order sections of the band-pass used by `bandpass`."""
    if not 0 < low_hz < high_hz < fs / 2:
        raise ValueError(
            f"band [{low_hz}, {high_hz}] Hz must sit inside (0, {fs / 2}) at fs={fs}"
        )
    return scipy.signal.butter(
        order, [low_hz, high_hz], btype="bandpass", fs=fs, output="sos"
    )


def bandpass(stream: EegStream, low_hz: float, high_hz: float, order: int = 4) -> EegStream:
    """Zero-phase band-pass: Butterworth sections applied forward and backward."""
    sos = design_bandpass(low_hz, high_hz, order, stream.fs)
    filtered = scipy.signal.sosfiltfilt(sos, stream.samples, axis=1)
    return replace(stream, samples=filtered)


def _majority_label(labels: np.ndarray) -> str:
    counts = Counter(labels.tolist())
    top = max(counts.values())
    winners = [lab for lab, c in counts.items() if c == top]
    return winners[0] if len(winners) == 1 else IDLE


def epoch_stream(
    stream: EegStream,
    epoch_seconds: float = 0.5,
    overlap_fraction: float = 0.5,
) -> list[Epoch]:
    """Cut the stream into overlapping fixed-length windows.

    Window length L = round(epoch_seconds * fs), hop = floor(L * (1 -
    overlap_fraction)).  Windows are emitted while they fit; a stream shorter
    than one window yields an empty list.  Each epoch's label is the majority
    per-sample label, ties going to idle.
    """
    if not 0 <= overlap_fraction < 1:
        raise ValueError("overlap fraction must be in [0, 1)")
    length = int(round(epoch_seconds * stream.fs))
    if length < 1:
        raise ValueError("epoch shorter than one sample")
    step = int(np.floor(length * (1.0 - overlap_fraction)))
    step = max(step, 1)
    epochs = []
    start = 0
    while start + length <= stream.n_samples:
        window = stream.samples[:, start : start + length]
        if stream.label_track is None:
            label = IDLE
        else:
            label = _majority_label(stream.label_track[start : start + length])
        epochs.append(Epoch(window, start / stream.fs, label))
        start += step
    return epochs


class StreamingEpocher:
    """Incremental epoching that matches `epoch_stream` on the concatenation.

    Feed chunks as they arrive; each push returns the epochs completed so far.
    """

    def __init__(self, fs: float, epoch_seconds: float = 0.5, overlap_fraction: float = 0.5):
        if not 0 <= overlap_fraction < 1:
            raise ValueError("overlap fraction must be in [0, 1)")
        self.fs = fs
        self.length = int(round(epoch_seconds * fs))
        self.step = max(int(np.floor(self.length * (1.0 - overlap_fraction))), 1)
        self._buffer: np.ndarray | None = None
        self._labels: list | None = None
        self._offset = 0  # absolute sample index of buffer[:, 0]

    def push(self, samples: np.ndarray, labels: np.ndarray | None = None) -> list[Epoch]:
        samples = np.asarray(samples, dtype=float)
        if self._buffer is None:
            self._buffer = samples.copy()
            self._labels = None if labels is None else list(labels)
        else:
            self._buffer = np.concatenate([self._buffer, samples], axis=1)
            if self._labels is not None:
                if labels is None:
                    raise ValueError("label track must be supplied consistently")
                self._labels.extend(labels)
        out = []
        while self._buffer.shape[1] >= self.length:
            window = self._buffer[:, : self.length]
            if self._labels is None:
                label = IDLE
            else:
                label = _majority_label(np.asarray(self._labels[: self.length], dtype=object))
            out.append(Epoch(window.copy(), self._offset / self.fs, label))
            self._buffer = self._buffer[:, self.step :]
            if self._labels is not None:
                self._labels = self._labels[self.step :]
            self._offset += self.step
        return out


def covariance(epoch: Epoch, shrinkage: float = 0.1) -> SpdMatrix:
    """Shrinkage covariance of an epoch.

    C = X_c X_c^T / (L - 1) with row-mean-centered X, then shrunk toward the
    scaled identity: C' = (1 - s) C + s (tr C / n) I.  Shrinking toward
    tr/n keeps the trace (hence overall signal power) untouched.
    """
    if not 0 <= shrinkage <= 1:
        raise ValueError("shrinkage must be in [0, 1]")
    x = epoch.data
    n, length = x.shape
    if length < 2:
        raise ValueError("need at least 2 samples per epoch")
    xc = x - x.mean(axis=1, keepdims=True)
    c = (xc @ xc.T) / (length - 1)
    trace = float(np.trace(c))
    if trace <= 0.0:
        raise DegenerateEpochError("degenerate epoch: zero variance across all channels")
    if shrinkage == 1.0:
        shrunk = (trace / n) * np.eye(n)
    else:
        shrunk = (1.0 - shrinkage) * c + shrinkage * (trace / n) * np.eye(n)
    return SpdMatrix(_sym(shrunk))


def epoch_covariances(
    stream: EegStream, cfg: PipelineConfig, prefiltered: bool = False
) -> list[tuple[float, str, SpdMatrix]]:
    """Full pipeline: (end_time, label, covariance) per epoch of the stream."""
    work = stream if prefiltered else bandpass(stream, cfg.low_hz, cfg.high_hz, cfg.order)
    out = []
    for ep in epoch_stream(work, cfg.epoch_seconds, cfg.overlap_fraction):
        end = ep.start_time + ep.n_samples / stream.fs
        out.append((end, ep.label, covariance(ep, cfg.shrinkage)))
    return out
