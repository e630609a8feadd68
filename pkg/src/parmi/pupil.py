"""Pupil-response decoding: frames to area samples, area samples to
constriction events, events to commands.

The stages mirror a low-cost IR-camera rig at desk scale:

  * `PupilDetector` segments the dark pupil blob in a grayscale frame and
    fits an ellipse to its boundary by direct least squares on the conic.
  * `condition` turns a raw area trace into a baseline-normalized one that
    shrugs off slow physiological size fluctuation (hippus).
  * `detect_par_events` finds constrictions with a hold-time filter and
    hysteresis thresholds.
  * `classify_par_command` maps an event's onset window and duration class
    onto one of four commands.

Streaming classes hold per-stream state; their batch wrappers drive them
sample by sample, so batch and incremental use behave identically.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.ndimage

MIN_BOUNDARY_PIXELS = 20
MIN_CONTRAST = 10  # intensity span below this means no dark blob to find
ROI_MARGIN = 0.2
# Boundary pixel centers sit half a pixel inside the blob's footprint; pad
# the fitted semi-axes back out before computing the area.
PIXEL_EDGE_PAD = 0.5


@dataclass(frozen=True)
class EyeFrame:
    """Grayscale eye image with a capture timestamp (seconds)."""

    intensity: np.ndarray
    timestamp: float

    def __post_init__(self):
        img = np.asarray(self.intensity)
        if img.ndim != 2 or img.size == 0:
            raise ValueError("frame must be a nonempty 2-D intensity array")
        object.__setattr__(self, "intensity", img)

    @property
    def height(self) -> int:
        return self.intensity.shape[0]

    @property
    def width(self) -> int:
        return self.intensity.shape[1]


@dataclass(frozen=True)
class PupilSample:
    """One pupil-area measurement; invalid samples mark blinks/fit failures."""

    timestamp: float
    area: float
    valid: bool = True

    def __post_init__(self):
        if self.valid and not self.area > 0:
            raise ValueError("a valid sample needs a positive area")


@dataclass(frozen=True)
class PupilEvent:
    """A detected constriction: onset, duration and fractional depth."""

    onset: float
    duration: float
    depth: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("event duration must be positive")


@dataclass(frozen=True)
class PupilConfig:
    """Conditioning and event-detection parameters."""

    max_gap: float = 0.3  # seconds of invalid samples bridged by interpolation
    baseline_window: float = 5.0  # trailing median window, seconds
    smooth_window: float = 0.1  # trailing moving-average window, seconds
    theta_on: float = 0.85  # open an event below this normalized level
    theta_off: float = 0.93  # close it above this (hysteresis)
    t_hold: float = 0.3  # minimum sub-threshold time before an event opens

    def __post_init__(self):
        if not 0 < self.theta_on < self.theta_off < 1:
            raise ValueError("need 0 < theta_on < theta_off < 1")
        if self.max_gap < 0 or self.t_hold < 0:
            raise ValueError("time constants must be nonnegative")


@dataclass(frozen=True)
class ConditionedSeries:
    """Baseline-normalized pupil trace; masked samples have valid=False."""

    timestamps: np.ndarray
    values: np.ndarray
    valid: np.ndarray


# ---------------------------------------------------------------------------
# Frame processing


def _otsu_threshold(img: np.ndarray) -> int | None:
    """Histogram-valley threshold; None when the frame has no contrast."""
    flat = img.astype(np.uint8).ravel()
    if int(flat.max()) - int(flat.min()) < MIN_CONTRAST:
        return None
    hist = np.bincount(flat, minlength=256).astype(float)
    total = flat.size
    omega = np.cumsum(hist) / total
    mu = np.cumsum(hist * np.arange(256)) / total
    mu_total = mu[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mu_total * omega - mu) ** 2 / (omega * (1.0 - omega))
    between[~np.isfinite(between)] = 0.0
    return int(np.argmax(between))


def fit_ellipse(x: np.ndarray, y: np.ndarray):
    """Direct least-squares ellipse fit on the conic form.

    Uses the numerically stable partitioned system with the ellipse-specific
    constraint 4ac - b^2 = 1.  Returns (cx, cy, semi_a, semi_b, theta) or
    None when the points do not determine an ellipse.
    """
    if len(x) < 5:
        return None
    mx, my = x.mean(), y.mean()
    xs, ys = x - mx, y - my
    d1 = np.column_stack([xs**2, xs * ys, ys**2])
    d2 = np.column_stack([xs, ys, np.ones_like(xs)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError:
        return None
    m = s1 + s2 @ t
    # premultiply by inv(C1) for the constraint matrix C1 = [[0,0,2],[0,-1,0],[2,0,0]]
    m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
    try:
        eigval, eigvec = np.linalg.eig(m)
    except np.linalg.LinAlgError:
        return None
    cond = 4.0 * eigvec[0] * eigvec[2] - eigvec[1] ** 2
    candidates = np.where((cond > 0) & np.isfinite(eigval))[0]
    if len(candidates) == 0:
        return None
    a1 = np.real(eigvec[:, candidates[0]])
    coeffs = np.concatenate([a1, (t @ a1)])
    ca, cb, cc, cd, ce, cf = (float(v) for v in coeffs)
    if ca + cc < 0:  # canonicalize the conic's overall sign
        ca, cb, cc, cd, ce, cf = -ca, -cb, -cc, -cd, -ce, -cf
    den = cb * cb - 4.0 * ca * cc
    if den >= 0:
        return None
    cx = (2.0 * cc * cd - cb * ce) / den
    cy = (2.0 * ca * ce - cb * cd) / den
    num = 2.0 * (ca * ce * ce + cc * cd * cd - cb * cd * ce + den * cf)
    if num <= 0 or not np.isfinite(num):
        return None
    s = math.sqrt((ca - cc) ** 2 + cb * cb)
    semi1 = -math.sqrt(num * (ca + cc + s)) / den
    semi2 = -math.sqrt(num * (ca + cc - s)) / den
    theta = 0.5 * math.atan2(-cb, cc - ca)
    semi_a, semi_b = max(semi1, semi2), min(semi1, semi2)
    if not (np.isfinite(semi_a) and np.isfinite(semi_b)) or semi_b <= 0:
        return None
    return cx + mx, cy + my, semi_a, semi_b, theta


def _invalid(t: float) -> PupilSample:
    return PupilSample(t, 0.0, valid=False)


class PupilDetector:
    """Stateful frame-by-frame pupil segmentation.

    Remembers the previous frame's blob bounding box (plus a 20% margin) and
    restricts the search to it; the first frame is searched whole.  A failed
    frame resets the region so the next one starts from scratch.
    """

    def __init__(self, threshold: int | str = "auto"):
        self.threshold = threshold
        self._roi: tuple[int, int, int, int] | None = None  # (r0, r1, c0, c1)

    def process(self, frame: EyeFrame) -> PupilSample:
        img = frame.intensity
        if self._roi is None:
            r0, r1, c0, c1 = 0, frame.height, 0, frame.width
        else:
            r0, r1, c0, c1 = self._roi
            r0, r1 = max(0, r0), min(frame.height, r1)
            c0, c1 = max(0, c0), min(frame.width, c1)
            if r1 - r0 < 2 or c1 - c0 < 2:
                r0, r1, c0, c1 = 0, frame.height, 0, frame.width
        roi = img[r0:r1, c0:c1]

        if self.threshold == "auto":
            thr = _otsu_threshold(roi)
            if thr is None:
                self._roi = None
                return _invalid(frame.timestamp)
        else:
            thr = int(self.threshold)
        dark = roi <= thr
        labels, count = scipy.ndimage.label(dark, structure=np.ones((3, 3)))
        if count == 0:
            self._roi = None
            return _invalid(frame.timestamp)
        sizes = scipy.ndimage.sum_labels(dark, labels, index=np.arange(1, count + 1))
        biggest = int(np.argmax(sizes)) + 1
        blob = labels == biggest
        if blob.sum() >= 0.9 * blob.size:  # a "pupil" filling the view is a dark scene
            self._roi = None
            return _invalid(frame.timestamp)

        rows = np.any(blob, axis=1).nonzero()[0]
        cols = np.any(blob, axis=0).nonzero()[0]
        height = rows[-1] - rows[0] + 1
        width = cols[-1] - cols[0] + 1
        mr = int(round(height * ROI_MARGIN))
        mc = int(round(width * ROI_MARGIN))
        self._roi = (
            r0 + rows[0] - mr,
            r0 + rows[-1] + 1 + mr,
            c0 + cols[0] - mc,
            c0 + cols[-1] + 1 + mc,
        )

        interior = scipy.ndimage.binary_erosion(
            blob, structure=scipy.ndimage.generate_binary_structure(2, 1)
        )
        boundary = blob & ~interior
        by, bx = boundary.nonzero()
        if len(bx) < MIN_BOUNDARY_PIXELS:
            return _invalid(frame.timestamp)
        fit = fit_ellipse(bx.astype(float) + c0, by.astype(float) + r0)
        if fit is None:
            return _invalid(frame.timestamp)
        _, _, semi_a, semi_b, _ = fit
        area = math.pi * (semi_a + PIXEL_EDGE_PAD) * (semi_b + PIXEL_EDGE_PAD)
        return PupilSample(frame.timestamp, area, valid=True)


def detect_pupil(frame: EyeFrame, threshold: int | str = "auto") -> PupilSample:
    """Single-frame pupil measurement (full-frame search)."""
    return PupilDetector(threshold).process(frame)


# ---------------------------------------------------------------------------
# Trace conditioning


class StreamingConditioner:
    """Gap-fill, baseline-normalize and smooth an area trace incrementally.

    Each push returns zero or more conditioned samples: invalid inputs are
    buffered until the gap resolves (interpolated when short, masked when
    longer than `max_gap`).  The baseline is a trailing median that excludes
    samples currently below the constriction threshold, so an event cannot
    drag its own baseline down.
    """

    def __init__(self, cfg: PupilConfig):
        self.cfg = cfg
        self._baseline_buf: deque[tuple[float, float]] = deque()
        self._smooth_buf: deque[tuple[float, float]] = deque()
        self._baseline: float | None = None
        self._last_valid: tuple[float, float] | None = None
        self._pending_invalid: list[float] = []
        self._emitted_any = False

    def push(self, sample: PupilSample) -> list[tuple[float, float, bool]]:
        if not sample.valid:
            self._pending_invalid.append(sample.timestamp)
            return []
        out: list[tuple[float, float, bool]] = []
        if self._pending_invalid:
            prev = self._last_valid
            gap_start = prev[0] if prev is not None else self._pending_invalid[0]
            gap = sample.timestamp - gap_start
            for t in self._pending_invalid:
                if prev is not None and gap <= self.cfg.max_gap:
                    frac = (t - prev[0]) / (sample.timestamp - prev[0])
                    area = prev[1] + frac * (sample.area - prev[1])
                    out.append(self._emit(t, area))
                else:
                    out.append((t, float("nan"), False))
            self._pending_invalid.clear()
        out.append(self._emit(sample.timestamp, sample.area))
        self._last_valid = (sample.timestamp, sample.area)
        return out

    def finish(self) -> list[tuple[float, float, bool]]:
        """Flush trailing invalid samples as masked output."""
        out = [(t, float("nan"), False) for t in self._pending_invalid]
        self._pending_invalid.clear()
        if not self._emitted_any and not out:
            return []
        return out

    @property
    def produced_valid_output(self) -> bool:
        return self._emitted_any

    def _emit(self, t: float, area: float) -> tuple[float, float, bool]:
        self._emitted_any = True
        if self._baseline is None:
            self._baseline = area
        # exclusion uses the pre-update baseline: constricted samples must not
        # enter the median window
        if area >= self.cfg.theta_on * self._baseline:
            self._baseline_buf.append((t, area))
        # The window is measured over the *included* samples' span, so an
        # event (whose samples are excluded) freezes the baseline instead of
        # thinning the window down to a biased remnant.
        while (
            len(self._baseline_buf) > 1
            and self._baseline_buf[-1][0] - self._baseline_buf[0][0] > self.cfg.baseline_window
        ):
            self._baseline_buf.popleft()
        if self._baseline_buf:
            self._baseline = float(np.median([a for _, a in self._baseline_buf]))
        raw = area / self._baseline
        self._smooth_buf.append((t, raw))
        while self._smooth_buf and self._smooth_buf[0][0] <= t - self.cfg.smooth_window:
            self._smooth_buf.popleft()
        value = float(np.mean([v for _, v in self._smooth_buf]))
        return (t, value, True)


def condition(series: list[PupilSample], cfg: PupilConfig | None = None) -> ConditionedSeries:
    """Batch conditioning; equivalent to streaming the samples one by one."""
    cfg = cfg or PupilConfig()
    conditioner = StreamingConditioner(cfg)
    rows: list[tuple[float, float, bool]] = []
    for s in series:
        rows.extend(conditioner.push(s))
    rows.extend(conditioner.finish())
    if not conditioner.produced_valid_output:
        raise ValueError("series entirely invalid: nothing to condition")
    rows.sort(key=lambda r: r[0])
    t = np.array([r[0] for r in rows])
    v = np.array([r[1] for r in rows])
    ok = np.array([r[2] for r in rows])
    return ConditionedSeries(t, v, ok)


# ---------------------------------------------------------------------------
# Event detection


class ParDetector:
    """Hysteresis constriction detector with a hold-time filter.

    An event opens once the normalized level stays below `theta_on` for at
    least `t_hold` (the onset is backdated to the first sub-threshold
    sample) and closes at the first sample back above `theta_off`.
    """

    _IDLE, _PENDING, _OPEN = range(3)

    def __init__(self, cfg: PupilConfig | None = None):
        self.cfg = cfg or PupilConfig()
        self._state = self._IDLE
        self._onset = 0.0
        self._min_value = 1.0
        self._last_time: float | None = None

    def push(self, t: float, value: float, valid: bool = True) -> list[PupilEvent]:
        if not valid or not np.isfinite(value):
            return []
        self._last_time = t
        cfg = self.cfg
        if self._state == self._IDLE:
            if value < cfg.theta_on:
                self._state = self._PENDING
                self._onset = t
                self._min_value = value
            return []
        if self._state == self._PENDING:
            if value >= cfg.theta_on:
                self._state = self._IDLE
                return []
            self._min_value = min(self._min_value, value)
            if t - self._onset >= cfg.t_hold:
                self._state = self._OPEN
            return []
        # open
        self._min_value = min(self._min_value, value)
        if value > cfg.theta_off:
            self._state = self._IDLE
            return [PupilEvent(self._onset, t - self._onset, 1.0 - self._min_value)]
        return []

    def finish(self) -> list[PupilEvent]:
        """Close a still-open event at the last seen timestamp."""
        if self._state == self._OPEN and self._last_time is not None:
            duration = self._last_time - self._onset
            self._state = self._IDLE
            if duration > 0:
                return [PupilEvent(self._onset, duration, 1.0 - self._min_value)]
        self._state = self._IDLE
        return []


def detect_par_events(series: ConditionedSeries, cfg: PupilConfig | None = None) -> list[PupilEvent]:
    """Run the streaming detector over a conditioned series."""
    detector = ParDetector(cfg)
    events: list[PupilEvent] = []
    for t, v, ok in zip(series.timestamps, series.values, series.valid):
        events.extend(detector.push(float(t), float(v), bool(ok)))
    events.extend(detector.finish())
    return events


# ---------------------------------------------------------------------------
# Command mapping


@dataclass(frozen=True)
class PromptCycle:
    """Two consecutive onset windows of one prompt of the command paradigm."""

    first: tuple[float, float]
    second: tuple[float, float]

    def __post_init__(self):
        a0, a1 = self.first
        b0, b1 = self.second
        if not (a0 < a1 <= b0 < b1):
            raise ValueError(
                f"cycle windows must be ordered and disjoint: {self.first}, {self.second}"
            )


@dataclass(frozen=True)
class CommandSchedule:
    """Prompt cycles plus the short/long duration boundary (seconds)."""

    cycles: tuple[PromptCycle, ...]
    short_long_boundary: float = 1.0

    def __post_init__(self):
        if self.short_long_boundary <= 0:
            raise ValueError("duration boundary must be positive")
        spans = sorted((c.first[0], c.second[1]) for c in self.cycles)
        for (_, prev_end), (next_start, _) in zip(spans, spans[1:]):
            if next_start < prev_end:
                raise ValueError("prompt cycles overlap")

    def window_of(self, t: float) -> int | None:
        """1 or 2 for the onset window containing t, else None."""
        for cycle in self.cycles:
            if cycle.first[0] <= t < cycle.first[1]:
                return 1
            if cycle.second[0] <= t < cycle.second[1]:
                return 2
        return None


def classify_par_command(event: PupilEvent, schedule: CommandSchedule) -> int | None:
    """Map an event to a command in 1..4, or None when the onset misses.

    Command = 2 * (window - 1) + duration class, where durations below the
    boundary are "short" (class 1) and the rest "long" (class 2).
    """
    window = schedule.window_of(event.onset)
    if window is None:
        return None
    duration_class = 1 if event.duration < schedule.short_long_boundary else 2
    return 2 * (window - 1) + duration_class
