"""Ground-truth signal generation standing in for acquisition hardware.

Produces three things, all seeded and reproducible:

  * multichannel EEG with band-limited oscillations whose power drops on a
    task-specific channel group during motor-imagery intervals (the
    event-related desynchronization the classifier feeds on),
  * pupil-area traces with slow hippus, measurement noise and scheduled
    constrictions with raised-cosine edges,
  * optional rendering of a trace as synthetic eye frames (dark elliptical
    pupil on a light background) for the frame-processing path.

The generators also expose their own ground truth (ideal per-class
covariances, schedule recovery) so closed-loop tests can score detectors and
classifiers against what was actually injected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .eeg import IDLE, EegStream
from .pupil import EyeFrame, PupilSample
from .spd import SpdMatrix

MU_HZ = 11.0
BETA_HZ = 21.0
# Rhythm peaks vary between channels, like electrodes over different patches
# of cortex.  The spans keep channel pairs >= ~2 Hz apart at the default
# montage so one channel's rhythm cannot masquerade as another's in a short
# window's covariance.
MU_SPAN = 6.0
BETA_SPAN = 9.0
PHASE_COHERENCE_TIME = 1.0  # seconds; epochs farther apart lose phase memory
CONSTRICTION_EDGE = 0.3  # raised-cosine transition time, seconds


@dataclass(frozen=True)
class TaskInterval:
    start: float
    end: float
    label: str

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError(f"empty task interval [{self.start}, {self.end})")


@dataclass(frozen=True)
class Constriction:
    """One scheduled pupil constriction.

    `onset` and `onset + duration` are the midpoints of the raised-cosine
    edges, so a detector thresholding at half depth reads back the scheduled
    onset and duration.
    """

    onset: float
    duration: float
    depth: float

    def __post_init__(self):
        if self.duration < CONSTRICTION_EDGE:
            raise ValueError(f"duration must be at least {CONSTRICTION_EDGE} s")
        if not 0 < self.depth < 1:
            raise ValueError("depth must be in (0, 1)")

    @property
    def footprint(self) -> tuple[float, float]:
        half = CONSTRICTION_EDGE / 2
        return (self.onset - half, self.onset + self.duration + half)


@dataclass(frozen=True)
class EegSimConfig:
    fs: float = 256.0
    channels: int = 4
    erd_depth: float = 0.3
    noise_level: float = 1.0
    schedule: tuple[TaskInterval, ...] = ()
    mu_amplitude: float = 3.2
    beta_amplitude: float = 3.2
    # label -> channel indices whose oscillations attenuate during that task;
    # None derives groups from the lateralization rule in `task_channel_groups`
    task_channels: dict | None = None


@dataclass(frozen=True)
class PupilSimConfig:
    rate: float = 30.0
    hippus_amplitude: float = 0.05
    # slow enough that a trailing-median baseline can follow it
    hippus_freq: float = 0.05
    noise_level: float = 0.01
    baseline_area: float = 2500.0
    schedule: tuple[Constriction, ...] = ()


@dataclass(frozen=True)
class DriftSpec:
    """Scale the signal covariance by `scale` from time `at` onward."""

    at: float
    scale: float


@dataclass(frozen=True)
class SimScenario:
    seed: int
    duration: float
    eeg: EegSimConfig = field(default_factory=EegSimConfig)
    pupil: PupilSimConfig = field(default_factory=PupilSimConfig)
    drift: DriftSpec | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("scenario duration must be positive")
        if not 0 <= self.eeg.erd_depth <= 1:
            raise ValueError("erd_depth must be in [0, 1]")
        intervals = sorted(self.eeg.schedule, key=lambda iv: iv.start)
        for a, b in zip(intervals, intervals[1:]):
            if b.start < a.end:
                raise ValueError(f"task intervals overlap: {a} / {b}")
        for iv in intervals:
            if iv.start < 0 or iv.end > self.duration:
                raise ValueError(f"task interval outside scenario: {iv}")
        events = sorted(self.pupil.schedule, key=lambda e: e.onset)
        for a, b in zip(events, events[1:]):
            if b.footprint[0] < a.footprint[1]:
                raise ValueError(f"constriction footprints overlap: {a} / {b}")
        for e in events:
            if e.footprint[0] < 0 or e.footprint[1] > self.duration:
                raise ValueError(f"constriction outside scenario: {e}")

    def rngs(self) -> tuple[np.random.Generator, np.random.Generator]:
        """Independent generators for the EEG and pupil streams."""
        eeg_ss, pupil_ss = np.random.SeedSequence(self.seed).spawn(2)
        return np.random.default_rng(eeg_ss), np.random.default_rng(pupil_ss)


def task_channel_groups(cfg: EegSimConfig) -> dict[str, np.ndarray]:
    """Channel group attenuated by each scheduled task.

    Right-hand imagery suppresses the left-lateralized half of the montage
    and vice versa; other labels alternate between halves in order of first
    appearance.  Idle never modulates anything.
    """
    if cfg.task_channels is not None:
        return {k: np.asarray(v, dtype=int) for k, v in cfg.task_channels.items()}
    half = cfg.channels // 2
    left = np.arange(half)
    right = np.arange(half, cfg.channels)
    groups: dict[str, np.ndarray] = {}
    alternation = [left, right]
    next_free = 0
    for interval in cfg.schedule:
        lab = interval.label
        if lab == IDLE or lab in groups:
            continue
        if lab == "right_hand":
            groups[lab] = left
        elif lab == "left_hand":
            groups[lab] = right
        else:
            groups[lab] = alternation[next_free % 2]
            next_free += 1
    return groups


def _pink_noise(rng: np.random.Generator, n: int, octaves: int = 8) -> np.ndarray:
    """Pink-like noise as a sum of octave-spaced white bands."""
    total = np.zeros(n)
    for k in range(octaves):
        step = 2**k
        coarse = rng.normal(size=(n + step - 1) // step)
        total += np.repeat(coarse, step)[:n]
    return total / math.sqrt(octaves)


def _rhythm(rng: np.random.Generator, n: int, fs: float, center: float) -> np.ndarray:
    """Unit-power oscillation whose phase diffuses slowly.

    The constant envelope keeps short-window band power steady (the
    classifier's signal), while phase diffusion decorrelates channels and
    epochs, so nothing leaks through covariance off-diagonals.
    """
    t = np.arange(n) / fs
    step = math.sqrt(2.0 / (PHASE_COHERENCE_TIME * fs))
    phase = rng.uniform(0, 2 * math.pi) + np.cumsum(rng.normal(0.0, step, size=n))
    return math.sqrt(2.0) * np.sin(2 * math.pi * center * t + phase)


def gen_eeg(scenario: SimScenario) -> EegStream:
    """Render the scenario's EEG: drifting-phase rhythms + pink noise + labels."""
    cfg = scenario.eeg
    rng, _ = scenario.rngs()
    n = int(round(scenario.duration * cfg.fs))
    groups = task_channel_groups(cfg)

    envelope = np.ones((cfg.channels, n))
    labels = np.full(n, IDLE, dtype=object)
    atten = math.sqrt(1.0 - cfg.erd_depth)
    for interval in cfg.schedule:
        i0 = int(round(interval.start * cfg.fs))
        i1 = int(round(interval.end * cfg.fs))
        labels[i0:i1] = interval.label
        if interval.label == IDLE:
            continue
        chans = groups[interval.label]
        envelope[np.ix_(chans, np.arange(i0, i1))] = atten

    half = (cfg.channels - 1) / 2.0
    span = max(cfg.channels - 1, 1)
    samples = np.empty((cfg.channels, n))
    for ch in range(cfg.channels):
        f_mu = MU_HZ + MU_SPAN * (ch - half) / span
        f_beta = BETA_HZ + BETA_SPAN * (ch - half) / span
        osc = (cfg.mu_amplitude / math.sqrt(2)) * _rhythm(rng, n, cfg.fs, f_mu)
        osc += (cfg.beta_amplitude / math.sqrt(2)) * _rhythm(rng, n, cfg.fs, f_beta)
        samples[ch] = envelope[ch] * osc + cfg.noise_level * _pink_noise(rng, n)

    if scenario.drift is not None:
        cut = int(round(scenario.drift.at * cfg.fs))
        samples[:, cut:] *= math.sqrt(scenario.drift.scale)

    names = tuple(f"ch{i}" for i in range(cfg.channels))
    return EegStream(cfg.fs, samples, label_track=labels, channel_names=names)


def ideal_covariance(scenario: SimScenario, label: str) -> SpdMatrix:
    """The generator's own expected (unfiltered) covariance for a task."""
    cfg = scenario.eeg
    osc_power = (cfg.mu_amplitude**2 + cfg.beta_amplitude**2) / 2.0
    diag = np.full(cfg.channels, osc_power + cfg.noise_level**2)
    if label != IDLE:
        groups = task_channel_groups(cfg)
        if label not in groups:
            raise KeyError(f"label {label!r} is not in the scenario schedule")
        diag[groups[label]] = (1.0 - cfg.erd_depth) * osc_power + cfg.noise_level**2
    return SpdMatrix(np.diag(diag))


def schedule_from_label_track(stream: EegStream) -> list[TaskInterval]:
    """Recover the non-idle intervals encoded in a stream's label track."""
    if stream.label_track is None:
        return []
    out = []
    current: str | None = None
    start = 0
    for i, lab in enumerate(stream.label_track):
        if lab != current:
            if current is not None and current != IDLE:
                out.append(TaskInterval(start / stream.fs, i / stream.fs, current))
            current = lab
            start = i
    if current is not None and current != IDLE:
        out.append(TaskInterval(start / stream.fs, stream.n_samples / stream.fs, current))
    return out


def _constriction_profile(t: np.ndarray, schedule: tuple[Constriction, ...]) -> np.ndarray:
    profile = np.ones_like(t)
    half = CONSTRICTION_EDGE / 2
    for ev in schedule:
        rise0, rise1 = ev.onset - half, ev.onset + half
        fall0, fall1 = ev.onset + ev.duration - half, ev.onset + ev.duration + half
        e = np.zeros_like(t)
        rising = (t >= rise0) & (t < rise1)
        e[rising] = 0.5 * (1 - np.cos(math.pi * (t[rising] - rise0) / CONSTRICTION_EDGE))
        e[(t >= rise1) & (t < fall0)] = 1.0
        falling = (t >= fall0) & (t < fall1)
        e[falling] = 0.5 * (1 + np.cos(math.pi * (t[falling] - fall0) / CONSTRICTION_EDGE))
        profile *= 1.0 - ev.depth * e
    return profile


def gen_pupil(scenario: SimScenario) -> list[PupilSample]:
    """Render the scenario's pupil-area trace."""
    cfg = scenario.pupil
    _, rng = scenario.rngs()
    n = int(round(scenario.duration * cfg.rate))
    t = np.arange(n) / cfg.rate
    phase = rng.uniform(0, 2 * math.pi)
    hippus = 1.0 + cfg.hippus_amplitude * np.sin(2 * math.pi * cfg.hippus_freq * t + phase)
    noise = 1.0 + cfg.noise_level * rng.normal(size=n)
    area = cfg.baseline_area * hippus * _constriction_profile(t, cfg.schedule) * noise
    return [PupilSample(float(ti), float(ai), True) for ti, ai in zip(t, area)]


# ---------------------------------------------------------------------------
# Frame rendering


@dataclass(frozen=True)
class FrameRenderConfig:
    size: int = 128
    background: float = 220.0
    foreground: float = 30.0
    pixel_noise: float = 2.0
    supersample: int = 4


def render_ellipse_frame(
    semi_a: float,
    semi_b: float,
    timestamp: float,
    cfg: FrameRenderConfig = FrameRenderConfig(),
    center: tuple[float, float] | None = None,
    angle: float = 0.0,
    rng: np.random.Generator | None = None,
) -> EyeFrame:
    """Dark anti-aliased ellipse on a light background.

    Pixel coverage is estimated on a supersampled grid so the rendered blob's
    footprint matches the analytic ellipse to a fraction of a pixel.
    """
    size = cfg.size
    cx, cy = center if center is not None else ((size - 1) / 2.0, (size - 1) / 2.0)
    s = cfg.supersample
    offsets = (np.arange(s) + 0.5) / s - 0.5
    ys = np.arange(size)[:, None, None, None] + offsets[None, None, :, None]
    xs = np.arange(size)[None, :, None, None] + offsets[None, None, None, :]
    dx = xs - cx
    dy = ys - cy
    ca, sa = math.cos(angle), math.sin(angle)
    u = dx * ca + dy * sa
    v = -dx * sa + dy * ca
    inside = (u / semi_a) ** 2 + (v / semi_b) ** 2 <= 1.0
    coverage = inside.mean(axis=(2, 3))
    img = cfg.background + (cfg.foreground - cfg.background) * coverage
    if rng is not None and cfg.pixel_noise > 0:
        img = img + rng.normal(0.0, cfg.pixel_noise, size=img.shape)
    img = np.clip(np.round(img), 0, 255).astype(np.uint8)
    return EyeFrame(img, timestamp)


def render_frames(
    samples: list[PupilSample],
    scenario: SimScenario,
    cfg: FrameRenderConfig = FrameRenderConfig(),
) -> list[EyeFrame]:
    """Render a trace as disc-in-frame images with radius sqrt(area / pi)."""
    _, rng = scenario.rngs()
    rng = np.random.default_rng(rng.integers(2**63))  # do not disturb trace noise
    frames = []
    for s in samples:
        r = math.sqrt(max(s.area, 1.0) / math.pi)
        frames.append(render_ellipse_frame(r, r, s.timestamp, cfg, rng=rng))
    return frames


def pupil_trace_scaled(scenario: SimScenario, frame_cfg: FrameRenderConfig) -> SimScenario:
    """Scenario copy whose baseline pupil fits comfortably in rendered frames."""
    target_radius = frame_cfg.size * 0.22
    return replace(
        scenario,
        pupil=replace(scenario.pupil, baseline_area=math.pi * target_radius**2),
    )
