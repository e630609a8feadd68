"""Closed-loop neurofeedback trials: cue, imagery, online score, adaptation.

A trial is a short (under 20 s) phase sequence; during the imagery phase the
stream is epoched and every epoch's covariance is scored against the cued
task, giving the user one feedback sample per epoch step.  A session runs
trials round-robin over the active tasks, feeds the cue-labeled covariances
into the classifier's periodic adaptation, measures separability and
consistency at the end, and unlocks the next curriculum task once every
active one meets the score criterion.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import classifier
from .classifier import MiModel
from .eeg import IDLE, EegStream, PipelineConfig, bandpass, epoch_covariances
from .simulate import SimScenario, TaskInterval, gen_eeg
from .spd import SpdMatrix, riemannian_distance

MAX_TRIAL_SECONDS = 20.0


@dataclass(frozen=True)
class PhasePlan:
    """Durations of the four trial phases, in seconds."""

    pre_cue: float = 2.0
    cue: float = 1.0
    imagery: float = 4.0
    inter_trial: float = 2.0

    def __post_init__(self):
        for name in ("pre_cue", "cue", "imagery", "inter_trial"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} duration cannot be negative")
        if self.imagery <= 0:
            raise ValueError("imagery phase must be positive")

    @property
    def total(self) -> float:
        return self.pre_cue + self.cue + self.imagery + self.inter_trial

    @property
    def imagery_start(self) -> float:
        return self.pre_cue + self.cue


@dataclass(frozen=True)
class UnlockCriterion:
    """A task unlocks the next one after `min_trials` scoring runs."""

    min_trials: int = 2
    min_mean_score: float = 0.3


@dataclass(frozen=True)
class TrialProtocol:
    phases: PhasePlan = field(default_factory=PhasePlan)
    trials_per_run: int = 6
    active_tasks: tuple[str, ...] = (IDLE, "right_hand")
    unlock_criterion: UnlockCriterion = field(default_factory=UnlockCriterion)

    def __post_init__(self):
        if self.phases.total > MAX_TRIAL_SECONDS:
            raise ValueError(
                f"trial length {self.phases.total:.1f} s exceeds the "
                f"{MAX_TRIAL_SECONDS:.0f} s budget"
            )
        if self.trials_per_run < 1:
            raise ValueError("need at least one trial per run")
        if IDLE not in self.active_tasks or len(self.active_tasks) < 2:
            raise ValueError("active tasks must hold the idle state plus one MI task")

    @property
    def trial_length(self) -> float:
        return self.phases.total


@dataclass(frozen=True)
class TrialResult:
    task: str
    feedback_samples: tuple[tuple[float, float], ...]  # (time, score)
    mean_score: float
    epochs_used: int


@dataclass(frozen=True)
class SessionOutcome:
    model: MiModel
    separability: float
    consistency: dict[str, float]
    results: tuple[TrialResult, ...]
    active_tasks: tuple[str, ...]  # task set for the next session
    adaptations: int
    observed: tuple[tuple[float, str, SpdMatrix], ...] = ()  # (time, label, cov)


def feedback_score(c: SpdMatrix, model: MiModel, target: str) -> float:
    """Signed closeness to the cued task, in [-1, 1].

    (d_other - d_target) / (d_other + d_target), where d_other is the
    distance to the nearest non-target prototype.  Positive means the cued
    class is winning; +1 sits exactly on the target prototype.
    """
    if target not in model.classes:
        raise ValueError(f"unknown target task {target!r}")
    d_target = riemannian_distance(c, model.prototype(target))
    d_other = min(
        riemannian_distance(c, p)
        for cls, p in zip(model.classes, model.prototypes)
        if cls != target
    )
    if d_target == d_other:
        return 0.0
    return (d_other - d_target) / (d_other + d_target)


def run_trial(
    protocol: TrialProtocol,
    task: str,
    stream: EegStream,
    model: MiModel,
    pipeline: PipelineConfig | None = None,
    prefiltered: bool = False,
) -> TrialResult:
    """Score one trial's imagery phase epoch by epoch.

    `stream` must cover the whole trial, with t=0 at trial start.
    """
    pipeline = pipeline or PipelineConfig()
    if task not in protocol.active_tasks:
        raise ValueError(f"task {task!r} is not active in this protocol")
    if stream.duration + 1e-9 < protocol.trial_length:
        raise ValueError(
            f"stream covers {stream.duration:.2f} s but the trial needs "
            f"{protocol.trial_length:.2f} s"
        )
    work = stream if prefiltered else bandpass(
        stream, pipeline.low_hz, pipeline.high_hz, pipeline.order
    )
    phases = protocol.phases
    imagery = work.slice_seconds(phases.imagery_start, phases.imagery_start + phases.imagery)
    samples = []
    for end, _, cov in epoch_covariances(imagery, pipeline, prefiltered=True):
        t = phases.imagery_start + end
        samples.append((t, feedback_score(cov, model, task)))
    if not samples:
        raise ValueError("imagery phase too short for a single epoch")
    mean_score = float(np.mean([s for _, s in samples]))
    return TrialResult(task, tuple(samples), mean_score, len(samples))


def session_schedule(protocol: TrialProtocol) -> list[tuple[float, str]]:
    """Trial start times and cued tasks, round-robin over the active set."""
    return [
        (k * protocol.trial_length, protocol.active_tasks[k % len(protocol.active_tasks)])
        for k in range(protocol.trials_per_run)
    ]


def _session_scenario(protocol: TrialProtocol, base: SimScenario) -> SimScenario:
    """Scenario whose EEG schedule realizes the cued trials."""
    phases = protocol.phases
    intervals = []
    for start, task in session_schedule(protocol):
        if task == IDLE:
            continue  # idle trials are unmodulated by definition
        t0 = start + phases.imagery_start
        intervals.append(TaskInterval(t0, t0 + phases.imagery, task))
    duration = protocol.trials_per_run * protocol.trial_length + 1.0
    return replace(
        base,
        duration=max(duration, base.duration),
        eeg=replace(base.eeg, schedule=tuple(intervals)),
    )


def run_session(
    protocol: TrialProtocol,
    model: MiModel,
    scenario: SimScenario,
    pipeline: PipelineConfig | None = None,
    curriculum: tuple[str, ...] = (IDLE, "right_hand", "left_hand"),
) -> SessionOutcome:
    """One training run: trials, periodic adaptation, metrics, unlocking.

    Adaptation consumes cue-labeled imagery epochs plus idle-labeled rest
    epochs, firing every `model.adaptation_period`; feedback always uses the
    model as currently adapted.  The returned active set gains the next
    curriculum task only when every active task met the unlock criterion.
    """
    pipeline = pipeline or PipelineConfig()
    missing = [t for t in protocol.active_tasks if t not in model.classes]
    if missing:
        raise ValueError(f"model has no prototypes for active tasks: {missing}")
    scen = _session_scenario(protocol, scenario)
    stream = bandpass(gen_eeg(scen), pipeline.low_hz, pipeline.high_hz, pipeline.order)
    phases = protocol.phases

    results: list[TrialResult] = []
    observed: list[tuple[float, str, SpdMatrix]] = []
    adaptations = 0

    for start, task in session_schedule(protocol):
        trial_stream = stream.slice_seconds(start, start + protocol.trial_length)
        # rest-phase epochs keep the idle prototype tracking drift too
        rest_windows = [(0.0, phases.pre_cue)]
        if phases.inter_trial > 0:
            rest_windows.append((protocol.trial_length - phases.inter_trial, protocol.trial_length))
        labeled: list[tuple[float, SpdMatrix, str]] = []
        for w0, w1 in rest_windows:
            if w1 - w0 < pipeline.epoch_seconds:
                continue
            rest = trial_stream.slice_seconds(w0, w1)
            for end, _, cov in epoch_covariances(rest, pipeline, prefiltered=True):
                labeled.append((w0 + end, cov, IDLE))

        feedback: list[tuple[float, float]] = []
        imagery = trial_stream.slice_seconds(
            phases.imagery_start, phases.imagery_start + phases.imagery
        )
        for end, _, cov in epoch_covariances(imagery, pipeline, prefiltered=True):
            t = phases.imagery_start + end
            feedback.append((start + t, feedback_score(cov, model, task)))
            labeled.append((phases.imagery_start + end, cov, task))

        for t_rel, cov, label in sorted(labeled, key=lambda r: r[0]):
            observed.append((start + t_rel, label, cov))
            model = classifier.observe(model, cov, label)
            if not model.pending:
                adaptations += 1
        if not feedback:
            raise ValueError("imagery phase too short for a single epoch")
        mean_score = float(np.mean([s for _, s in feedback]))
        results.append(TrialResult(task, tuple(feedback), mean_score, len(feedback)))

    # leftover pending epochs are transient: updates fire on full periods only
    model = replace(model, pending=())
    # score metrics over the classes this session exercised
    scored = classifier.restrict_model(model, protocol.active_tasks)
    separability, consistency = classifier.performance_metrics(
        [(cov, label) for _, label, cov in observed], scored
    )

    active = protocol.active_tasks
    crit = protocol.unlock_criterion
    def task_met(task: str) -> bool:
        scoring = [r for r in results if r.task == task and r.mean_score >= crit.min_mean_score]
        return len(scoring) >= crit.min_trials
    if all(task_met(t) for t in active):
        for nxt in curriculum:
            if nxt not in active:
                active = active + (nxt,)
                break

    return SessionOutcome(
        model=model,
        separability=separability,
        consistency=consistency,
        results=tuple(results),
        active_tasks=active,
        adaptations=adaptations,
        observed=tuple(observed),
    )
