"""Minimum-distance-to-mean classification of covariance epochs.

A model is a set of per-class prototypes (Karcher means of training
covariances) compared by the affine-invariant distance.  Prototypes adapt
online by sliding along the geodesic toward the mean of newly observed
epochs, with the old prototype heavily weighted; user-progress metrics
(between-class separability, within-class consistency) gate the jump from
pupil-only to multimodal interaction.

Models are immutable values: train/adapt/with_pending return new ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .eeg import IDLE
from .spd import SpdMatrix, frechet_mean, geodesic, riemannian_distance

SEPARABILITY_CAP = 1e6

SNAPSHOT_FORMAT = "parmi-mi-model"
SNAPSHOT_VERSION = 1


class SnapshotError(ValueError):
    """Model snapshot file is malformed or has the wrong version."""


@dataclass(frozen=True)
class MiModel:
    """Per-class prototypes plus adaptation state.

    `pending` buffers labeled covariances observed since the last update;
    `adaptation_period` is how many buffered epochs trigger one.
    """

    classes: tuple[str, ...]
    prototypes: tuple[SpdMatrix, ...]
    adaptation_alpha: float = 0.1
    adaptation_period: int = 16
    pending: tuple[tuple[str, SpdMatrix], ...] = ()

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError("need at least two classes (one task plus idle)")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class labels must be unique")
        if IDLE not in self.classes:
            raise ValueError(f"classes must include the {IDLE!r} state")
        if len(self.prototypes) != len(self.classes):
            raise ValueError("need one prototype per class")
        dims = {p.dim for p in self.prototypes}
        if len(dims) != 1:
            raise ValueError("prototypes must share a dimension")
        if not 0 <= self.adaptation_alpha <= 1:
            raise ValueError("adaptation weight must be in [0, 1]")
        if self.adaptation_period < 1:
            raise ValueError("adaptation period must be at least 1")
        for label, _ in self.pending:
            if label not in self.classes:
                raise ValueError(f"pending label {label!r} not in model classes")

    @property
    def dim(self) -> int:
        return self.prototypes[0].dim

    def prototype(self, label: str) -> SpdMatrix:
        return self.prototypes[self.classes.index(label)]


@dataclass(frozen=True)
class Classification:
    """Nearest-prototype decision with its evidence margin.

    `score` is (d2 - d1) / (d2 + d1) for winner distance d1 and runner-up
    d2: zero on an exact tie, approaching one as the winner dominates.
    """

    label: str
    distances: tuple[tuple[str, float], ...]
    score: float


def train(
    labeled: list[tuple[SpdMatrix, str]],
    classes: tuple[str, ...] | None = None,
    adaptation_alpha: float = 0.1,
    adaptation_period: int = 16,
) -> MiModel:
    """Fit one prototype per class as the unweighted mean of its examples.

    Classes default to first-appearance order of the labels.  Every class
    needs at least two examples; the error lists any that are starved.
    """
    if classes is None:
        seen: list[str] = []
        for _, label in labeled:
            if label not in seen:
                seen.append(label)
        classes = tuple(seen)
    by_class: dict[str, list[SpdMatrix]] = {c: [] for c in classes}
    for mat, label in labeled:
        if label not in by_class:
            raise ValueError(f"label {label!r} is not a declared class")
        by_class[label].append(mat)
    starved = [c for c, mats in by_class.items() if len(mats) < 2]
    if starved:
        raise ValueError(f"classes with fewer than 2 training examples: {starved}")
    prototypes = tuple(frechet_mean(by_class[c]) for c in classes)
    return MiModel(classes, prototypes, adaptation_alpha, adaptation_period)


def classify(c: SpdMatrix, model: MiModel) -> Classification:
    """Label a covariance by its nearest prototype."""
    if c.dim != model.dim:
        raise ValueError(f"dimension mismatch: {c.dim} vs model {model.dim}")
    dists = [riemannian_distance(c, p) for p in model.prototypes]
    best = 0
    for i in range(1, len(dists)):
        if dists[i] < dists[best]:  # ties keep the earlier class
            best = i
    others = [d for i, d in enumerate(dists) if i != best]
    d1, d2 = dists[best], min(others)
    score = 0.0 if d1 == d2 else (d2 - d1) / (d2 + d1)
    return Classification(
        model.classes[best], tuple(zip(model.classes, dists)), score
    )


def adapt(model: MiModel, batch: list[tuple[SpdMatrix, str]]) -> MiModel:
    """Blend each class prototype toward the mean of its new covariances.

    new = geodesic(old, mean(new data), alpha): a small alpha keeps the old
    prototype heavily weighted.  Classes without new data are untouched;
    the pending buffer is cleared either way.
    """
    by_class: dict[str, list[SpdMatrix]] = {}
    for mat, label in batch:
        if label not in model.classes:
            raise ValueError(f"label {label!r} is not a model class")
        by_class.setdefault(label, []).append(mat)
    prototypes = list(model.prototypes)
    if model.adaptation_alpha > 0:
        for label, mats in by_class.items():
            idx = model.classes.index(label)
            target = frechet_mean(mats)
            prototypes[idx] = geodesic(prototypes[idx], target, model.adaptation_alpha)
    return replace(model, prototypes=tuple(prototypes), pending=())


def with_pending(model: MiModel, additions: list[tuple[str, SpdMatrix]]) -> MiModel:
    """Queue labeled covariances for the next periodic update."""
    return replace(model, pending=model.pending + tuple(additions))


def restrict_model(model: MiModel, classes) -> MiModel:
    """Sub-model over `classes` (kept in model order), pending dropped."""
    kept = tuple(c for c in model.classes if c in set(classes))
    return MiModel(
        kept,
        tuple(model.prototype(c) for c in kept),
        model.adaptation_alpha,
        model.adaptation_period,
    )


def observe(model: MiModel, c: SpdMatrix, label: str) -> MiModel:
    """Buffer one labeled epoch, adapting when the period fills up."""
    if label not in model.classes:
        raise ValueError(f"label {label!r} is not a model class")
    model = with_pending(model, [(label, c)])
    if len(model.pending) >= model.adaptation_period:
        return adapt(model, [(mat, lab) for lab, mat in model.pending])
    return model


def performance_metrics(
    labeled: list[tuple[SpdMatrix, str]], model: MiModel
) -> tuple[float, dict[str, float]]:
    """Between-class separability and per-class consistency.

    dispersion_k = mean distance of class-k covariances to their prototype;
    separability = min over class pairs of d(proto_a, proto_b) /
    (dispersion_a + dispersion_b), capped at 1e6 when both classes collapse
    onto their prototypes; consistency_k = 1 / (1 + std of class-k
    distances).
    """
    dists: dict[str, list[float]] = {c: [] for c in model.classes}
    for mat, label in labeled:
        if label not in dists:
            raise ValueError(f"label {label!r} is not a model class")
        dists[label].append(riemannian_distance(mat, model.prototype(label)))
    starved = [c for c, d in dists.items() if len(d) < 2]
    if starved:
        raise ValueError(f"classes with fewer than 2 examples: {starved}")
    dispersion = {c: float(np.mean(d)) for c, d in dists.items()}
    consistency = {c: float(1.0 / (1.0 + np.std(d))) for c, d in dists.items()}
    separability = SEPARABILITY_CAP
    for i, a in enumerate(model.classes):
        for b in model.classes[i + 1 :]:
            gap = riemannian_distance(model.prototype(a), model.prototype(b))
            spread = dispersion[a] + dispersion[b]
            if gap == 0.0:
                ratio = 0.0
            elif spread == 0.0:
                ratio = SEPARABILITY_CAP
            else:
                ratio = min(gap / spread, SEPARABILITY_CAP)
            separability = min(separability, ratio)
    return separability, consistency


# ---------------------------------------------------------------------------
# Snapshot format: versioned, self-describing JSON that round-trips exactly.


def model_to_document(model: MiModel) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "classes": list(model.classes),
        "dim": model.dim,
        "adaptation_alpha": model.adaptation_alpha,
        "adaptation_period": model.adaptation_period,
        "prototypes": [
            [float(v) for v in p.entries.ravel()] for p in model.prototypes
        ],
        "pending": [
            [label, [float(v) for v in mat.entries.ravel()]]
            for label, mat in model.pending
        ],
    }


def model_from_document(doc: dict) -> MiModel:
    if not isinstance(doc, dict) or doc.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotError("not a model snapshot")
    if doc.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported snapshot version: {doc.get('version')!r}")
    try:
        dim = int(doc["dim"])
        classes = tuple(str(c) for c in doc["classes"])
        prototypes = tuple(
            SpdMatrix(np.array(entries, dtype=float).reshape(dim, dim))
            for entries in doc["prototypes"]
        )
        pending = tuple(
            (str(label), SpdMatrix(np.array(entries, dtype=float).reshape(dim, dim)))
            for label, entries in doc["pending"]
        )
        return MiModel(
            classes,
            prototypes,
            float(doc["adaptation_alpha"]),
            int(doc["adaptation_period"]),
            pending,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SnapshotError):
            raise
        raise SnapshotError(f"malformed model snapshot: {exc}") from exc


def save_model(model: MiModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_document(model), fh)
        fh.write("\n")


def load_model(path) -> MiModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"malformed model snapshot: {exc}") from exc
    return model_from_document(doc)


def models_equal(a: MiModel, b: MiModel) -> bool:
    """Field-for-field equality, exact on prototype entries."""
    return (
        a.classes == b.classes
        and a.adaptation_alpha == b.adaptation_alpha
        and a.adaptation_period == b.adaptation_period
        and all(pa == pb for pa, pb in zip(a.prototypes, b.prototypes))
        and len(a.pending) == len(b.pending)
        and all(
            la == lb and ma == mb
            for (la, ma), (lb, mb) in zip(a.pending, b.pending)
        )
    )
