import numpy as np
import pytest

from parmi.classifier import (
    MiModel,
    SnapshotError,
    adapt,
    classify,
    load_model,
    model_from_document,
    model_to_document,
    models_equal,
    observe,
    performance_metrics,
    save_model,
    train,
)
from parmi.eeg import IDLE, PipelineConfig, epoch_covariances
from parmi.simulate import DriftSpec, EegSimConfig, SimScenario, TaskInterval, gen_eeg, ideal_covariance
from parmi.spd import SpdMatrix, random_spd, riemannian_distance


def mi_schedule(duration, tasks=("right_hand", "left_hand"), block=5.0, rest=5.0):
    sched, t, k = [], rest, 0
    while t + block + rest <= duration:
        sched.append(TaskInterval(t, t + block, tasks[k % len(tasks)]))
        t += block + rest
        k += 1
    return tuple(sched)


def labeled_covariances(seed, duration=120.0, cfg=None, **eeg_kwargs):
    sc = SimScenario(
        seed=seed, duration=duration, eeg=EegSimConfig(schedule=mi_schedule(duration), **eeg_kwargs)
    )
    covs = epoch_covariances(gen_eeg(sc), cfg or PipelineConfig())
    return [(c, lab) for _, lab, c in covs], sc


def toy_model(alpha=0.1, period=4):
    a = SpdMatrix(np.diag([1.0, 1.0]))
    b = SpdMatrix(np.diag([4.0, 1.0]))
    return MiModel((IDLE, "right_hand"), (a, b), alpha, period)


# --- train -------------------------------------------------------------------


def test_train_identical_points_give_those_prototypes():
    a = random_spd(np.random.default_rng(0), 3)
    b = random_spd(np.random.default_rng(1), 3)
    model = train([(a, IDLE), (a, IDLE), (b, "right_hand"), (b, "right_hand")])
    assert model.classes == (IDLE, "right_hand")
    np.testing.assert_allclose(model.prototype(IDLE).entries, a.entries, atol=1e-9)
    np.testing.assert_allclose(model.prototype("right_hand").entries, b.entries, atol=1e-9)


def test_train_starved_class_lists_offenders():
    a = SpdMatrix(np.eye(2))
    with pytest.raises(ValueError, match="right_hand"):
        train([(a, IDLE), (a, IDLE), (a, "right_hand")])


def test_train_requires_idle_class():
    a = SpdMatrix(np.eye(2))
    with pytest.raises(ValueError, match="idle"):
        train([(a, "x"), (a, "x"), (a, "y"), (a, "y")])


def test_train_recovers_generator_prototypes():
    # long unfiltered epochs keep the estimation bias well under the bound
    cfg = PipelineConfig(shrinkage=0.0, epoch_seconds=2.0, overlap_fraction=0.0)
    sc = SimScenario(seed=31, duration=120.0, eeg=EegSimConfig(schedule=mi_schedule(120.0)))
    covs = epoch_covariances(gen_eeg(sc), cfg, prefiltered=True)
    model = train([(c, lab) for _, lab, c in covs])
    for lab in model.classes:
        delta = riemannian_distance(model.prototype(lab), ideal_covariance(sc, lab))
        assert delta <= 0.2, (lab, delta)


# --- classify ----------------------------------------------------------------


def test_classify_prototype_itself():
    model = toy_model()
    result = classify(model.prototype("right_hand"), model)
    assert result.label == "right_hand"
    assert dict(result.distances)["right_hand"] == 0.0
    assert result.score == 1.0


def test_classify_tie_prefers_earlier_class():
    # bit-exact tie: both prototypes at the same point
    a = SpdMatrix(np.diag([2.0, 2.0]))
    model = MiModel((IDLE, "right_hand"), (a, a))
    result = classify(SpdMatrix(np.diag([3.0, 2.0])), model)
    assert result.label == IDLE
    assert result.score == 0.0
    # near-tie: the midpoint of two commuting prototypes scores ~0
    model2 = MiModel((IDLE, "right_hand"), (SpdMatrix(np.eye(2)), SpdMatrix(np.diag([4.0, 4.0]))))
    assert classify(SpdMatrix(np.diag([2.0, 2.0])), model2).score == pytest.approx(0.0, abs=1e-12)


def test_classify_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        classify(SpdMatrix(np.eye(3)), toy_model())


def test_classify_heldout_synthetic_accuracy():
    train_set, _ = labeled_covariances(seed=31)
    model = train(train_set)
    test_set, _ = labeled_covariances(seed=32)
    hits = sum(classify(c, model).label == lab for c, lab in test_set[:200])
    assert hits / 200 >= 0.90


def test_classify_congruence_invariance_of_decisions():
    train_set, _ = labeled_covariances(seed=41, duration=60.0)
    model = train(train_set)
    rng = np.random.default_rng(0)
    w = rng.normal(size=(model.dim, model.dim))
    def congr(m):
        x = w @ m.entries @ w.T
        return SpdMatrix(0.5 * (x + x.T))
    mapped_model = MiModel(
        model.classes, tuple(congr(p) for p in model.prototypes),
        model.adaptation_alpha, model.adaptation_period,
    )
    test_set, _ = labeled_covariances(seed=42, duration=60.0)
    for c, _ in test_set[:40]:
        assert classify(c, model).label == classify(congr(c), mapped_model).label


def test_classify_unaffected_by_distant_extra_class():
    model = toy_model()
    probe = SpdMatrix(np.diag([1.1, 1.0]))
    base = classify(probe, model)
    far = SpdMatrix(np.diag([1000.0, 1000.0]))
    extended = MiModel(
        model.classes + ("feet",), model.prototypes + (far,),
        model.adaptation_alpha, model.adaptation_period,
    )
    assert classify(probe, extended).label == base.label


# --- adapt -------------------------------------------------------------------


def test_adapt_alpha_zero_is_identity():
    model = toy_model(alpha=0.0)
    new = adapt(model, [(SpdMatrix(np.diag([9.0, 9.0])), IDLE)])
    assert models_equal(new, model)


def test_adapt_alpha_one_jumps_to_new_data():
    model = toy_model(alpha=1.0)
    target = SpdMatrix(np.diag([9.0, 2.0]))
    new = adapt(model, [(target, "right_hand")])
    np.testing.assert_allclose(new.prototype("right_hand").entries, target.entries, atol=1e-9)
    assert new.prototype(IDLE) == model.prototype(IDLE)


def test_adapt_empty_batch_idempotent():
    model = toy_model()
    assert models_equal(adapt(model, []), model)


def test_adapt_unknown_label_rejected():
    with pytest.raises(ValueError, match="not a model class"):
        adapt(toy_model(), [(SpdMatrix(np.eye(2)), "feet")])


def test_observe_fires_on_period():
    model = toy_model(alpha=0.5, period=2)
    c = SpdMatrix(np.diag([2.0, 2.0]))
    m1 = observe(model, c, IDLE)
    assert len(m1.pending) == 1
    assert models_equal(
        MiModel(m1.classes, m1.prototypes, m1.adaptation_alpha, m1.adaptation_period),
        MiModel(model.classes, model.prototypes, model.adaptation_alpha, model.adaptation_period),
    )
    m2 = observe(m1, c, IDLE)
    assert m2.pending == ()
    assert m2.prototype(IDLE) != model.prototype(IDLE)


def test_adaptation_tracks_covariance_drift():
    for scale, min_gain in ((1.5, 0.0), (2.0, 0.05)):
        sc = SimScenario(
            seed=91,
            duration=480.0,
            eeg=EegSimConfig(schedule=mi_schedule(480.0)),
            drift=DriftSpec(at=120.0, scale=scale),
        )
        covs = epoch_covariances(gen_eeg(sc), PipelineConfig())
        pre = [(c, lab) for end, lab, c in covs if end <= 120.0]
        post = [(c, lab) for end, lab, c in covs if end > 122.0]
        final, stream = post[-200:], post[:-200]
        static = train(pre)
        adaptive = static
        period = static.adaptation_period
        for i in range(0, len(stream), period):
            adaptive = adapt(adaptive, stream[i : i + period])
        acc_static = np.mean([classify(c, static).label == lab for c, lab in final])
        acc_adapted = np.mean([classify(c, adaptive).label == lab for c, lab in final])
        assert acc_adapted >= acc_static + min_gain, (scale, acc_static, acc_adapted)


# --- metrics -----------------------------------------------------------------


def test_metrics_collapsed_classes_hit_cap():
    a = SpdMatrix(np.diag([1.0, 1.0]))
    b = SpdMatrix(np.diag([4.0, 1.0]))
    model = MiModel((IDLE, "right_hand"), (a, b))
    sep, cons = performance_metrics([(a, IDLE), (a, IDLE), (b, "right_hand"), (b, "right_hand")], model)
    assert sep == 1e6
    assert cons == {IDLE: 1.0, "right_hand": 1.0}


def test_metrics_identical_prototypes_zero_separability():
    a = SpdMatrix(np.diag([2.0, 2.0]))
    model = MiModel((IDLE, "right_hand"), (a, a))
    probe = SpdMatrix(np.diag([2.5, 2.0]))
    sep, _ = performance_metrics([(probe, IDLE), (probe, IDLE), (probe, "right_hand"), (probe, "right_hand")], model)
    assert sep == 0.0


def test_metrics_starved_class_rejected():
    model = toy_model()
    a = SpdMatrix(np.eye(2))
    with pytest.raises(ValueError, match="fewer than 2"):
        performance_metrics([(a, IDLE), (a, IDLE), (a, "right_hand")], model)


def test_metrics_separability_grows_with_erd_depth():
    shallow, _ = labeled_covariances(seed=31)
    m1 = train(shallow)
    sep1, _ = performance_metrics(shallow, m1)
    deep, _ = labeled_covariances(seed=31, erd_depth=0.6)
    m2 = train(deep)
    sep2, _ = performance_metrics(deep, m2)
    assert sep2 > sep1


def test_metrics_congruence_invariant():
    data, _ = labeled_covariances(seed=51, duration=60.0)
    model = train(data)
    sep, _ = performance_metrics(data, model)
    rng = np.random.default_rng(3)
    w = rng.normal(size=(model.dim, model.dim))
    def congr(m):
        x = w @ m.entries @ w.T
        return SpdMatrix(0.5 * (x + x.T))
    mapped = [(congr(c), lab) for c, lab in data]
    mapped_model = MiModel(
        model.classes, tuple(congr(p) for p in model.prototypes),
        model.adaptation_alpha, model.adaptation_period,
    )
    sep_mapped, _ = performance_metrics(mapped, mapped_model)
    assert sep_mapped == pytest.approx(sep, abs=1e-6)


# --- snapshots ---------------------------------------------------------------


def test_snapshot_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(8)
    model = MiModel(
        (IDLE, "right_hand", "left_hand"),
        tuple(random_spd(rng, 4) for _ in range(3)),
        adaptation_alpha=0.17,
        adaptation_period=12,
        pending=((IDLE, random_spd(rng, 4)), ("left_hand", random_spd(rng, 4))),
    )
    path = tmp_path / "model.json"
    save_model(model, path)
    assert models_equal(load_model(path), model)


def test_snapshot_truncated_file_is_malformed(tmp_path):
    model = toy_model()
    path = tmp_path / "model.json"
    save_model(model, path)
    content = path.read_text()
    path.write_text(content[: len(content) // 2])
    with pytest.raises(SnapshotError, match="malformed"):
        load_model(path)


def test_snapshot_version_mismatch(tmp_path):
    doc = model_to_document(toy_model())
    doc["version"] = 99
    with pytest.raises(SnapshotError, match="version"):
        model_from_document(doc)
