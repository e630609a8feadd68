import numpy as np
import pytest

from parmi.eeg import IDLE
from parmi.simulate import (
    Constriction,
    DriftSpec,
    EegSimConfig,
    PupilSimConfig,
    SimScenario,
    TaskInterval,
    gen_eeg,
    gen_pupil,
    ideal_covariance,
    render_frames,
    schedule_from_label_track,
    task_channel_groups,
)

from oracles import band_power_welch


def mi_schedule(duration, tasks=("right_hand", "left_hand"), block=5.0, rest=5.0):
    sched, t, k = [], rest, 0
    while t + block + rest <= duration:
        sched.append(TaskInterval(t, t + block, tasks[k % len(tasks)]))
        t += block + rest
        k += 1
    return tuple(sched)


def test_scenario_validation():
    with pytest.raises(ValueError, match="overlap"):
        SimScenario(
            seed=0,
            duration=20.0,
            eeg=EegSimConfig(
                schedule=(TaskInterval(1, 5, "a"), TaskInterval(4, 8, "b"))
            ),
        )
    with pytest.raises(ValueError, match="outside"):
        SimScenario(
            seed=0,
            duration=5.0,
            pupil=PupilSimConfig(schedule=(Constriction(4.0, 2.0, 0.3),)),
        )


def test_eeg_empty_schedule_is_all_idle():
    stream = gen_eeg(SimScenario(seed=1, duration=4.0))
    assert all(lab == IDLE for lab in stream.label_track)
    assert stream.n_samples == 4 * 256


def test_eeg_deterministic_under_seed():
    sc = SimScenario(seed=7, duration=6.0, eeg=EegSimConfig(schedule=mi_schedule(6.0)))
    a, b = gen_eeg(sc), gen_eeg(sc)
    assert np.array_equal(a.samples, b.samples)
    assert list(a.label_track) == list(b.label_track)


def test_eeg_different_seeds_differ():
    a = gen_eeg(SimScenario(seed=1, duration=2.0))
    b = gen_eeg(SimScenario(seed=2, duration=2.0))
    assert not np.array_equal(a.samples, b.samples)


def test_erd_band_power_ratio():
    sc = SimScenario(seed=21, duration=120.0, eeg=EegSimConfig(schedule=mi_schedule(120.0)))
    stream = gen_eeg(sc)
    ch = task_channel_groups(sc.eeg)["right_hand"][0]
    mask = stream.label_track == "right_hand"
    ratio = band_power_welch(stream.samples[ch][mask], sc.eeg.fs, 8.0, 30.0) / band_power_welch(
        stream.samples[ch][~mask], sc.eeg.fs, 8.0, 30.0
    )
    assert ratio == pytest.approx(0.7, abs=0.1)


def test_erd_leaves_other_group_alone():
    sc = SimScenario(seed=21, duration=120.0, eeg=EegSimConfig(schedule=mi_schedule(120.0)))
    stream = gen_eeg(sc)
    modulated = set(task_channel_groups(sc.eeg)["right_hand"])
    ch = next(c for c in range(sc.eeg.channels) if c not in modulated)
    mask = stream.label_track == "right_hand"
    ratio = band_power_welch(stream.samples[ch][mask], sc.eeg.fs, 8.0, 30.0) / band_power_welch(
        stream.samples[ch][~mask], sc.eeg.fs, 8.0, 30.0
    )
    assert ratio == pytest.approx(1.0, abs=0.1)


def test_lateralization_rule():
    sched = (TaskInterval(1, 2, "right_hand"), TaskInterval(3, 4, "left_hand"))
    cfg = EegSimConfig(schedule=sched)
    groups = task_channel_groups(cfg)
    assert list(groups["right_hand"]) == [0, 1]
    assert list(groups["left_hand"]) == [2, 3]


def test_schedule_roundtrip_from_label_track():
    sched = mi_schedule(60.0)
    stream = gen_eeg(SimScenario(seed=3, duration=60.0, eeg=EegSimConfig(schedule=sched)))
    recovered = schedule_from_label_track(stream)
    assert [(i.start, i.end, i.label) for i in recovered] == [
        (i.start, i.end, i.label) for i in sched
    ]


def test_drift_scales_covariance():
    sc = SimScenario(seed=22, duration=120.0, drift=DriftSpec(at=60.0, scale=1.5))
    stream = gen_eeg(sc)
    fs = int(sc.eeg.fs)
    pre = np.cov(stream.samples[:, : 55 * fs])
    post = np.cov(stream.samples[:, 65 * fs :])
    assert np.trace(post) / np.trace(pre) == pytest.approx(1.5, rel=0.10)


def test_pupil_deterministic_and_independent_of_eeg():
    sc = SimScenario(seed=9, duration=5.0)
    t1 = gen_pupil(sc)
    t2 = gen_pupil(sc)
    assert [(s.timestamp, s.area) for s in t1] == [(s.timestamp, s.area) for s in t2]
    # changing the eeg schedule must not perturb the pupil stream
    sc2 = SimScenario(
        seed=9, duration=5.0, eeg=EegSimConfig(schedule=(TaskInterval(1, 2, "right_hand"),))
    )
    t3 = gen_pupil(sc2)
    assert [(s.timestamp, s.area) for s in t1] == [(s.timestamp, s.area) for s in t3]


def test_pupil_constriction_profile_depth():
    sc = SimScenario(
        seed=4,
        duration=12.0,
        pupil=PupilSimConfig(
            schedule=(Constriction(6.0, 2.0, 0.4),), noise_level=0.0, hippus_amplitude=0.0
        ),
    )
    trace = gen_pupil(sc)
    areas = np.array([s.area for s in trace])
    base = sc.pupil.baseline_area
    held = [s.area for s in trace if 6.3 <= s.timestamp <= 7.6]
    assert np.allclose(held, base * 0.6, rtol=1e-6)
    assert areas.max() == pytest.approx(base, rel=1e-6)


def test_ideal_covariance_matches_long_run_sample_covariance():
    sc = SimScenario(seed=23, duration=120.0)
    stream = gen_eeg(sc)
    sample = np.cov(stream.samples)
    ideal = ideal_covariance(sc, IDLE).entries
    assert np.allclose(np.diag(sample), np.diag(ideal), rtol=0.1)
    off = sample[~np.eye(sc.eeg.channels, dtype=bool)]
    assert np.max(np.abs(off)) < 0.1 * np.max(np.diag(ideal))


def test_rendered_frames_carry_trace_timestamps():
    sc = SimScenario(seed=5, duration=0.5)
    trace = gen_pupil(sc)
    frames = render_frames(trace, sc)
    assert len(frames) == len(trace)
    assert [f.timestamp for f in frames] == [s.timestamp for s in trace]
