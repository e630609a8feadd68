import json

from parmi.cli import main
from parmi.io import read_eeg_csv, read_pupil_csv
from parmi.session import read_log


def write_config(tmp_path, extra=""):
    path = tmp_path / "session.yaml"
    path.write_text(
        "scenario:\n"
        "  seed: 11\n"
        "  duration: 8.0\n"
        "  pupil:\n"
        "    schedule: [[0.75, 0.3, 0.4], [1.45, 0.3, 0.4]]\n"
        "    noise_level: 0.0\n"
        f"session:\n  output_dir: {tmp_path / 'out'}\n"
        + extra
    )
    return path


def test_simulate_writes_streams(tmp_path, capsys):
    config = write_config(tmp_path)
    assert main(["simulate", "-c", str(config)]) == 0
    out = tmp_path / "out"
    stream = read_eeg_csv(out / "eeg.csv")
    assert stream.fs == 256.0
    trace = read_pupil_csv(out / "pupil.csv")
    assert len(trace) == 8 * 30


def test_run_then_replay_roundtrip(tmp_path, capsys):
    config = write_config(tmp_path)
    assert main(["run", "-c", str(config), "--log", str(tmp_path / "run.log")]) == 0
    assert main(["replay", "-c", str(config), "--log", str(tmp_path / "run.log")]) == 0
    captured = capsys.readouterr()
    assert "matches original" in captured.out


def test_run_from_recorded_streams(tmp_path, capsys):
    config = write_config(tmp_path)
    assert main(["simulate", "-c", str(config)]) == 0
    replay_cfg = tmp_path / "replay.yaml"
    replay_cfg.write_text(
        "scenario:\n  seed: 11\n  duration: 8.0\n"
        f"session:\n  output_dir: {tmp_path / 'out2'}\n"
        "replay_inputs:\n"
        f"  eeg: {tmp_path / 'out' / 'eeg.csv'}\n"
        f"  pupil: {tmp_path / 'out' / 'pupil.csv'}\n"
    )
    assert main(["run", "-c", str(replay_cfg), "--log", str(tmp_path / "rec.log")]) == 0
    _, events = read_log(tmp_path / "rec.log")
    assert [e.payload["kind"] for e in events if e.kind == "action"] == ["caregiver_call"]


def test_missing_config_is_exit_1(tmp_path, capsys):
    assert main(["run", "-c", str(tmp_path / "nope.yaml")]) == 1


def test_invalid_config_is_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("session:\n  mode: warp\n")
    assert main(["run", "-c", str(bad)]) == 1


def test_metrics_from_training_log(tmp_path, capsys):
    import numpy as np

    from parmi.classifier import save_model, train
    from parmi.eeg import PipelineConfig, epoch_covariances
    from parmi.simulate import EegSimConfig, SimScenario, TaskInterval, gen_eeg

    sched = []
    t = 5.0
    k = 0
    while t + 10.0 <= 120.0:
        sched.append(TaskInterval(t, t + 5.0, ("right_hand", "left_hand")[k % 2]))
        t += 10.0
        k += 1
    sc = SimScenario(seed=31, duration=120.0, eeg=EegSimConfig(schedule=tuple(sched)))
    model = train([(c, lab) for _, lab, c in epoch_covariances(gen_eeg(sc), PipelineConfig())])
    save_model(model, tmp_path / "model.json")

    config = tmp_path / "train.yaml"
    config.write_text(
        "scenario:\n  seed: 90\n  duration: 1.0\n"
        f"session:\n  output_dir: {tmp_path / 'out'}\n  model: {tmp_path / 'model.json'}\n"
    )
    assert main(["train", "-c", str(config), "--log", str(tmp_path / "train.log")]) == 0
    capsys.readouterr()
    assert main(["metrics", "--log", str(tmp_path / "train.log")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["separability"] > 0
    assert set(doc["consistency"]) == {"idle", "right_hand"}


def test_seed_override_changes_log(tmp_path):
    config = write_config(tmp_path)
    main(["run", "-c", str(config), "--log", str(tmp_path / "a.log")])
    main(["run", "-c", str(config), "--seed", "99", "--log", str(tmp_path / "b.log")])
    assert (tmp_path / "a.log").read_bytes() != (tmp_path / "b.log").read_bytes()
