"""Session orchestration: configuration, the driver loop, event logs, replay.

A session fuses the pupil and EEG pipelines with the menu state machine and
persists everything as a line-delimited JSON event log: one gap-free,
monotonically ordered record per event.  Logs are complete (console delivery
may drop, the file never does) and are the replay source of truth: feeding a
log's recorded samples back through the same loop reproduces the ui_state
and action sequences byte for byte.

The driver is single-threaded; a console service (see `console.py`) talks to
it only through queues, and its commands are merged into the event order as
first-class `operator` events so replays capture operator behavior.
"""

from __future__ import annotations

import json
import queue
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from . import classifier as clf
from . import ui as ui_mod
from .classifier import MiModel, load_model, save_model
from .eeg import IDLE, PipelineConfig, epoch_covariances
from .io import read_eeg_csv, read_pupil_csv
from .pupil import (
    CommandSchedule,
    ParDetector,
    PromptCycle,
    PupilConfig,
    PupilSample,
    StreamingConditioner,
    classify_par_command,
)
from .simulate import (
    Constriction,
    DriftSpec,
    EegSimConfig,
    PupilSimConfig,
    SimScenario,
    TaskInterval,
    gen_eeg,
    gen_pupil,
)
from .spd import SpdMatrix
from .training import PhasePlan, TrialProtocol, UnlockCriterion, run_session
from .ui import MenuDef, MenuItem, ModeThresholds, UiEvent, default_menu, initial_state

LOG_FORMAT = "parmi-session-log"
LOG_VERSION = 1

KIND_EEG_EPOCH = "eeg_epoch"
KIND_PUPIL_SAMPLE = "pupil_sample"
KIND_PAR_EVENT = "par_event"
KIND_CLASSIFICATION = "classification"
KIND_FEEDBACK = "feedback"
KIND_UI_STATE = "ui_state"
KIND_ACTION = "action"
KIND_METRICS = "metrics"
KIND_MODE_CHANGE = "mode_change"
KIND_SNAPSHOT = "snapshot"
KIND_OPERATOR = "operator"  # inbound console commands, first-class for replay

OPERATOR_COMMANDS = ("inject_par", "inject_mi", "press_button", "pause", "resume", "set_speed")

MODEL_FILENAME = "model_final.json"


class ConfigError(ValueError):
    """Session configuration is invalid."""


class ReplayError(RuntimeError):
    """Log cannot drive a replay (truncated, wrong kind, underrun)."""


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class MiGate:
    """Turns streaming classifications into discrete shortcut events."""

    score_floor: float = 0.5
    consecutive: int = 3


@dataclass(frozen=True)
class SessionConfig:
    scenario: SimScenario
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    pupil: PupilConfig = field(default_factory=PupilConfig)
    menu: MenuDef = field(default_factory=default_menu)
    protocol: TrialProtocol = field(default_factory=TrialProtocol)
    curriculum: tuple[str, ...] = (IDLE, "right_hand", "left_hand")
    mode: str = ui_mod.MODE_PAR_ONLY
    mode_thresholds: ModeThresholds = field(default_factory=ModeThresholds)
    shortcuts: tuple[tuple[str, str], ...] = ()
    mi_gate: MiGate = field(default_factory=MiGate)
    classifier_alpha: float = 0.1
    classifier_period: int = 16
    command_schedule: CommandSchedule | None = None
    model_path: Path | None = None
    replay_eeg: Path | None = None
    replay_pupil: Path | None = None
    output_dir: Path = Path("out")
    endpoint: tuple[str, int] | None = None
    speed: float = 0.0  # wall-clock pacing factor; 0 = run flat out

    def __post_init__(self):
        if self.mode not in (ui_mod.MODE_PAR_ONLY, ui_mod.MODE_MULTIMODAL):
            raise ConfigError(f"unknown interaction mode {self.mode!r}")
        item_ids = {i.id for i in self.menu.items}
        for label, item in self.shortcuts:
            if item not in item_ids:
                raise ConfigError(f"shortcut {label!r} -> {item!r}: no such menu item")
        for path in (self.model_path, self.replay_eeg, self.replay_pupil):
            if path is not None and not Path(path).exists():
                raise ConfigError(f"referenced file does not exist: {path}")
        if (self.replay_eeg is None) != (self.replay_pupil is None):
            raise ConfigError("stream replay needs both an EEG and a pupil file")


def _build_scenario(raw: dict) -> SimScenario:
    eeg_raw = dict(raw.get("eeg", {}))
    schedule = tuple(
        TaskInterval(float(s), float(e), str(lab))
        for s, e, lab in eeg_raw.pop("schedule", [])
    )
    pupil_raw = dict(raw.get("pupil", {}))
    par_schedule = tuple(
        Constriction(float(o), float(d), float(depth))
        for o, d, depth in pupil_raw.pop("schedule", [])
    )
    drift = None
    if raw.get("drift"):
        drift = DriftSpec(float(raw["drift"]["at"]), float(raw["drift"]["scale"]))
    return SimScenario(
        seed=int(raw.get("seed", 0)),
        duration=float(raw.get("duration", 30.0)),
        eeg=EegSimConfig(schedule=schedule, **eeg_raw),
        pupil=PupilSimConfig(schedule=par_schedule, **pupil_raw),
        drift=drift,
    )


def config_from_dict(doc: dict, base_dir: Path | None = None) -> SessionConfig:
    """Build and validate a SessionConfig from parsed YAML."""
    base = Path(base_dir) if base_dir else Path.cwd()

    def resolve(p):
        return None if p is None else (base / p if not Path(p).is_absolute() else Path(p))

    try:
        doc = doc or {}
        scenario = _build_scenario(doc.get("scenario", {}))
        pipeline = PipelineConfig(**doc.get("pipeline", {}))
        pupil = PupilConfig(**doc.get("pupil", {}))

        ui_raw = dict(doc.get("ui", {}))
        if "items" in ui_raw:
            items = tuple(MenuItem(str(i), str(c), str(a)) for i, c, a in ui_raw["items"])
            menu = MenuDef(
                items=items,
                dwell=float(ui_raw.get("dwell", 1.0)),
                speller_keys=tuple(ui_raw.get("speller_keys", ("A", "B", "C"))),
            )
        else:
            menu = default_menu()
            if "dwell" in ui_raw:
                menu = replace(menu, dwell=float(ui_raw["dwell"]))
        shortcuts = tuple(
            (str(k), str(v)) for k, v in ui_raw.get("shortcuts", {}).items()
        )
        unlock = ModeThresholds(**ui_raw.get("unlock", {}))

        training_raw = dict(doc.get("training", {}))
        curriculum = tuple(training_raw.pop("curriculum", (IDLE, "right_hand", "left_hand")))
        protocol = TrialProtocol(
            phases=PhasePlan(**training_raw.get("phases", {})),
            trials_per_run=int(training_raw.get("trials_per_run", 6)),
            active_tasks=tuple(training_raw.get("active_tasks", (IDLE, "right_hand"))),
            unlock_criterion=UnlockCriterion(**training_raw.get("unlock", {})),
        )

        session_raw = dict(doc.get("session", {}))
        gate = MiGate(**session_raw.get("mi_gate", {}))
        endpoint = None
        if session_raw.get("endpoint"):
            host, _, port = str(session_raw["endpoint"]).rpartition(":")
            endpoint = (host or "127.0.0.1", int(port))

        schedule = None
        if doc.get("command_schedule"):
            cs = doc["command_schedule"]
            cycles = tuple(
                PromptCycle((float(a), float(b)), (float(c), float(d)))
                for a, b, c, d in cs.get("cycles", [])
            )
            schedule = CommandSchedule(cycles, float(cs.get("boundary", 1.0)))

        replay_raw = doc.get("replay_inputs", {}) or {}

        return SessionConfig(
            scenario=scenario,
            pipeline=pipeline,
            pupil=pupil,
            menu=menu,
            protocol=protocol,
            curriculum=curriculum,
            mode=str(session_raw.get("mode", ui_mod.MODE_PAR_ONLY)),
            mode_thresholds=unlock,
            shortcuts=shortcuts,
            mi_gate=gate,
            classifier_alpha=float(doc.get("classifier", {}).get("alpha", 0.1)),
            classifier_period=int(doc.get("classifier", {}).get("period", 16)),
            command_schedule=schedule,
            model_path=resolve(session_raw.get("model")),
            replay_eeg=resolve(replay_raw.get("eeg")),
            replay_pupil=resolve(replay_raw.get("pupil")),
            output_dir=resolve(session_raw.get("output_dir", "out")),
            endpoint=endpoint,
            speed=float(session_raw.get("speed", 0.0)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid session config: {exc}") from exc


def load_config(path, overrides: dict | None = None) -> SessionConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a mapping, got {type(doc).__name__}")
    for key, value in (overrides or {}).items():
        section, _, leaf = key.partition(".")
        if leaf:
            doc.setdefault(section, {})[leaf] = value
        else:
            doc[section] = value
    return config_from_dict(doc, base_dir=Path(path).parent)


# ---------------------------------------------------------------------------
# Event log


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    t: float
    kind: str
    payload: dict

    def to_line(self) -> str:
        return json.dumps(
            {"seq": self.seq, "t": self.t, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )


def header_line(session_kind: str, seed: int) -> str:
    return json.dumps(
        {"format": LOG_FORMAT, "version": LOG_VERSION, "session": session_kind, "seed": seed},
        sort_keys=True,
        separators=(",", ":"),
    )


class EventLog:
    """Gap-free sequencing plus persistence and observer fan-out."""

    def __init__(self, path: Path | None, session_kind: str, seed: int):
        self.path = Path(path) if path else None
        self.events: list[SessionEvent] = []
        self._observers: list[Callable[[str], None]] = []
        self._fh = None
        self._header = header_line(session_kind, seed)
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "w", encoding="utf-8")
            self._fh.write(self._header + "\n")

    def subscribe(self, fn: Callable[[str], None]) -> None:
        self._observers.append(fn)

    def emit(self, kind: str, t: float, payload: dict) -> SessionEvent:
        event = SessionEvent(len(self.events), t, kind, payload)
        self.events.append(event)
        line = event.to_line()
        if self._fh:
            self._fh.write(line + "\n")
        for fn in self._observers:
            fn(line)
        return event

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None


def read_log(path) -> tuple[dict, list[SessionEvent]]:
    """Parse a log file into its header and events, validating sequence order."""
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise ReplayError(f"{path}: malformed log header: {exc}") from exc
        if header.get("format") != LOG_FORMAT or header.get("version") != LOG_VERSION:
            raise ReplayError(f"{path}: not a session log (or wrong version)")
        last_t = -float("inf")
        for n, raw in enumerate(fh):
            if not raw.strip():
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ReplayError(f"{path}: malformed event line {n + 2}: {exc}") from exc
            event = SessionEvent(doc["seq"], doc["t"], doc["kind"], doc["payload"])
            if event.seq != len(events):
                raise ReplayError(f"{path}: sequence gap at seq={event.seq}")
            if event.t < last_t:
                raise ReplayError(f"{path}: timestamps regress at seq={event.seq}")
            last_t = event.t
            events.append(event)
    return header, events


# ---------------------------------------------------------------------------
# Command bridge (console service <-> driver loop)


class CommandBridge:
    """Thread-safe inbox of operator commands for the driver loop."""

    def __init__(self):
        self._queue: queue.Queue = queue.Queue()
        self.stopped = False

    def submit(self, command: dict) -> None:
        self._queue.put(command)

    def stop(self) -> None:
        self.stopped = True
        self._queue.put({"cmd": "__stop__"})

    def drain(self) -> list[dict]:
        out = []
        while True:
            try:
                out.append(self._queue.get_nowait())
            except queue.Empty:
                return out

    def wait(self, timeout: float = 0.1) -> dict | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None


def validate_command(doc) -> str | None:
    """Returns an error message for a bad operator command, else None."""
    if not isinstance(doc, dict) or "cmd" not in doc:
        return "command must be an object with a 'cmd' field"
    cmd = doc["cmd"]
    if cmd not in OPERATOR_COMMANDS:
        return f"unknown command {cmd!r}"
    if cmd == "inject_mi" and not isinstance(doc.get("label"), str):
        return "inject_mi needs a string 'label'"
    if cmd == "set_speed":
        factor = doc.get("factor")
        if not isinstance(factor, (int, float)) or factor < 0:
            return "set_speed needs a nonnegative numeric 'factor'"
    return None


# ---------------------------------------------------------------------------
# Engine


def _ui_state_payload(state) -> dict:
    return {
        "view": state.view,
        "entries": [[e.id, e.caption] for e in state.entries],
        "highlighted": state.highlighted,
        "mode": state.mode,
        "origin": state.selection_origin,
    }


class SessionEngine:
    """Single-owner driver for free-use and training sessions."""

    def __init__(
        self,
        config: SessionConfig,
        session_kind: str = "free_use",
        log_path: Path | None = None,
        bridge: CommandBridge | None = None,
    ):
        if session_kind not in ("free_use", "training"):
            raise ConfigError(f"unknown session kind {session_kind!r}")
        self.config = config
        self.kind = session_kind
        self.bridge = bridge
        self.speed = config.speed
        self.paused = False
        out = Path(config.output_dir)
        self.log_path = log_path if log_path is not None else out / f"{session_kind}.log"
        self.log = EventLog(self.log_path, session_kind, config.scenario.seed)

    # -- inputs --------------------------------------------------------------

    def _pupil_input(self) -> list[PupilSample]:
        if self.config.replay_pupil:
            return read_pupil_csv(self.config.replay_pupil)
        return gen_pupil(self.config.scenario)

    def _eeg_input(self):
        if self.config.replay_eeg:
            return read_eeg_csv(self.config.replay_eeg)
        return gen_eeg(self.config.scenario)

    def _initial_model(self) -> MiModel | None:
        if self.config.model_path is None:
            return None
        model = load_model(self.config.model_path)
        return replace(
            model,
            adaptation_alpha=self.config.classifier_alpha,
            adaptation_period=self.config.classifier_period,
        )

    # -- main entry ----------------------------------------------------------

    def run(self) -> Path:
        try:
            if self.kind == "training":
                self._run_training()
            else:
                epochs = []
                if self.config.model_path is not None:
                    epochs = [
                        {"end": end, "label": label, "cov": [float(v) for v in cov.entries.ravel()]}
                        for end, label, cov in epoch_covariances(self._eeg_input(), self.config.pipeline)
                    ]
                pupil = [
                    {"t": s.timestamp, "area": s.area, "valid": int(s.valid)}
                    for s in self._pupil_input()
                ]
                self._drive(pupil, epochs, operator_script=None)
        finally:
            self.log.close()
        return self.log_path

    # -- training ------------------------------------------------------------

    def _run_training(self) -> None:
        cfg = self.config
        model = self._initial_model()
        if model is None:
            raise ConfigError("training sessions need an initial model (session.model)")
        self.log.emit(KIND_MODE_CHANGE, 0.0, {"mode": cfg.mode, "shortcuts": dict(cfg.shortcuts)})
        outcome = run_session(
            cfg.protocol, model, cfg.scenario, cfg.pipeline, curriculum=cfg.curriculum
        )
        observed = list(outcome.observed)
        for k, result in enumerate(outcome.results):
            end_t = (k + 1) * cfg.protocol.trial_length
            while observed and observed[0][0] <= end_t:
                t, label, cov = observed.pop(0)
                self.log.emit(
                    KIND_EEG_EPOCH,
                    t,
                    {"end": t, "label": label, "cov": [float(v) for v in cov.entries.ravel()]},
                )
            self.log.emit(
                KIND_FEEDBACK,
                end_t,
                {
                    "task": result.task,
                    "samples": [[t, s] for t, s in result.feedback_samples],
                    "mean_score": result.mean_score,
                    "epochs": result.epochs_used,
                },
            )
        session_end = cfg.protocol.trials_per_run * cfg.protocol.trial_length
        self.log.emit(
            KIND_METRICS,
            session_end,
            {
                "separability": outcome.separability,
                "consistency": outcome.consistency,
                "active_next": list(outcome.active_tasks),
                "adaptations": outcome.adaptations,
            },
        )
        self._snapshot(outcome.model, session_end)

    # -- free use ------------------------------------------------------------

    def _drive(self, pupil: list[dict], epochs: list[dict], operator_script) -> None:
        """The session loop over recorded-or-generated input samples.

        `pupil` rows: {t, area, valid}; `epochs` rows: {end, label, cov}.
        `operator_script`, when replaying, maps step index -> operator docs.
        """
        cfg = self.config
        model = self._initial_model()
        if epochs and model is None:
            raise ConfigError("classifier epochs present but no model configured")
        shortcuts = dict(cfg.shortcuts) if cfg.mode == ui_mod.MODE_MULTIMODAL else {}
        state = initial_state(cfg.menu, mode=cfg.mode, shortcuts=shortcuts)
        conditioner = StreamingConditioner(cfg.pupil)
        detector = ParDetector(cfg.pupil)
        gate_label: str | None = None
        gate_run = 0
        gate_armed = True
        epoch_idx = 0
        wall_prev = time.monotonic()

        self.log.emit(
            KIND_MODE_CHANGE, 0.0, {"mode": cfg.mode, "shortcuts": dict(cfg.shortcuts)}
        )
        self.log.emit(KIND_UI_STATE, 0.0, _ui_state_payload(state))

        def apply_ui(event: UiEvent, t: float):
            nonlocal state
            before = _ui_state_payload(state)
            state, actions = ui_mod.on_event(state, event)
            # actions first: the ui_state that enabled them already sits in
            # the log, and the post-transition state follows
            for action in actions:
                self.log.emit(
                    KIND_ACTION,
                    t,
                    {"kind": action.kind, "item": action.item_id, "payload": action.payload},
                )
            after = _ui_state_payload(state)
            if after != before:
                self.log.emit(KIND_UI_STATE, t, after)

        def handle_operator(doc: dict, t: float):
            nonlocal gate_label, gate_run
            cmd = doc["cmd"]
            payload = {k: v for k, v in doc.items() if k != "cmd"}
            payload["command"] = cmd
            self.log.emit(KIND_OPERATOR, t, payload)
            if cmd == "inject_par":
                apply_ui(UiEvent("par_task", t), t)
            elif cmd == "inject_mi":
                apply_ui(UiEvent("mi", t, label=doc["label"]), t)
            elif cmd == "press_button":
                apply_ui(UiEvent("external_button", t), t)
            elif cmd == "set_speed":
                self.speed = float(doc["factor"])
            elif cmd == "pause":
                self.paused = True
            elif cmd == "resume":
                self.paused = False

        def drain_commands(t: float):
            if operator_script is not None:
                return  # replay injects from the script instead
            if self.bridge is None:
                return
            for doc in self.bridge.drain():
                if doc.get("cmd") == "__stop__":
                    raise _StopSession()
                handle_operator(doc, t)
            while self.paused:
                doc = self.bridge.wait(timeout=0.05)
                if doc is None:
                    continue
                if doc.get("cmd") == "__stop__":
                    raise _StopSession()
                handle_operator(doc, t)

        try:
            for step, sample in enumerate(pupil):
                t = sample["t"]

                # 1) arrow sweep up to the sample time
                if t > state.clock:
                    before = _ui_state_payload(state)
                    state = ui_mod.tick(state, t - state.clock)
                    if _ui_state_payload(state) != before:
                        self.log.emit(KIND_UI_STATE, t, _ui_state_payload(state))

                # 2) classifier epochs due by now
                while epoch_idx < len(epochs) and epochs[epoch_idx]["end"] <= t:
                    row = epochs[epoch_idx]
                    epoch_idx += 1
                    self.log.emit(KIND_EEG_EPOCH, t, dict(row))
                    cov = SpdMatrix(
                        np.array(row["cov"], dtype=float).reshape(model.dim, model.dim)
                    )
                    result = clf.classify(cov, model)
                    self.log.emit(
                        KIND_CLASSIFICATION,
                        t,
                        {
                            "label": result.label,
                            "score": result.score,
                            "distances": {k: v for k, v in result.distances},
                        },
                    )
                    if result.label != gate_label or result.score < cfg.mi_gate.score_floor:
                        gate_label = result.label if result.score >= cfg.mi_gate.score_floor else None
                        gate_run = 1 if gate_label else 0
                        gate_armed = True
                    else:
                        gate_run += 1
                    if (
                        gate_armed
                        and gate_label
                        and gate_label != IDLE
                        and gate_run >= cfg.mi_gate.consecutive
                    ):
                        gate_armed = False  # one shortcut per sustained run
                        apply_ui(UiEvent("mi", t, label=gate_label), t)

                # 3) the pupil sample itself
                outs = conditioner.push(
                    PupilSample(sample["t"], sample["area"], bool(sample["valid"]))
                )
                payload = {"t": sample["t"], "area": sample["area"], "valid": sample["valid"]}
                if outs and outs[-1][0] == t and outs[-1][2]:
                    payload["n"] = outs[-1][1]
                self.log.emit(KIND_PUPIL_SAMPLE, t, payload)

                # 4) constriction events closing at this sample
                for ot, ov, ook in outs:
                    for ev in detector.push(ot, ov, ook):
                        par_payload = {
                            "onset": ev.onset,
                            "duration": ev.duration,
                            "depth": ev.depth,
                            "source": "stream",
                        }
                        if cfg.command_schedule is not None:
                            par_payload["command"] = classify_par_command(ev, cfg.command_schedule)
                        self.log.emit(KIND_PAR_EVENT, t, par_payload)
                        apply_ui(UiEvent("par_task", t), t)

                # 5) operator commands at this step
                if operator_script is not None:
                    for doc in operator_script.get(step, []):
                        handle_operator(doc, t)
                else:
                    drain_commands(t)

                # 6) wall-clock pacing
                if self.speed > 0 and step + 1 < len(pupil):
                    dt = pupil[step + 1]["t"] - t
                    lag = (wall_prev + dt / self.speed) - time.monotonic()
                    if lag > 0:
                        time.sleep(lag)
                    wall_prev = time.monotonic()
        except _StopSession:
            pass

        end_t = pupil[-1]["t"] if pupil else 0.0
        if model is not None:
            self._snapshot(model, end_t)

    def _snapshot(self, model: MiModel, t: float) -> None:
        doc = clf.model_to_document(model)
        self.log.emit(KIND_SNAPSHOT, t, {"model": doc})
        out = Path(self.config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_model(model, out / MODEL_FILENAME)


class _StopSession(Exception):
    pass


# ---------------------------------------------------------------------------
# Replay


def replay(config: SessionConfig, log_file, out_log: Path) -> Path:
    """Re-run a free-use session from its own recorded samples.

    Generator outputs are replaced by the logged pupil samples and epoch
    covariances; operator commands re-enter at the step where they were
    recorded.  The produced log must match the original on the ui_state and
    action sequences (and, run for run, the whole file).
    """
    header, events = read_log(log_file)
    if header.get("session") != "free_use":
        raise ReplayError("only free_use sessions replay from samples; training "
                          "sessions re-run deterministically from their config")
    pupil = [e.payload for e in events if e.kind == KIND_PUPIL_SAMPLE]
    if not pupil:
        raise ReplayError("log holds no pupil samples to replay")
    epochs = [e.payload for e in events if e.kind == KIND_EEG_EPOCH]

    # map each operator command to the index of the pupil step it followed
    script: dict[int, list[dict]] = {}
    step = -1
    for e in events:
        if e.kind == KIND_PUPIL_SAMPLE:
            step += 1
        elif e.kind == KIND_OPERATOR:
            doc = {"cmd": e.payload["command"]}
            doc.update({k: v for k, v in e.payload.items() if k != "command"})
            script.setdefault(max(step, 0), []).append(doc)

    engine = SessionEngine(config, "free_use", log_path=out_log)
    engine.speed = 0.0  # replays never pace against the wall clock
    try:
        engine._drive(pupil, epochs, operator_script=script)
    finally:
        engine.log.close()
    return out_log


def replay_matches(original_log, replayed_log, kinds=(KIND_UI_STATE, KIND_ACTION)) -> bool:
    """Byte-compare the chosen event kinds between two logs."""
    def lines(path):
        _, events = read_log(path)
        return [e.to_line() for e in events if e.kind in kinds]

    return lines(original_log) == lines(replayed_log)
