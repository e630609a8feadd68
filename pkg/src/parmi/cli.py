"""Command-line entry points.

    parmi simulate -c session.yaml -o out/      scenario -> stream files
    parmi run      -c session.yaml              free-use session -> log
    parmi train    -c session.yaml              training session -> log
    parmi replay   -c session.yaml --log L      re-run a log, verify equality
    parmi serve    -c session.yaml              run + console endpoint
    parmi metrics  --log L [--model M]          recompute metrics from a log

Exit codes: 0 ok, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import classifier as clf
from .io import write_eeg_csv, write_frames, write_pupil_csv
from .session import (
    KIND_EEG_EPOCH,
    KIND_SNAPSHOT,
    CommandBridge,
    ConfigError,
    ReplayError,
    SessionEngine,
    load_config,
    read_log,
    replay,
    replay_matches,
)
from .simulate import gen_eeg, gen_pupil, render_frames
from .spd import SpdMatrix


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parmi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", required=True, help="session config (YAML)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("-o", "--output-dir", help="override the output directory")

    p = sub.add_parser("simulate", help="write scenario stream files")
    common(p)
    p.add_argument("--frames", action="store_true", help="also render eye frames (PGM)")

    p = sub.add_parser("run", help="run a free-use session")
    common(p)
    p.add_argument("--log", help="log file path (default <output>/free_use.log)")

    p = sub.add_parser("train", help="run a neurofeedback training session")
    common(p)
    p.add_argument("--log", help="log file path (default <output>/training.log)")

    p = sub.add_parser("replay", help="re-run a session from its log")
    common(p)
    p.add_argument("--log", required=True, help="the log to replay")

    p = sub.add_parser("serve", help="run a session with a live console endpoint")
    common(p)
    p.add_argument("--endpoint", help="host:port (default from config, else 127.0.0.1:0)")
    p.add_argument("--speed", type=float, help="wall-clock pacing factor (0 = flat out)")
    p.add_argument("--log", help="log file path")
    p.add_argument(
        "--wait-client", action="store_true",
        help="hold the session until a console connects (30 s timeout)",
    )

    p = sub.add_parser("metrics", help="recompute performance metrics from a log")
    p.add_argument("--log", required=True)
    p.add_argument("--model", help="model snapshot (default: the log's final snapshot)")
    return parser


def _load(args) -> "SessionConfig":
    overrides = {}
    if args.seed is not None:
        overrides["scenario.seed"] = args.seed
    if getattr(args, "output_dir", None):
        overrides["session.output_dir"] = args.output_dir
    if getattr(args, "endpoint", None):
        overrides["session.endpoint"] = args.endpoint
    if getattr(args, "speed", None) is not None:
        overrides["session.speed"] = args.speed
    return load_config(args.config, overrides)


def _cmd_simulate(args) -> int:
    config = _load(args)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stream = gen_eeg(config.scenario)
    write_eeg_csv(stream, out / "eeg.csv")
    trace = gen_pupil(config.scenario)
    write_pupil_csv(trace, out / "pupil.csv")
    made = [out / "eeg.csv", out / "pupil.csv"]
    if args.frames:
        frames = render_frames(trace, config.scenario)
        write_frames(frames, out / "frames")
        made.append(out / "frames")
    for p in made:
        print(p)
    return 0


def _cmd_run(args, kind: str) -> int:
    config = _load(args)
    log_path = Path(args.log) if args.log else None
    engine = SessionEngine(config, kind, log_path=log_path)
    path = engine.run()
    print(path)
    return 0


def _cmd_replay(args) -> int:
    config = _load(args)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    replayed = replay(config, args.log, out / "replay.log")
    if replay_matches(args.log, replayed):
        print(f"{replayed} (matches original ui_state/action sequences)")
        return 0
    print(f"{replayed} DIVERGES from {args.log}", file=sys.stderr)
    return 2


def _cmd_serve(args) -> int:
    from .console import ConsoleServer  # local import: sockets only when serving

    config = _load(args)
    if config.endpoint is None:
        config = dataclasses.replace(config, endpoint=("127.0.0.1", 0))
    if getattr(args, "speed", None) is None and config.speed == 0.0:
        config = dataclasses.replace(config, speed=1.0)
    bridge = CommandBridge()
    server = ConsoleServer(config.endpoint[0], config.endpoint[1], bridge)
    host, port = server.address
    print(f"listening on {host}:{port}", flush=True)
    log_path = Path(args.log) if args.log else None
    engine = SessionEngine(config, "free_use", log_path=log_path, bridge=bridge)
    engine.log.subscribe(server.broadcast)
    if args.wait_client:
        server.wait_for_client()
    try:
        path = engine.run()
    finally:
        server.close()
    print(path)
    return 0


def _cmd_metrics(args) -> int:
    _, events = read_log(args.log)
    labeled = []
    dim = None
    for e in events:
        if e.kind == KIND_EEG_EPOCH:
            cov = e.payload["cov"]
            if dim is None:
                dim = int(round(len(cov) ** 0.5))
            labeled.append((SpdMatrix(np.array(cov).reshape(dim, dim)), e.payload["label"]))
    if args.model:
        model = clf.load_model(args.model)
    else:
        snapshots = [e for e in events if e.kind == KIND_SNAPSHOT]
        if not snapshots:
            raise ReplayError("log has no model snapshot; pass --model")
        model = clf.model_from_document(snapshots[-1].payload["model"])
    present = {lab for _, lab in labeled}
    model = clf.restrict_model(model, present & set(model.classes))
    labeled = [(c, lab) for c, lab in labeled if lab in model.classes]
    separability, consistency = clf.performance_metrics(labeled, model)
    print(json.dumps({"separability": separability, "consistency": consistency}, sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "run":
            return _cmd_run(args, "free_use")
        if args.command == "train":
            return _cmd_run(args, "training")
        if args.command == "replay":
            return _cmd_replay(args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "metrics":
            return _cmd_metrics(args)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ReplayError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
