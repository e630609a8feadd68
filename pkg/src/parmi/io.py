"""File formats: EEG stream CSV, pupil trace CSV, PGM frame sequences.

Every format opens with a version field so readers can refuse files they do
not understand.  Numeric values are written with `repr`, which round-trips
doubles exactly.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .eeg import EegStream, IDLE
from .pupil import EyeFrame, PupilSample

EEG_MAGIC = "parmi-eeg"
PUPIL_MAGIC = "parmi-pupil"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """File does not match the expected layout or version."""


def write_eeg_csv(stream: EegStream, path) -> None:
    """One row per sample: channel values then the task label (if any)."""
    names = stream.channel_names or tuple(f"ch{i}" for i in range(stream.n_channels))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([EEG_MAGIC, f"version={FORMAT_VERSION}", f"fs={stream.fs!r}"])
        writer.writerow(list(names) + ["label"])
        has_labels = stream.label_track is not None
        for i in range(stream.n_samples):
            row = [repr(float(v)) for v in stream.samples[:, i]]
            row.append(str(stream.label_track[i]) if has_labels else "")
            writer.writerow(row)


def read_eeg_csv(path) -> EegStream:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            magic = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if not magic or magic[0] != EEG_MAGIC:
            raise FormatError(f"{path}: not an EEG stream file")
        fields = dict(f.split("=", 1) for f in magic[1:] if "=" in f)
        if int(fields.get("version", -1)) != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {fields.get('version')!r}")
        fs = float(fields["fs"])
        header = next(reader)
        if header[-1] != "label":
            raise FormatError(f"{path}: missing label column")
        names = tuple(header[:-1])
        samples, labels = [], []
        for row in reader:
            if not row:
                continue
            samples.append([float(v) for v in row[:-1]])
            labels.append(row[-1])
    if not samples:
        raise FormatError(f"{path}: no samples")
    data = np.array(samples, dtype=float).T
    label_track = None
    if any(labels):
        label_track = np.array([lab if lab else IDLE for lab in labels], dtype=object)
    return EegStream(fs, data, label_track=label_track, channel_names=names)


def write_pupil_csv(samples: list[PupilSample], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([PUPIL_MAGIC, f"version={FORMAT_VERSION}"])
        writer.writerow(["timestamp", "area", "valid"])
        for s in samples:
            writer.writerow([repr(s.timestamp), repr(s.area), int(s.valid)])


def read_pupil_csv(path) -> list[PupilSample]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            magic = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if not magic or magic[0] != PUPIL_MAGIC:
            raise FormatError(f"{path}: not a pupil trace file")
        fields = dict(f.split("=", 1) for f in magic[1:] if "=" in f)
        if int(fields.get("version", -1)) != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {fields.get('version')!r}")
        next(reader)  # column header
        out = []
        for row in reader:
            if not row:
                continue
            out.append(PupilSample(float(row[0]), float(row[1]), bool(int(row[2]))))
    if not out:
        raise FormatError(f"{path}: no samples")
    return out


# ---------------------------------------------------------------------------
# PGM frames.  Binary (P5) with the capture timestamp in a comment line, so a
# directory of frames is self-contained.


def write_pgm(frame: EyeFrame, path) -> None:
    img = np.asarray(frame.intensity, dtype=np.uint8)
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n")
        fh.write(f"# t={frame.timestamp!r}\n".encode("ascii"))
        fh.write(f"{width} {height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> EyeFrame:
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM file")
    pos = 2
    tokens: list[bytes] = []
    timestamp = 0.0
    while len(tokens) < 3:
        if pos >= len(data):
            raise FormatError(f"{path}: truncated header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            end = data.index(b"\n", pos)
            comment = data[pos:end].decode("ascii", "replace")
            match = re.search(r"t=([-+0-9.eE]+)", comment)
            if match:
                timestamp = float(match.group(1))
            pos = end + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit frames supported")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data[pos : pos + width * height], dtype=np.uint8)
    if pixels.size != width * height:
        raise FormatError(f"{path}: truncated pixel data")
    return EyeFrame(pixels.reshape(height, width).copy(), timestamp)


def write_frames(frames: list[EyeFrame], directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(frames):
        p = directory / f"frame_{i:06d}.pgm"
        write_pgm(frame, p)
        paths.append(p)
    return paths


def read_frames(directory) -> list[EyeFrame]:
    paths = sorted(Path(directory).glob("frame_*.pgm"))
    if not paths:
        raise FormatError(f"{directory}: no frames found")
    return [read_pgm(p) for p in paths]
