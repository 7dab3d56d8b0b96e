"""Parse NDJSON frame streams and re-derive their per-frame statistics.

The stream contract: line 1 is a header object {"config": <resolved run
config>}; every further line is one frame with fields t, dt, f, i_plus,
i_minus (null for one-phase runs), stats. Frames must arrive with
strictly increasing t and constant array lengths. Parse problems raise
StreamFormatError naming the offending line number.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

_FRAME_FIELDS = ("t", "dt", "f", "i_plus", "i_minus", "stats")


class StreamFormatError(ValueError):
    """Malformed stream; the message starts with 'line <k>:'."""


@dataclass(frozen=True)
class Frame:
    t: float
    dt: float
    f: np.ndarray
    i_plus: np.ndarray
    i_minus: Optional[np.ndarray]
    stats: dict


@dataclass(frozen=True)
class FrameStream:
    config: dict
    frames: list

    @property
    def dx(self) -> float:
        grid = self.config["grid"]
        return grid["period"] / grid["n_x"]

    def times(self) -> np.ndarray:
        return np.array([fr.t for fr in self.frames])

    def recomputed_stats(self, frame: Frame) -> dict:
        return {
            "f_min": float(frame.f.min()),
            "f_max": float(frame.f.max()),
            "lipschitz": float(np.max(np.abs(np.roll(frame.f, -1) - frame.f))
                               / self.dx),
            "dt": float(frame.dt),
        }

    def check_stats(self) -> None:
        """Embedded stats must equal the recomputation bit for bit."""
        for k, frame in enumerate(self.frames):
            rec = self.recomputed_stats(frame)
            if rec != frame.stats:
                raise StreamFormatError(
                    f"line {k + 2}: embedded stats {frame.stats} disagree "
                    f"with recomputed {rec}")

    def lipschitz_curve(self) -> np.ndarray:
        dx = self.dx
        return np.array([
            np.max(np.abs(np.roll(fr.f, -1) - fr.f)) / dx
            for fr in self.frames
        ])


def _parse_json(line: str, lineno: int):
    try:
        return json.loads(line)
    except json.JSONDecodeError as e:
        raise StreamFormatError(f"line {lineno}: invalid JSON: {e}") from e


def _parse_frame(obj, lineno: int) -> Frame:
    if not isinstance(obj, dict):
        raise StreamFormatError(f"line {lineno}: frame is not an object")
    missing = [k for k in _FRAME_FIELDS if k not in obj]
    if missing:
        raise StreamFormatError(
            f"line {lineno}: missing frame fields {missing}")
    extra = [k for k in obj if k not in _FRAME_FIELDS]
    if extra:
        raise StreamFormatError(
            f"line {lineno}: unknown frame fields {extra}")
    i_minus = obj["i_minus"]
    return Frame(
        t=float(obj["t"]),
        dt=float(obj["dt"]),
        f=np.asarray(obj["f"], dtype=float),
        i_plus=np.asarray(obj["i_plus"], dtype=float),
        i_minus=None if i_minus is None else np.asarray(i_minus, dtype=float),
        stats=dict(obj["stats"]),
    )


def load_stream(path) -> FrameStream:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise StreamFormatError("line 1: empty stream, expected a header")
    header = _parse_json(lines[0], 1)
    if not isinstance(header, dict) or "config" not in header:
        raise StreamFormatError("line 1: header must be {'config': ...}")
    config = header["config"]

    frames = []
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise StreamFormatError(f"line {k}: blank line inside the stream")
        frames.append(_parse_frame(_parse_json(line, k), k))
    if not frames:
        raise StreamFormatError("line 2: stream holds no frames")

    n = frames[0].f.size
    prev_t = -np.inf
    for k, fr in enumerate(frames):
        lineno = k + 2
        if fr.f.size != n or fr.i_plus.size != n or (
                fr.i_minus is not None and fr.i_minus.size != n):
            raise StreamFormatError(
                f"line {lineno}: array length changed (expected {n})")
        if not fr.t > prev_t:
            raise StreamFormatError(
                f"line {lineno}: t={fr.t} does not increase past {prev_t}")
        prev_t = fr.t
    return FrameStream(config, frames)
