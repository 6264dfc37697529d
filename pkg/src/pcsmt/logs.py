"""Execution-log ingestion and seed extraction.

Log files are JSON Lines, one entry per line::

    {"seq": 17, "markers": [[x, y], ...], "found": true, "indexes": [0, 1, 2]}

A seed is the ordered list of true-marker triplets that survived the
marker-count, classification and spatial-continuity filters.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import NoUsableSeed
from .geometry import FRAME_SIZE, Marker, MarkerSample, TripletGeometry, round_point
from .sut import CORRECT, PcsOutput, SutConfig, find_true_markers

log = logging.getLogger(__name__)

DEFAULT_MAX_STEP = 2000.0
DEFAULT_SYNTH_STEP = 500.0


@dataclass(frozen=True)
class LogEntry:
    sequence_number: int
    markers: tuple[Marker, ...]
    recorded_output: PcsOutput

    def __post_init__(self):
        object.__setattr__(self, "markers", tuple(Marker(int(m[0]), int(m[1])) for m in self.markers))

    def to_json(self) -> dict:
        obj = {"seq": self.sequence_number, "markers": [[m.x, m.y] for m in self.markers]}
        obj.update(self.recorded_output.to_json())
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "LogEntry":
        return cls(
            int(obj["seq"]),
            tuple(Marker(int(x), int(y)) for x, y in obj["markers"]),
            PcsOutput.from_json(obj),
        )


@dataclass(frozen=True)
class SeedInput:
    samples: tuple[tuple[Marker, Marker, Marker], ...]

    def __post_init__(self):
        samples = []
        for t in self.samples:
            if len(t) != 3:
                raise ValueError(f"seed samples are triplets, got {len(t)} markers")
            samples.append(tuple(Marker(int(m[0]), int(m[1])) for m in t))
        object.__setattr__(self, "samples", tuple(samples))

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def as_samples(self) -> list[MarkerSample]:
        return [MarkerSample(tuple(t)) for t in self.samples]


def read_log(path) -> Iterator[LogEntry]:
    """Stream entries from a JSON Lines log, checking sequence numbers increase."""
    last = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                entry = LogEntry.from_json(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad log entry: {exc}") from exc
            if last is not None and entry.sequence_number <= last:
                raise ValueError(f"{path}:{lineno}: sequence number {entry.sequence_number} not increasing")
            last = entry.sequence_number
            yield entry


def write_log(entries: Iterable[LogEntry], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e.to_json(), separators=(",", ":")) + "\n")


def read_seed(path) -> SeedInput:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                samples.append(tuple(Marker(int(x), int(y)) for x, y in obj["markers"]))
    return SeedInput(tuple(samples))


def write_seed(seed: SeedInput, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, t in enumerate(seed.samples):
            fh.write(json.dumps({"index": i, "markers": [[m.x, m.y] for m in t]}, separators=(",", ":")) + "\n")


def _max_displacement(a, b) -> float:
    return max(math.hypot(p.x - q.x, p.y - q.y) for p, q in zip(a, b))


def extract_seed(entries: Iterable[LogEntry], max_step: float = DEFAULT_MAX_STEP) -> SeedInput:
    """Keep correctly classified 3-marker entries that move smoothly.

    Continuity is checked marker by marker against the last entry that was
    kept, so a single spike is dropped without taking its successors with it.
    """
    if not max_step > 0:
        raise ValueError("max_step must be positive")
    kept: list[tuple[Marker, Marker, Marker]] = []
    for e in entries:
        if len(e.markers) != 3 or e.recorded_output != CORRECT:
            continue
        triplet = tuple(e.markers)
        if kept and _max_displacement(kept[-1], triplet) > max_step:
            log.debug("seq %d dropped: discontinuous", e.sequence_number)
            continue
        kept.append(triplet)
    if not kept:
        raise NoUsableSeed("no usable seed: no log entry passed the filters")
    return SeedInput(tuple(kept))


def verify_seed(seed: SeedInput, sut) -> tuple[SeedInput, list[int]]:
    """Run each seed triplet alone through ``sut``; return (kept, rejected indexes)."""
    results = sut.find_many(seed.as_samples())
    kept, rejected = [], []
    for i, (t, out) in enumerate(zip(seed.samples, results)):
        if out == CORRECT:
            kept.append(t)
        else:
            rejected.append(i)
    if rejected:
        log.info("verify_seed rejected %d of %d samples", len(rejected), len(seed))
    return SeedInput(tuple(kept)), rejected


def synthesize_log(
    n_entries: int,
    geometry: TripletGeometry | None = None,
    rng_seed: int = 0,
    step: float = DEFAULT_SYNTH_STEP,
    config: SutConfig | None = None,
) -> list[LogEntry]:
    """Random-walk trajectory of geometry-exact triplets, labelled by the reference SUT.

    Triplets are axis-aligned, so integer coordinates reproduce the geometry
    exactly. Each step moves the whole triplet by at most ``step`` pixels;
    walks that would leave the frame are reflected back inside.
    """
    if n_entries < 1:
        raise ValueError("n_entries must be >= 1")
    geometry = geometry or TripletGeometry()
    config = config or SutConfig(geometry=geometry)
    rng = np.random.default_rng(rng_seed)
    base = [round_point(p) for p in geometry.instance((0.0, 0.0))]
    lo_x = -min(p.x for p in base)
    hi_x = FRAME_SIZE - max(p.x for p in base)
    lo_y = -min(p.y for p in base)
    hi_y = FRAME_SIZE - max(p.y for p in base)
    if lo_x > hi_x or lo_y > hi_y:
        raise ValueError("geometry does not fit inside the frame")

    def reflect(v, lo, hi):
        while not lo <= v <= hi:
            v = 2 * lo - v if v < lo else 2 * hi - v
        return v

    cx = int(rng.integers(lo_x, hi_x + 1))
    cy = int(rng.integers(lo_y, hi_y + 1))
    r = int(step)
    entries = []
    for seq in range(n_entries):
        if seq:
            while True:
                dx, dy = (int(v) for v in rng.integers(-r, r + 1, size=2))
                if dx * dx + dy * dy <= step * step:
                    break
            cx, cy = reflect(cx + dx, lo_x, hi_x), reflect(cy + dy, lo_y, hi_y)
        markers = tuple(Marker(p.x + cx, p.y + cy) for p in base)
        entries.append(LogEntry(seq, markers, find_true_markers(markers, config)))
    return entries
