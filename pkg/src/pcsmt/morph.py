"""Follow-up input generation.

Exploration appends uniformly random noise markers to each seed triplet.
Exploitation appends a replica of the seed's side pair or of the whole
triplet, placed on a grid cell and rotated into a star around the cell centre.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .geometry import FRAME_SIZE, MAX_MARKERS, Marker, MarkerSample, centroid, in_frame, rotate_about
from .logs import SeedInput

log = logging.getLogger(__name__)

MAX_NOISE = MAX_MARKERS - 3


class Phase(str, Enum):
    EXPLORATION = "exploration"
    EXPLOITATION = "exploitation"


class ReplicaKind(str, Enum):
    SIDE_PAIR = "side_pair"
    FULL_TRIPLET = "full_triplet"


@dataclass(frozen=True)
class NoiseSpec:
    phase: Phase = Phase.EXPLORATION
    repetitions_per_length: int = 10
    noise_lengths: tuple[int, ...] = tuple(range(1, MAX_NOISE + 1))
    replica_kind: ReplicaKind = ReplicaKind.SIDE_PAIR
    rotation_angles: tuple[float, ...] = (0.0, 45.0, 90.0, 135.0)
    grid: tuple[int, int] = (25, 25)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase", Phase(self.phase))
        object.__setattr__(self, "replica_kind", ReplicaKind(self.replica_kind))
        object.__setattr__(self, "noise_lengths", tuple(int(n) for n in self.noise_lengths))
        object.__setattr__(self, "rotation_angles", tuple(float(a) for a in self.rotation_angles))
        if not self.noise_lengths or min(self.noise_lengths) < 1 or max(self.noise_lengths) > MAX_NOISE:
            raise ValueError(f"noise lengths must lie in [1, {MAX_NOISE}]")
        if self.repetitions_per_length < 1:
            raise ValueError("repetitions_per_length must be >= 1")
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise ValueError("grid needs at least one row and column")

    @classmethod
    def exploration(cls, **kw) -> "NoiseSpec":
        return cls(phase=Phase.EXPLORATION, **kw)

    @classmethod
    def exploitation(cls, replica_kind=ReplicaKind.SIDE_PAIR, **kw) -> "NoiseSpec":
        return cls(phase=Phase.EXPLOITATION, replica_kind=replica_kind, **kw)


class FollowUp(NamedTuple):
    seed_index: int
    sample: MarkerSample
    angle: Optional[float] = None

    def to_json(self) -> dict:
        obj = {"seed_index": self.seed_index, "markers": self.sample.to_json()}
        if self.angle is not None:
            obj["angle"] = self.angle
        return obj


@dataclass
class MorphedSuite:
    cases: list[FollowUp]
    discarded: int = 0
    # (seed_index, angle) pairs dropped because a replica marker left the frame
    discarded_cases: list[tuple[int, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.cases)

    def __iter__(self) -> Iterator[FollowUp]:
        return iter(self.cases)

    def __getitem__(self, i):
        return self.cases[i]

    @property
    def samples(self) -> list[MarkerSample]:
        return [c.sample for c in self.cases]


def noise_rng(rng_seed: int, seed_index: int, length: int, repetition: int) -> np.random.Generator:
    """Independent stream per generated sample, so any split of the work agrees."""
    ss = np.random.SeedSequence(rng_seed, spawn_key=(seed_index, length, repetition))
    return np.random.Generator(np.random.PCG64(ss))


def gen_exploration(seed: SeedInput, spec: NoiseSpec) -> MorphedSuite:
    if spec.phase is not Phase.EXPLORATION:
        raise ValueError("gen_exploration needs an EXPLORATION spec")
    cases = []
    for i, triplet in enumerate(seed.samples):
        head = tuple(triplet)
        for length in spec.noise_lengths:
            for rep in range(spec.repetitions_per_length):
                pts = noise_rng(spec.rng_seed, i, length, rep).integers(0, FRAME_SIZE + 1, size=(length, 2))
                noise = tuple(Marker(x, y) for x, y in pts.tolist())
                cases.append(FollowUp(i, MarkerSample(head + noise)))
    return MorphedSuite(cases)


def grid_centers(rows: int, cols: int) -> list[tuple[float, float]]:
    """Cell midpoints of an even rows x cols partition of the frame, row-major."""
    w, h = FRAME_SIZE / cols, FRAME_SIZE / rows
    return [((c + 0.5) * w, (r + 0.5) * h) for r in range(rows) for c in range(cols)]


def replica_markers(triplet, kind: ReplicaKind, center, angle: float) -> list[Marker]:
    """Replica of ``triplet`` (or its side pair) centred on ``center`` and rotated.

    The placement shift is rounded to whole pixels first, so an unrotated
    replica is an exact integer translation of the source markers.
    """
    src = list(triplet[:2]) if kind is ReplicaKind.SIDE_PAIR else list(triplet)
    cx, cy = centroid(src)
    sx, sy = round(center[0] - cx), round(center[1] - cy)
    moved = [(p[0] + sx, p[1] + sy) for p in src]
    if angle % 360 == 0:
        return [Marker(int(x), int(y)) for x, y in moved]
    rotated = rotate_about(moved, centroid(moved), angle)
    return [Marker(round(x), round(y)) for x, y in rotated]


def gen_exploitation(seed: SeedInput, spec: NoiseSpec) -> MorphedSuite:
    if spec.phase is not Phase.EXPLOITATION:
        raise ValueError("gen_exploitation needs an EXPLOITATION spec")
    centers = grid_centers(*spec.grid)
    if len(centers) < len(seed):
        raise ValueError(f"grid has {len(centers)} cells for {len(seed)} seed samples")
    suite = MorphedSuite([])
    for i, triplet in enumerate(seed.samples):
        center = centers[i % len(centers)]
        for angle in spec.rotation_angles:
            noise = replica_markers(triplet, spec.replica_kind, center, angle)
            if not all(in_frame(m) for m in noise):
                suite.discarded += 1
                suite.discarded_cases.append((i, angle))
                continue
            suite.cases.append(FollowUp(i, MarkerSample(tuple(triplet) + tuple(noise)), angle))
    if suite.discarded:
        log.info("exploitation discarded %d of %d candidates", suite.discarded, suite.discarded + len(suite))
    return suite


def generate(seed: SeedInput, spec: NoiseSpec) -> MorphedSuite:
    if spec.phase is Phase.EXPLORATION:
        return gen_exploration(seed, spec)
    return gen_exploitation(seed, spec)


def write_suite(suite: MorphedSuite, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for case in suite.cases:
            fh.write(json.dumps(case.to_json(), separators=(",", ":")) + "\n")


def read_suite(path) -> MorphedSuite:
    cases = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            cases.append(FollowUp(int(obj["seed_index"]), MarkerSample.of(obj["markers"]), obj.get("angle")))
    return MorphedSuite(cases)
