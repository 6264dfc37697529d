"""Reference implementation of the PCS find algorithm.

The real PLC program is not available, so this simulator stands in for it.
It enumerates every 3-subset of the input, scores it against the configured
triplet shape and picks a winner with two deliberately engineered weaknesses:

* two in-tolerance candidates that share a marker and whose scores are closer
  than ``ambiguity_margin`` make it give up (``found=False``), which is how a
  replicated side-marker pair produces false negatives;
* exact score ties between disjoint candidates are resolved by position
  (smallest minimum x, then y, then index triple), so an exact replica of the
  whole triplet placed further left is picked instead of the true markers.

Candidates whose side axis is tilted more than ``max_tilt_deg`` from the
horizontal are rejected: the hoisting frame hangs from the crane and cannot
rotate freely in the image plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .errors import InputDomainError
from .geometry import MAX_MARKERS, MIN_MARKERS, MarkerSample, TripletGeometry, measure

# (side, side, top) positions inside a candidate triple; the three choices of top.
_ROLE_ORDERS = ((0, 1, 2), (0, 2, 1), (1, 2, 0))

# Candidate-rows evaluated per numpy chunk; bounds peak memory.
_CHUNK_ROWS = 250_000


@dataclass(frozen=True)
class PcsOutput:
    found: bool
    indexes: Optional[tuple[int, int, int]] = None

    def __post_init__(self):
        if self.found:
            if self.indexes is None or len(self.indexes) != 3:
                raise ValueError("found output needs three indexes")
            if len(set(self.indexes)) != 3 or min(self.indexes) < 0:
                raise ValueError(f"indexes must be three distinct non-negative ints: {self.indexes}")
            object.__setattr__(self, "indexes", tuple(int(i) for i in self.indexes))
        elif self.indexes is not None:
            raise ValueError("indexes must be absent when found is false")

    @classmethod
    def hit(cls, *indexes) -> "PcsOutput":
        return cls(True, tuple(indexes))

    @classmethod
    def miss(cls) -> "PcsOutput":
        return cls(False)

    def to_json(self) -> dict:
        if self.found:
            return {"found": True, "indexes": list(self.indexes)}
        return {"found": False}

    @classmethod
    def from_json(cls, obj: dict) -> "PcsOutput":
        if obj.get("found"):
            return cls(True, tuple(obj["indexes"]))
        return cls(False)

    def __str__(self):
        return f"(true, {list(self.indexes)})" if self.found else "(false)"


CORRECT = PcsOutput.hit(0, 1, 2)


@dataclass(frozen=True)
class SutConfig:
    geometry: TripletGeometry = field(default_factory=TripletGeometry)
    ambiguity_margin: float = 1.0
    max_tilt_deg: float = 20.0

    def __post_init__(self):
        if self.ambiguity_margin < 0:
            raise ValueError("ambiguity_margin must be non-negative")
        if not 0 <= self.max_tilt_deg <= 90:
            raise ValueError("max_tilt_deg must lie in [0, 90]")


def candidate_score(candidate, config: SutConfig) -> float:
    """Scalar score the SUT gives one candidate: shape deviation, with
    assignments whose side axis exceeds the tilt limit excluded.

    This is the slow, readable twin of the vectorised kernel below.
    """
    pts = [(float(p[0]), float(p[1])) for p in candidate]
    if pts[0] == pts[1] or pts[0] == pts[2] or pts[1] == pts[2]:
        return math.inf
    g = config.geometry
    best = math.inf
    for i, j, k in _ROLE_ORDERS:
        a, b, top = pts[i], pts[j], pts[k]
        tilt = math.degrees(math.atan2(abs(b[1] - a[1]), abs(b[0] - a[0])))
        if tilt > config.max_tilt_deg:
            continue
        d, offset, skew = measure(a, b, top)
        dev = max(abs(d - g.side_distance), abs(offset - g.top_offset), abs(abs(skew) - abs(g.top_skew)))
        best = min(best, dev)
    return best


@lru_cache(maxsize=None)
def triples(n: int) -> np.ndarray:
    """All ascending index triples of ``range(n)`` in lexicographic order."""
    return np.array(list(combinations(range(n), 3)), dtype=np.int64).reshape(-1, 3)


def score_candidates(points: np.ndarray, config: SutConfig) -> np.ndarray:
    """Score every 3-subset of every sample in ``points`` (shape ``(B, n, 2)``).

    Returns an array of shape ``(B, C)`` aligned with ``triples(n)``.
    """
    g = config.geometry
    tri = triples(points.shape[1])
    cand = points[:, tri]  # (B, C, 3, 2)
    score = np.full(cand.shape[:2], np.inf)
    degenerate = np.zeros(cand.shape[:2], dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i, j, k in _ROLE_ORDERS:
            a, b, top = cand[:, :, i], cand[:, :, j], cand[:, :, k]
            dx = b[..., 0] - a[..., 0]
            dy = b[..., 1] - a[..., 1]
            d = np.hypot(dx, dy)
            degenerate |= d == 0
            ux, uy = dx / d, dy / d
            vx = top[..., 0] - (a[..., 0] + b[..., 0]) / 2
            vy = top[..., 1] - (a[..., 1] + b[..., 1]) / 2
            offset = np.abs(ux * vy - uy * vx)
            skew = ux * vx + uy * vy
            dev = np.maximum(
                np.abs(d - g.side_distance),
                np.maximum(np.abs(offset - g.top_offset), np.abs(np.abs(skew) - abs(g.top_skew))),
            )
            tilt = np.degrees(np.arctan2(np.abs(dy), np.abs(dx)))
            dev = np.where(tilt > config.max_tilt_deg, np.inf, dev)
            score = np.minimum(score, dev)
    score[degenerate] = np.inf
    return score


def _select(points: np.ndarray, score: np.ndarray, config: SutConfig):
    """Apply the decision rules to scored candidates; returns (found, best)."""
    tri = triples(points.shape[1])
    n_cand = tri.shape[0]
    intol = score <= config.geometry.tolerance
    best_score = np.where(intol, score, np.inf).min(axis=1)
    any_intol = intol.any(axis=1)

    xs = points[:, tri, 0].min(axis=2)
    ys = points[:, tri, 1].min(axis=2)
    tied = intol & (score == best_score[:, None])
    m = np.where(tied, xs, np.inf).min(axis=1)
    tied &= xs == m[:, None]
    m = np.where(tied, ys, np.inf).min(axis=1)
    tied &= ys == m[:, None]
    # triples are lexicographic, so the first tied column is the smallest index triple
    best = np.argmax(tied, axis=1)

    chosen = tri[best]  # (B, 3)
    overlap = (tri[None, :, :, None] == chosen[:, None, None, :]).any(axis=(2, 3))
    with np.errstate(invalid="ignore"):
        close = (score - best_score[:, None]) < config.ambiguity_margin
    rival = intol & overlap & close & (np.arange(n_cand)[None, :] != best[:, None])
    found = any_intol & ~rival.any(axis=1)
    return found, chosen


def find_batch(points, config: SutConfig) -> list[PcsOutput]:
    """Run the find algorithm on equally sized samples, ``points`` shaped ``(B, n, 2)``."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 3 or points.shape[2] != 2:
        raise InputDomainError(f"expected (B, n, 2) marker array, got shape {points.shape}")
    n = points.shape[1]
    if not MIN_MARKERS <= n <= MAX_MARKERS:
        raise InputDomainError(f"sample has {n} markers, expected {MIN_MARKERS}..{MAX_MARKERS}")
    step = max(1, _CHUNK_ROWS // len(triples(n)))
    out: list[PcsOutput] = []
    for lo in range(0, points.shape[0], step):
        chunk = points[lo:lo + step]
        found, chosen = _select(chunk, score_candidates(chunk, config), config)
        for f, idx in zip(found.tolist(), chosen.tolist()):
            out.append(PcsOutput(True, tuple(idx)) if f else PcsOutput(False))
    return out


def find_true_markers(sample: MarkerSample | Sequence, config: SutConfig | None = None) -> PcsOutput:
    config = config or SutConfig()
    markers = sample.markers if isinstance(sample, MarkerSample) else sample
    n = len(markers)
    if not MIN_MARKERS <= n <= MAX_MARKERS:
        raise InputDomainError(f"sample has {n} markers, expected {MIN_MARKERS}..{MAX_MARKERS}")
    return find_batch(np.asarray([markers], dtype=np.float64), config)[0]


class ReferenceSut:
    """In-process SUT; groups samples by length so each group is one numpy pass."""

    name = "builtin"

    def __init__(self, config: SutConfig | None = None):
        self.config = config or SutConfig()

    def find(self, sample) -> PcsOutput:
        return find_true_markers(sample, self.config)

    def find_many(self, samples) -> list[PcsOutput]:
        samples = list(samples)
        by_len: dict[int, list[int]] = {}
        for pos, s in enumerate(samples):
            by_len.setdefault(len(s), []).append(pos)
        out: list[Optional[PcsOutput]] = [None] * len(samples)
        for n, positions in by_len.items():
            arr = np.array(
                [s.markers if isinstance(s, MarkerSample) else s for s in (samples[p] for p in positions)],
                dtype=np.float64,
            ).reshape(len(positions), n, 2)
            for p, res in zip(positions, find_batch(arr, self.config)):
                out[p] = res
        return out

    def close(self):
        pass
