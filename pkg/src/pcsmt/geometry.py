"""Marker types, frame bounds, rotations and triplet congruence scoring.

Coordinates are integer camera pixels on the wire; every computation here is
done in double precision and rounded (half-to-even) only when a sample is
emitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

from .errors import InputDomainError

FRAME_SIZE = 131072
MIN_MARKERS = 3
MAX_MARKERS = 26


class Marker(NamedTuple):
    x: int
    y: int


class Role(str, Enum):
    TRUE_MARKER = "true"
    NOISE = "noise"


@dataclass(frozen=True)
class MarkerSample:
    """One PCS input: an ordered marker list.

    In a morphed sample the seed triplet occupies indexes 0..2 and everything
    after it is noise, which is what ``roles`` reports.
    """

    markers: tuple[Marker, ...]

    def __post_init__(self):
        n = len(self.markers)
        if not MIN_MARKERS <= n <= MAX_MARKERS:
            raise InputDomainError(f"sample has {n} markers, expected {MIN_MARKERS}..{MAX_MARKERS}")

    @classmethod
    def of(cls, points: Iterable[Sequence[int]]) -> "MarkerSample":
        return cls(tuple(Marker(int(p[0]), int(p[1])) for p in points))

    def __len__(self):
        return len(self.markers)

    @property
    def roles(self) -> tuple[Role, ...]:
        return tuple(Role.TRUE_MARKER if i < 3 else Role.NOISE for i in range(len(self.markers)))

    @property
    def triplet(self) -> tuple[Marker, Marker, Marker]:
        return self.markers[0], self.markers[1], self.markers[2]

    @property
    def noise(self) -> tuple[Marker, ...]:
        return self.markers[3:]

    def to_json(self) -> list[list[int]]:
        return [[m.x, m.y] for m in self.markers]


@dataclass(frozen=True)
class TripletGeometry:
    """Shape of the hoisting-frame marker triplet, in pixels.

    The defaults are arbitrary: the real frame dimensions are unknown, so they
    are only chosen to fit comfortably inside the camera frame.
    """

    side_distance: float = 8000.0
    top_offset: float = 3000.0
    top_skew: float = 0.0
    tolerance: float = 150.0

    def __post_init__(self):
        if not self.side_distance > 0:
            raise ValueError("side_distance must be positive")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        if self.top_offset < 0:
            raise ValueError("top_offset must be non-negative")

    def instance(self, center: tuple[float, float] = (0.0, 0.0), angle_deg: float = 0.0):
        """Real-valued (side, side, top) triplet whose side midpoint is ``center``."""
        half = self.side_distance / 2
        base = [(-half, 0.0), (half, 0.0), (self.top_skew, self.top_offset)]
        pts = rotate_about(base, (0.0, 0.0), angle_deg)
        return [(x + center[0], y + center[1]) for x, y in pts]


def in_frame(marker) -> bool:
    x, y = marker
    return 0 <= x <= FRAME_SIZE and 0 <= y <= FRAME_SIZE


def rotate_about(points, center, angle_deg: float) -> list[tuple[float, float]]:
    """Rotate ``points`` counter-clockwise by ``angle_deg`` about ``center``."""
    if angle_deg == 0:
        return [(float(x), float(y)) for x, y in points]
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    cx, cy = center
    out = []
    for x, y in points:
        dx, dy = x - cx, y - cy
        out.append((cx + c * dx - s * dy, cy + s * dx + c * dy))
    return out


def centroid(points) -> tuple[float, float]:
    pts = list(points)
    return (sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts))


def round_point(p) -> Marker:
    # Python's round() is half-to-even.
    return Marker(round(p[0]), round(p[1]))


def measure(side_a, side_b, top) -> tuple[float, float, float]:
    """Return (side distance, top offset, top skew) for a role assignment.

    Offset is the unsigned perpendicular distance of ``top`` from the side
    axis; skew is its signed displacement along the axis (a -> b) measured
    from the side midpoint.
    """
    ax, ay = side_a
    bx, by = side_b
    dx, dy = bx - ax, by - ay
    d = math.hypot(dx, dy)
    ux, uy = dx / d, dy / d
    vx = top[0] - (ax + bx) / 2
    vy = top[1] - (ay + by) / 2
    return d, abs(ux * vy - uy * vx), ux * vx + uy * vy


def congruence_score(candidate, geometry: TripletGeometry) -> float:
    """Deviation of three markers from the configured triplet shape.

    Each of the three markers is tried as the top marker and the smallest
    worst-case deviation is returned. Coincident markers give ``inf``.
    """
    a, b, c = ((float(p[0]), float(p[1])) for p in candidate)
    if a == b or a == c or b == c:
        return math.inf
    best = math.inf
    for s1, s2, top in ((a, b, c), (a, c, b), (b, c, a)):
        d, offset, skew = measure(s1, s2, top)
        dev = max(
            abs(d - geometry.side_distance),
            abs(offset - geometry.top_offset),
            abs(abs(skew) - abs(geometry.top_skew)),
        )
        best = min(best, dev)
    return best
