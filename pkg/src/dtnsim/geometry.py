"""Planar geometry for radio-disc routing.

Distances, direction cosines (with the zero-vector convention used by the
relay utility), forward-sector classification around a spreading axis, and
the two-disc overlap ("lens") area that drives redundancy purging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

# Cosine assigned whenever either vector of an angle has zero length.
# Equals cos(pi/4); it makes a co-located relay candidate score zero.
ZERO_VECTOR_COSINE = math.sqrt(2.0) / 2.0

_COS_45 = math.sqrt(2.0) / 2.0
_SIN_45 = math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class Position:
    """A point in the plane, meters."""

    x: float
    y: float


@dataclass(frozen=True)
class Vec2:
    """A displacement in the plane, meters. May be zero-length."""

    dx: float
    dy: float

    def length(self) -> float:
        return math.hypot(self.dx, self.dy)

    def scaled(self, s: float) -> "Vec2":
        return Vec2(self.dx * s, self.dy * s)


class SectorLabel(Enum):
    SECTOR_A = "A"
    SECTOR_B = "B"
    OUTSIDE = "outside"


def vec_between(a: Position, b: Position) -> Vec2:
    """Displacement from a to b."""
    return Vec2(b.x - a.x, b.y - a.y)


def distance(a: Position, b: Position) -> float:
    """Euclidean distance between two points."""
    return math.hypot(b.x - a.x, b.y - a.y)


def dot(u: Vec2, v: Vec2) -> float:
    return u.dx * v.dx + u.dy * v.dy


def cross(u: Vec2, v: Vec2) -> float:
    return u.dx * v.dy - u.dy * v.dx


def unit(v: Vec2) -> Vec2:
    """Normalize v; raises on a zero vector (callers handle that case)."""
    n = v.length()
    if n == 0.0:
        raise ValueError("cannot normalize a zero-length vector")
    return Vec2(v.dx / n, v.dy / n)


def rotate(v: Vec2, cos_t: float, sin_t: float) -> Vec2:
    return Vec2(v.dx * cos_t - v.dy * sin_t, v.dx * sin_t + v.dy * cos_t)


def direction_cosine(u: Vec2, v: Vec2) -> float:
    """Cosine of the angle between u and v.

    If either vector has zero length the angle is undefined; by convention
    the value is sqrt(2)/2, which zeroes the direction term of the relay
    utility for a co-located candidate.
    """
    lu = u.length()
    lv = v.length()
    if lu == 0.0 or lv == 0.0:
        return ZERO_VECTOR_COSINE
    c = dot(u, v) / (lu * lv)
    return max(-1.0, min(1.0, c))


def lens_area(d: float, radius: float) -> float:
    """Area of the intersection of two discs of equal radius, centers d apart.

    Closed form 2*R^2*acos(d/2R) - (d/2)*sqrt(4R^2 - d^2); the full disc
    pi*R^2 at d = 0, zero once d >= 2R. Monotone non-increasing in d.
    """
    if d < 0.0:
        raise ValueError(f"center distance must be >= 0, got {d}")
    if radius <= 0.0:
        raise ValueError(f"radius must be > 0, got {radius}")
    if d == 0.0:
        return math.pi * radius * radius
    if d >= 2.0 * radius:
        return 0.0
    half = d / (2.0 * radius)
    return 2.0 * radius * radius * math.acos(half) - (d / 2.0) * math.sqrt(
        4.0 * radius * radius - d * d
    )


@dataclass(frozen=True)
class SectorFrame:
    """Forward-sector geometry at a node.

    apex is the node making the relay choice; axis is the unit vector from
    the copy's anchor through the apex (the spreading direction). The two
    bisectors sit at +/- pi/4 from the axis and split the forward half-disc
    of the given radius into sectors A and B.
    """

    apex: Position
    axis: Vec2
    bisector_a: Vec2
    bisector_b: Vec2
    radius: float

    @classmethod
    def from_axis(cls, apex: Position, axis: Vec2, radius: float) -> "SectorFrame":
        u = unit(axis)
        return cls(
            apex=apex,
            axis=u,
            bisector_a=rotate(u, _COS_45, _SIN_45),
            bisector_b=rotate(u, _COS_45, -_SIN_45),
            radius=radius,
        )

    @classmethod
    def from_anchor(cls, anchor: Position, apex: Position, radius: float) -> "SectorFrame":
        """Frame whose axis points from the anchor through the apex.

        A degenerate anchor (same point as the apex) falls back to the +x
        axis so the frame is always defined and runs stay reproducible.
        """
        v = vec_between(anchor, apex)
        if v.length() == 0.0:
            v = Vec2(1.0, 0.0)
        return cls.from_axis(apex, v, radius)


def forward_sector_of(frame: SectorFrame, candidate: Position) -> SectorLabel:
    """Classify an in-range candidate against the frame's forward sectors.

    Sector A is the forward quarter on the +pi/4 side of the axis, sector B
    its mirror; everything in the backward half-plane (toward the anchor) is
    OUTSIDE. Ties are deterministic: a candidate on the axis or co-located
    with the apex goes to sector A, one exactly on the forward perpendicular
    belongs to the sector it borders.
    """
    w = vec_between(frame.apex, candidate)
    if w.length() == 0.0:
        return SectorLabel.SECTOR_A
    if dot(w, frame.axis) < 0.0:
        return SectorLabel.OUTSIDE
    if cross(frame.axis, w) >= 0.0:
        return SectorLabel.SECTOR_A
    return SectorLabel.SECTOR_B
