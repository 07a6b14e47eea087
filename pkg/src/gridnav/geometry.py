"""Planar pose kinematics, rigid transforms and phase-rotation path integration.

Positions are 2-tuples of floats in metres, angles are radians measured
counter-clockwise from the +x axis.  Headings are always stored reduced to
[0, 2*pi).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError

TWO_PI = 2.0 * math.pi

Vec2 = tuple[float, float]


def wrap_angle(angle: float) -> float:
    """Reduce ``angle`` to [0, 2*pi)."""
    a = math.fmod(angle, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    # fmod of a tiny negative number plus 2*pi can round up to exactly 2*pi
    if a >= TWO_PI:
        a = 0.0
    return a


def angle_difference(a: float, b: float) -> float:
    """Signed smallest difference a - b, in (-pi, pi]."""
    d = math.fmod(a - b, TWO_PI)
    if d > math.pi:
        d -= TWO_PI
    elif d <= -math.pi:
        d += TWO_PI
    return d


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def _vec2(v: Iterable[float], name: str) -> Vec2:
    x, y = (float(c) for c in v)
    if not _finite(x, y):
        raise InvalidInputError(f"{name} must be finite, got {(x, y)}")
    return (x, y)


@dataclass(frozen=True)
class Pose:
    position: Vec2
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "position", _vec2(self.position, "position"))
        if not math.isfinite(self.heading):
            raise InvalidInputError(f"heading must be finite, got {self.heading}")
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))


@dataclass(frozen=True)
class MotorCommand:
    """Egocentric translational velocity (m/s) and angular velocity (rad/s)."""

    linear_velocity: Vec2
    angular_velocity: float

    def __post_init__(self):
        object.__setattr__(self, "linear_velocity", _vec2(self.linear_velocity, "linear_velocity"))
        if not math.isfinite(self.angular_velocity):
            raise InvalidInputError("angular_velocity must be finite")
        object.__setattr__(self, "angular_velocity", float(self.angular_velocity))


@dataclass(frozen=True)
class RigidTransform:
    """Rotate a pose about the origin by ``rotation_angle`` then translate."""

    translation: Vec2
    rotation_angle: float

    def __post_init__(self):
        object.__setattr__(self, "translation", _vec2(self.translation, "translation"))
        if not math.isfinite(self.rotation_angle):
            raise InvalidInputError("rotation_angle must be finite")
        object.__setattr__(self, "rotation_angle", wrap_angle(float(self.rotation_angle)))

    def inverse(self) -> "RigidTransform":
        c, s = math.cos(self.rotation_angle), math.sin(self.rotation_angle)
        dx, dy = self.translation
        # -R(-phi) @ delta
        return RigidTransform((-(c * dx + s * dy), -(-s * dx + c * dy)), -self.rotation_angle)


@dataclass(frozen=True)
class FrequencyVector:
    """Spatial frequency q * u, with u a unit direction and q in rad/m."""

    direction: Vec2
    magnitude: float

    def __post_init__(self):
        d = _vec2(self.direction, "direction")
        if abs(math.hypot(*d) - 1.0) > 1e-12:
            raise InvalidInputError(f"direction must be a unit vector, got norm {math.hypot(*d)}")
        if not (math.isfinite(self.magnitude) and self.magnitude > 0):
            raise InvalidInputError(f"magnitude must be positive, got {self.magnitude}")
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "magnitude", float(self.magnitude))

    @classmethod
    def from_angle(cls, angle: float, magnitude: float) -> "FrequencyVector":
        return cls((math.cos(angle), math.sin(angle)), magnitude)

    @property
    def vector(self) -> Vec2:
        return (self.magnitude * self.direction[0], self.magnitude * self.direction[1])


@dataclass(frozen=True)
class PhaseState:
    y: Vec2

    def __post_init__(self):
        object.__setattr__(self, "y", _vec2(self.y, "y"))

    @property
    def norm(self) -> float:
        return math.hypot(*self.y)


def rotation_of(angle: float) -> np.ndarray:
    """Counter-clockwise 2x2 rotation matrix."""
    if not math.isfinite(angle):
        raise InvalidInputError(f"angle must be finite, got {angle}")
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _rotate(angle: float, v: Vec2) -> Vec2:
    c, s = math.cos(angle), math.sin(angle)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1])


def step_pose(p: Pose, u: MotorCommand, dt: float) -> Pose:
    """Advance one step.  Translation is rotated by the pre-step heading."""
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"dt must be positive, got {dt}")
    vx, vy = u.linear_velocity
    dx, dy = _rotate(p.heading, (vx * dt, vy * dt))
    x, y = p.position
    return Pose((x + dx, y + dy), p.heading + u.angular_velocity * dt)


def integrate_path(p0: Pose, commands: Iterable[MotorCommand], dt: float) -> Pose:
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"dt must be positive, got {dt}")
    p = p0
    for u in commands:
        p = step_pose(p, u, dt)
    return p


def apply_rigid(g: RigidTransform, p: Pose) -> Pose:
    rx, ry = _rotate(g.rotation_angle, p.position)
    return Pose((rx + g.translation[0], ry + g.translation[1]), p.heading + g.rotation_angle)


def phase_step(y: PhaseState, q: FrequencyVector, dr: Sequence[float]) -> PhaseState:
    """Rotate the phase pair by q . dr."""
    qx, qy = q.vector
    return PhaseState(_rotate(qx * dr[0] + qy * dr[1], y.y))


def phase_closed_form(q: FrequencyVector, net_displacement: Sequence[float]) -> PhaseState:
    """Phase reached from y0 = (1, 0) after a net displacement."""
    qx, qy = q.vector
    phi = qx * net_displacement[0] + qy * net_displacement[1]
    return PhaseState((math.cos(phi), math.sin(phi)))
