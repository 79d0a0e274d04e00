"""Particle geometry: circles and ellipses, containment tests, boundary
parameterization, and grid-line crossings.

Shapes are parameterized by theta in [0, 2pi).  Normals returned by
``boundary_point`` point outward with respect to the region the particle
occupies (for exterior-flagged particles this is toward the enclosed disc).
Both supported shapes are conics, so grid-line crossings and vertical line
sections have closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi
#: Tangency tolerance: grid-line contacts closer than this to tangential are
#: treated as non-crossing.
TANGENT_TOL = 1e-12


@dataclass(frozen=True)
class Ellipse:
    """Ellipse with semi-axes a >= b > 0, rotated by ``angle`` about its center.

    A circle is the a == b special case and ``circle`` constructs one.
    """

    center: tuple
    a: float
    b: float
    angle: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"degenerate semi-axes ({self.a}, {self.b})")

    @property
    def _rot(self):
        c, s = np.cos(self.angle), np.sin(self.angle)
        return c, s

    def point(self, theta):
        """Boundary point(s) at parameter theta."""
        theta = np.asarray(theta, dtype=float)
        c, s = self._rot
        px = self.a * np.cos(theta)
        py = self.b * np.sin(theta)
        return (self.center[0] + c * px - s * py,
                self.center[1] + s * px + c * py)

    def tangent(self, theta):
        """d(point)/d(theta); its norm is the arc-length weight."""
        theta = np.asarray(theta, dtype=float)
        c, s = self._rot
        tx = -self.a * np.sin(theta)
        ty = self.b * np.cos(theta)
        return c * tx - s * ty, s * tx + c * ty

    def speed(self, theta):
        tx, ty = self.tangent(theta)
        return np.hypot(tx, ty)

    def outward_normal(self, theta):
        """Unit normal pointing out of the ellipse interior."""
        tx, ty = self.tangent(theta)
        n = np.hypot(tx, ty)
        return ty / n, -tx / n

    def implicit(self, x, y):
        """Quadratic level-set: negative inside, zero on the boundary."""
        c, s = self._rot
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        u = c * dx + s * dy
        v = -s * dx + c * dy
        return (u / self.a) ** 2 + (v / self.b) ** 2 - 1.0

    def implicit_grad(self, x, y):
        c, s = self._rot
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        u = c * dx + s * dy
        v = -s * dx + c * dy
        gu, gv = 2.0 * u / self.a ** 2, 2.0 * v / self.b ** 2
        return c * gu - s * gv, s * gu + c * gv

    def implicit_hess(self):
        """Constant Hessian of the quadratic level set."""
        c, s = self._rot
        ka, kb = 2.0 / self.a ** 2, 2.0 / self.b ** 2
        hxx = c * c * ka + s * s * kb
        hyy = s * s * ka + c * c * kb
        hxy = c * s * (ka - kb)
        return (hxx, hxy), (hxy, hyy)

    def bbox(self):
        c, s = self._rot
        wx = np.hypot(self.a * c, self.b * s)
        wy = np.hypot(self.a * s, self.b * c)
        return (self.center[0] - wx, self.center[0] + wx,
                self.center[1] - wy, self.center[1] + wy)

    def _axis_wave(self, axis):
        # x(theta) = center + C cos(theta) + D sin(theta) = center + R cos(theta - t0)
        c, s = self._rot
        if axis == 0:
            C, D = self.a * c, -self.b * s
        else:
            C, D = self.a * s, self.b * c
        return np.hypot(C, D), np.arctan2(D, C)

    def line_crossings(self, axis, value):
        """Parameters where coordinate ``axis`` equals ``value``.

        Returns a (possibly empty) array of theta in [0, 2pi); tangential
        contacts within TANGENT_TOL are dropped.
        """
        R, t0 = self._axis_wave(axis)
        u = (value - self.center[axis]) / R
        if abs(u) >= 1.0 - TANGENT_TOL:
            return np.empty(0)
        d = np.arccos(u)
        return np.sort(np.mod([t0 + d, t0 - d], TWO_PI))

    def coordinate_roots(self, axis, value, lo, hi):
        """Coordinates of the *other* axis where this conic meets the line
        ``axis == value``, restricted to [lo, hi]."""
        thetas = self.line_crossings(axis, value)
        if thetas.size == 0:
            return np.empty(0)
        px, py = self.point(thetas)
        other = py if axis == 0 else px
        return np.sort(other[(other >= lo) & (other <= hi)])

    def perimeter(self, n=4096):
        theta = (np.arange(n) + 0.5) * TWO_PI / n
        return np.sum(self.speed(theta)) * TWO_PI / n

    def area(self):
        return np.pi * self.a * self.b


def circle(center, radius) -> Ellipse:
    return Ellipse(center=tuple(center), a=float(radius), b=float(radius))


def _zero_profile(theta):
    return np.zeros_like(np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class Particle:
    """A particle region with its coupling data.

    ``f1``/``f2`` map boundary parameters theta to the prescribed height
    profile and normal slope.  ``exterior`` flips containment so the particle
    occupies the complement of the shape (used to impose conditions on an
    embedded outer boundary).  ``variable_height`` keeps the per-particle mean
    of the height profile free; fixed-height particles drop all projection
    corrections.
    """

    shape: Ellipse
    f1: Callable = field(default=_zero_profile)
    f2: Callable = field(default=_zero_profile)
    variable_height: bool = True
    exterior: bool = False

    def inside(self, x, y):
        """Closed-region containment (boundary included)."""
        g = self.shape.implicit(x, y)
        return g >= 0.0 if self.exterior else g <= 0.0

    def region_normal(self, theta):
        """Unit normal pointing out of the particle's region."""
        nx, ny = self.shape.outward_normal(theta)
        return (-nx, -ny) if self.exterior else (nx, ny)


MEMBRANE = -1


def classify_point(particles, x, y):
    """Region tag per point: particle index, or MEMBRANE (-1).

    Boundaries belong to their particle (closed regions); with disjoint
    particle closures the first match is the only match.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tags = np.full(np.broadcast(x, y).shape, MEMBRANE, dtype=int)
    for i, p in enumerate(particles):
        tags = np.where((tags == MEMBRANE) & p.inside(x, y), i, tags)
    return tags


@dataclass(frozen=True)
class CurvePoint:
    position: np.ndarray
    normal: np.ndarray
    weight: float


def boundary_point(particle: Particle, theta) -> CurvePoint:
    """Boundary point with region-outward unit normal and arc-length weight
    d sigma / d theta."""
    px, py = particle.shape.point(theta)
    nx, ny = particle.region_normal(theta)
    return CurvePoint(position=np.array([px, py]),
                      normal=np.array([nx, ny]),
                      weight=float(particle.shape.speed(theta)))


def recover_heights(space, coeffs, particles, n_points=512):
    """Mean height offsets: per variable-height particle the boundary average
    of (solution - height profile)."""
    from .basis import eval_coeffs  # local import to avoid a cycle

    gammas = []
    for p in particles:
        if not p.variable_height:
            continue
        theta = (np.arange(n_points) + 0.5) * TWO_PI / n_points
        w = p.shape.speed(theta) * TWO_PI / n_points
        x, y = p.shape.point(theta)
        u = eval_coeffs(space, coeffs, x, y, derivs=("v",))["v"]
        gammas.append(np.sum(w * (u - p.f1(theta))) / np.sum(w))
    return np.array(gammas)
