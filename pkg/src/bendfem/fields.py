"""Closed-form scalar fields: prescribed bulk data for the penalty right-hand
sides and analytic fields for tests and interpolation studies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Ellipse


@dataclass(frozen=True)
class ZeroField:
    def value(self, x, y):
        return np.zeros_like(np.asarray(x, dtype=float))

    def grad(self, x, y):
        z = np.zeros_like(np.asarray(x, dtype=float))
        return z, z.copy()

    def dxy(self, x, y):
        return np.zeros_like(np.asarray(x, dtype=float))

    def laplacian(self, x, y):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SinProduct:
    """sin(k pi x) sin(k pi y); smooth test field with all derivatives."""

    k: float = 1.0

    def value(self, x, y):
        a = self.k * np.pi
        return np.sin(a * x) * np.sin(a * y)

    def grad(self, x, y):
        a = self.k * np.pi
        return (a * np.cos(a * x) * np.sin(a * y),
                a * np.sin(a * x) * np.cos(a * y))

    def dxy(self, x, y):
        a = self.k * np.pi
        return a * a * np.cos(a * x) * np.cos(a * y)

    def laplacian(self, x, y):
        a = self.k * np.pi
        return -2.0 * a * a * self.value(x, y)

    def hessian(self, x, y):
        a = self.k * np.pi
        return (-a * a * self.value(x, y), -a * a * self.value(x, y),
                self.dxy(x, y))


@dataclass(frozen=True)
class NormalSlopeField:
    """Analytic field with value 0 and constant normal slope on an ellipse.

    With the quadratic level set G and ellipse-aligned coordinate u, the
    squared gradient norm restricted to the boundary is the polynomial
    S(u) = 4 [1/b^2 - u^2 (a^2-b^2)/(a^4 b^2)], so slope * G / sqrt(S(u)) has
    boundary value exactly 0, outward normal derivative exactly ``slope``, no
    tangential derivative, and stays analytic on the whole closed region
    (S >= 4/a^2 there).  For circles this reduces to slope (r^2 - R^2)/(2R).
    Used as the prescribed bulk field when no exact extension is available.
    """

    shape: Ellipse
    slope: float

    def _local(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c, s = np.cos(self.shape.angle), np.sin(self.shape.angle)
        dx = x - self.shape.center[0]
        dy = y - self.shape.center[1]
        return c * dx + s * dy, (c, s)

    def _boundary_gradnorm2(self, u):
        a, b = self.shape.a, self.shape.b
        return 4.0 * (1.0 / b**2 - u**2 * (a**2 - b**2) / (a**4 * b**2))

    def value(self, x, y):
        u, _ = self._local(x, y)
        G = self.shape.implicit(x, y)
        return self.slope * G / np.sqrt(self._boundary_gradnorm2(u))

    def grad(self, x, y):
        u, (c, s) = self._local(x, y)
        a, b = self.shape.a, self.shape.b
        G = self.shape.implicit(x, y)
        gx, gy = self.shape.implicit_grad(x, y)
        S = self._boundary_gradnorm2(u)
        rho = 1.0 / np.sqrt(S)
        # d rho / du, with grad u = (c, s)
        dS = -8.0 * u * (a**2 - b**2) / (a**4 * b**2)
        drho = -0.5 * dS / S**1.5
        return (self.slope * (rho * gx + G * drho * c),
                self.slope * (rho * gy + G * drho * s))
