import numpy as np
import pytest
from scipy.integrate import quad

from bendfem.geometry import (MEMBRANE, Ellipse, Particle, boundary_point,
                              circle, classify_point, recover_heights)


def disc_particle(r=1 / 3):
    return Particle(shape=circle((0.0, 0.0), r), f1=lambda th: np.cos(4 * th))


def test_classify_examples():
    p = [disc_particle()]
    assert classify_point(p, 0.0, 0.0) == 0
    assert classify_point(p, 0.5, 0.5) == MEMBRANE
    assert classify_point(p, 1 / 3, 0.0) == 0  # boundary belongs to the closed region


def test_classify_exterior_flag():
    outer = Particle(shape=circle((0.0, 0.0), 2 / 3), exterior=True, variable_height=False)
    p = [disc_particle(), outer]
    assert classify_point(p, 0.9, 0.0) == 1
    assert classify_point(p, 0.5, 0.0) == MEMBRANE
    assert classify_point(p, 0.0, 0.1) == 0


def test_boundary_point_circle():
    cp = boundary_point(disc_particle(), 0.0)
    assert np.allclose(cp.position, [1 / 3, 0.0])
    assert cp.weight == pytest.approx(1 / 3)
    assert np.allclose(cp.normal, [1.0, 0.0])


def test_boundary_point_ellipse():
    e = Ellipse(center=(0.2, -0.1), a=0.2, b=0.1)
    cp = boundary_point(Particle(shape=e), np.pi / 2)
    assert np.allclose(cp.position, [0.2, 0.0], atol=1e-15)


def test_circle_circumference():
    p = disc_particle()
    theta = (np.arange(2048) + 0.5) * 2 * np.pi / 2048
    total = np.sum(p.shape.speed(theta)) * 2 * np.pi / 2048
    assert abs(total - 2 * np.pi / 3) < 1e-10


def test_ellipse_perimeter_vs_adaptive_quadrature():
    e = Ellipse(center=(0.0, 0.0), a=0.2, b=0.1, angle=0.7)
    ref, _ = quad(lambda t: e.speed(t), 0.0, 2 * np.pi, limit=200, epsabs=1e-12)
    assert abs(e.perimeter(n=8192) - ref) < 1e-8


def test_exterior_normal_points_out_of_region():
    outer = Particle(shape=circle((0.0, 0.0), 2 / 3), exterior=True)
    cp = boundary_point(outer, 0.0)
    # region is outside the circle, so its outward normal points inward
    assert np.allclose(cp.normal, [-1.0, 0.0])


def test_classify_consistent_with_parameterization():
    rng = np.random.default_rng(5)
    shapes = [circle((0.1, -0.2), 0.3), Ellipse(center=(-0.3, 0.4), a=0.25, b=0.1, angle=1.1)]
    for shape in shapes:
        for exterior in (False, True):
            p = Particle(shape=shape, exterior=exterior)
            theta = rng.uniform(0, 2 * np.pi, 200)
            px, py = shape.point(theta)
            nx, ny = p.region_normal(theta)
            eps = 1e-6
            inside = p.inside(px - eps * np.asarray(nx), py - eps * np.asarray(ny))
            outside = p.inside(px + eps * np.asarray(nx), py + eps * np.asarray(ny))
            assert np.all(inside)
            assert not np.any(outside)


def test_line_crossings_match_parameterization():
    e = Ellipse(center=(0.05, -0.1), a=0.2, b=0.1, angle=0.4)
    for axis, value in [(0, 0.1), (0, -0.05), (1, -0.12), (1, 0.0)]:
        thetas = e.line_crossings(axis, value)
        assert thetas.size in (0, 2)
        px, py = e.point(thetas)
        coord = px if axis == 0 else py
        assert np.allclose(coord, value, atol=1e-12)


def test_tangent_line_treated_as_non_crossing():
    c = circle((0.0, 0.0), 0.5)
    assert c.line_crossings(0, 0.5).size == 0
    assert c.line_crossings(0, 0.5 + 1e-15).size == 0


def test_degenerate_shape_rejected():
    with pytest.raises(ValueError):
        Ellipse(center=(0, 0), a=0.0, b=0.1)


class _BilinearShift:
    """u = x*y + shift is a bicubic, so its interpolant has exact trace."""

    def __init__(self, sp, shift):
        from bendfem.basis import interpolate

        class F:
            def value(self, x, y):
                return x * y + shift

            def grad(self, x, y):
                return np.asarray(y, dtype=float), np.asarray(x, dtype=float)

            def dxy(self, x, y):
                return np.ones_like(np.asarray(x, dtype=float))

        self.coeffs = interpolate(sp, F())


def test_recover_heights():
    from bendfem.grid import build_space

    sp = build_space((-1, 1, -1, 1), (8, 8))
    r1 = 1 / 3
    # height profile equal to the trace of x*y on the circle
    p = Particle(shape=circle((0.0, 0.0), r1),
                 f1=lambda th: r1**2 * np.cos(th) * np.sin(th))
    # u with trace exactly f1: gamma = 0
    coeffs = _BilinearShift(sp, 0.0).coeffs
    assert recover_heights(sp, coeffs, [p])[0] == pytest.approx(0.0, abs=1e-10)
    # u = f1 + 5 on the boundary: gamma = 5
    coeffs = _BilinearShift(sp, 5.0).coeffs
    assert recover_heights(sp, coeffs, [p])[0] == pytest.approx(5.0, abs=1e-9)


def test_recover_heights_skips_fixed_height():
    from bendfem.grid import build_space

    sp = build_space((-1, 1, -1, 1), (4, 4))
    fixed = Particle(shape=circle((0, 0), 2 / 3), variable_height=False, exterior=True)
    out = recover_heights(sp, np.zeros(4 * sp.grid.n_nodes), [fixed])
    assert out.size == 0
