import numpy as np
import pytest

from bendfem.geometry import MEMBRANE, Ellipse, Particle, circle
from bendfem.grid import build_grid
from bendfem.quadrature import (cutcell_rule, curve_rule, decompose_grid,
                                grid_curve_rule, quadtree_rule, split_cell,
                                tensor_gauss)


def disc(r=1 / 3):
    return Particle(shape=circle((0.0, 0.0), r))


def test_tensor_gauss_exact_x7():
    r = tensor_gauss((0, 1, 0, 1), 4)
    assert np.sum(r.weights * r.points[:, 0] ** 7) == pytest.approx(1 / 8, abs=1e-14)


def test_tensor_gauss_degree_bound():
    # p=4 is exact only through degree 7, so x^8 must miss
    r = tensor_gauss((0, 1, 0, 1), 4)
    assert abs(np.sum(r.weights * r.points[:, 0] ** 8) - 1 / 9) > 1e-8


def test_tensor_gauss_weight_sum():
    h = 0.37
    r = tensor_gauss((0, h, 2.0, 2.0 + h), 5)
    assert r.total() == pytest.approx(h * h, rel=1e-14)


def test_curve_rule_circle_integrals():
    r = curve_rule(disc(), 256)
    assert r.total() == pytest.approx(2 * np.pi / 3, abs=1e-12)
    assert np.sum(r.weights * np.cos(4 * r.thetas) ** 2) == pytest.approx(np.pi / 3, abs=1e-10)
    assert np.sum(r.weights * np.cos(4 * r.thetas)) == pytest.approx(0.0, abs=1e-12)


def test_curve_rule_trig_exactness():
    n = 64
    r = curve_rule(disc(1.0), n)
    for k in range(1, n):
        assert np.sum(r.weights * np.cos(k * r.thetas)) == pytest.approx(0.0, abs=1e-12)
        assert np.sum(r.weights * np.sin(k * r.thetas)) == pytest.approx(0.0, abs=1e-12)


def test_grid_curve_rule_matches_whole_curve():
    g = build_grid((-1, 1, -1, 1), 8)
    p = disc()
    loc = grid_curve_rule(p, g)
    glob = curve_rule(p, 1024)

    def integrate(rule, f):
        return np.sum(rule.weights * f(rule.points[:, 0], rule.points[:, 1]))

    for f in (lambda x, y: x**2, lambda x, y: np.exp(x) * y, lambda x, y: 1.0 + 0 * x):
        assert integrate(loc, f) == pytest.approx(integrate(glob, f), abs=1e-12)


def test_grid_curve_rule_cells_contain_points():
    g = build_grid((-1, 1, -1, 1), 8)
    rule = grid_curve_rule(disc(), g)
    cx, cy, _, _ = g.locate(rule.points[:, 0], rule.points[:, 1])
    assert np.array_equal(g.cell_id(cx, cy), rule.cells)


def test_disc_area_to_1e6():
    g = build_grid((-1, 1, -1, 1), 8)
    dec = decompose_grid([disc()], g)
    assert abs(dec.region_rule(0).total() - np.pi / 9) <= 1e-6


def test_ellipse_area_to_1e6():
    g = build_grid((-1, 1, -1, 1), 8)
    p = Particle(shape=Ellipse(center=(0.1, 0.07), a=0.2, b=0.1, angle=0.5))
    dec = decompose_grid([p], g)
    assert abs(dec.region_rule(0).total() - 0.02 * np.pi) <= 1e-6


def test_full_cell_fallback_identical_to_tensor():
    g = build_grid((-1, 1, -1, 1), 8)
    rect = g.cell_bounds(4, 4)  # cell [0, .25]^2 is inside the r=1/3 disc? -> check both sides
    p = disc(0.9)  # cell clearly inside
    rule = cutcell_rule([p], rect, 0, order=5)
    ref = tensor_gauss(rect, 5)
    assert np.allclose(rule.points, ref.points)
    assert np.allclose(rule.weights, ref.weights)


def test_partition_property_all_cut_cells():
    g = build_grid((-1, 1, -1, 1), 8)
    p = disc()
    cell_area = g.hx * g.hy
    for cid in range(g.n_cells):
        rect = g.cell_bounds(*g.cell_index(cid))
        pieces = split_cell([p], rect)
        total = sum(w.sum() for _, _, w in pieces)
        assert total == pytest.approx(cell_area, abs=1e-8 * cell_area)


def test_quadtree_weights_nonnegative_and_partition():
    g = build_grid((-1, 1, -1, 1), 8)
    p = disc()
    rect = g.cell_bounds(5, 4)
    inside = quadtree_rule([p], rect, 0, depth=6)
    outside = quadtree_rule([p], rect, MEMBRANE, depth=6)
    assert np.all(inside.weights >= 0)
    assert np.all(outside.weights >= 0)
    assert inside.total() + outside.total() == pytest.approx(g.hx * g.hy, rel=1e-12)


def test_graph_rule_validated_against_quadtree():
    g = build_grid((-1, 1, -1, 1), 8)
    p = disc()
    checked = 0
    for cid in range(g.n_cells):
        rect = g.cell_bounds(*g.cell_index(cid))
        pieces = split_cell([p], rect)
        tags = {t for t, _, _ in pieces}
        if len(tags) < 2:
            continue
        checked += 1
        area_graph = sum(w.sum() for t, _, w in pieces if t == 0)
        area_tree = quadtree_rule([p], rect, 0, depth=8).total()
        assert abs(area_graph - area_tree) <= 1e-7
    assert checked >= 8  # the circle must actually cut cells


def test_cut_moments_disc():
    # second moment over the disc: int x^2 = pi r^4 / 4
    g = build_grid((-1, 1, -1, 1), 16)
    dec = decompose_grid([disc()], g)
    rule = dec.region_rule(0)
    got = np.sum(rule.weights * rule.points[:, 0] ** 2)
    assert got == pytest.approx(np.pi * (1 / 3) ** 4 / 4, abs=1e-9)


def test_membrane_region_excludes_both_particles():
    inner = disc()
    outer = Particle(shape=circle((0.0, 0.0), 2 / 3), exterior=True, variable_height=False)
    g = build_grid((-1, 1, -1, 1), 12)
    dec = decompose_grid([inner, outer], g)
    annulus = dec.region_rule(MEMBRANE).total()
    assert annulus == pytest.approx(np.pi * ((2 / 3) ** 2 - (1 / 3) ** 2), abs=1e-6)
    exterior = dec.region_rule(1).total()
    assert exterior == pytest.approx(4.0 - np.pi * (2 / 3) ** 2, abs=1e-6)


def test_invalid_rule_sizes():
    with pytest.raises(ValueError):
        tensor_gauss((0, 1, 0, 1), 0)
    with pytest.raises(ValueError):
        curve_rule(disc(), 0)


def test_curve_rule_in_rect_partitions_whole_curve():
    from bendfem.quadrature import curve_rule_in_rect

    g = build_grid((-1, 1, -1, 1), 8)
    p = disc()
    total = 0.0
    for cid in range(g.n_cells):
        rule = curve_rule_in_rect(p, g.cell_bounds(*g.cell_index(cid)))
        total += rule.total()
    assert total == pytest.approx(2 * np.pi / 3, abs=1e-12)


def test_curve_rule_in_rect_empty_when_disjoint():
    from bendfem.quadrature import curve_rule_in_rect

    rule = curve_rule_in_rect(disc(), (0.9, 1.0, 0.9, 1.0))
    assert rule.n == 0
