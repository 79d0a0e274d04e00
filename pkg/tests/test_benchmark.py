from fractions import Fraction

import numpy as np
import pytest

from bendfem.benchmark import (PRINTED_ANNULUS_CONSTANTS, BenchmarkParams,
                               benchmark_particles, derive_coefficients,
                               printed_constants_report)


@pytest.fixture(scope="module")
def field():
    return derive_coefficients(BenchmarkParams())


def exact_rational_coefficients():
    """Independent oracle: solve the interface conditions in exact rational
    arithmetic by Gaussian elimination over Fractions."""
    r1, r2 = Fraction(1, 3), Fraction(2, 3)
    powers = (4, 6, -4, -2)

    def solve(A, b):
        n = len(A)
        M = [row[:] + [b[i]] for i, row in enumerate(A)]
        for col in range(n):
            piv = max(range(col, n), key=lambda r: abs(M[r][col]))
            M[col], M[piv] = M[piv], M[col]
            M[col] = [v / M[col][col] for v in M[col]]
            for r in range(n):
                if r != col and M[r][col] != 0:
                    f = M[r][col]
                    M[r] = [a - f * c for a, c in zip(M[r], M[col])]
        return [M[i][n] for i in range(n)]

    A_in = [[r1**4, r1**6], [4 * r1**3, 6 * r1**5]]
    inner = solve(A_in, [Fraction(1), Fraction(0)])
    A_an = [[r**p for p in powers] for r in (r1, r1, r2, r2)]
    A_an[1] = [p * r1 ** (p - 1) for p in powers]
    A_an[3] = [p * r2 ** (p - 1) for p in powers]
    annulus = solve(A_an, [Fraction(1), Fraction(0), Fraction(0), Fraction(0)])
    return inner, annulus, powers


def test_inner_coefficients_match_printed_values(field):
    assert field.inner_coeffs[0] == pytest.approx(243.0, abs=1e-9)
    assert field.inner_coeffs[1] == pytest.approx(-1458.0, abs=1e-9)


def test_derived_coefficients_match_rational_oracle(field):
    inner, annulus, powers = exact_rational_coefficients()
    assert np.allclose(field.inner_coeffs, [float(c) for c in inner], rtol=1e-13)
    assert field.annulus_powers == powers
    assert np.allclose(field.annulus_coeffs, [float(c) for c in annulus], rtol=1e-12)


def test_interface_and_boundary_conditions_to_1e12(field):
    r1, r2 = field.r1, field.r2

    def radial(r, coeffs, powers, d=0):
        return sum(c * (p * r ** (p - 1) if d else r**p)
                   for c, p in zip(coeffs, powers))

    assert radial(r1, field.annulus_coeffs, field.annulus_powers) == pytest.approx(1.0, abs=1e-12)
    assert radial(r1, field.annulus_coeffs, field.annulus_powers, d=1) == pytest.approx(0.0, abs=1e-12)
    assert radial(r2, field.annulus_coeffs, field.annulus_powers) == pytest.approx(0.0, abs=1e-12)
    assert radial(r2, field.annulus_coeffs, field.annulus_powers, d=1) == pytest.approx(0.0, abs=1e-12)
    assert radial(r1, field.inner_coeffs, field.inner_powers) == pytest.approx(1.0, abs=1e-12)
    assert radial(r1, field.inner_coeffs, field.inner_powers, d=1) == pytest.approx(0.0, abs=1e-12)


def test_printed_constants_disagreement_logged(field, caplog):
    import logging

    with caplog.at_level(logging.WARNING):
        report = printed_constants_report(field)
    # the printed set equals the derived set as values, but powers -2, 4, 6
    # carry the wrong constants as printed; -4 matches
    assert abs(report[-4]["difference"]) <= 1e-12
    mismatched = {p for p, r in report.items() if abs(r["difference"]) > 1e-8}
    assert mismatched == {-2, 4, 6}
    derived_set = sorted(float(c) for c in field.annulus_coeffs)
    printed_set = sorted(PRINTED_ANNULUS_CONSTANTS.values())
    assert np.allclose(derived_set, printed_set, rtol=1e-12)
    assert any("printed annulus constants" in r.message for r in caplog.records)


def test_value_examples(field):
    assert field.value(np.array([0.0]), np.array([0.0]))[0] == 0.0
    assert field.value(np.array([1 / 3]), np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-12)
    # zero outside r2, all quantities
    x = np.array([0.8, -0.9, 0.7])
    y = np.array([0.1, 0.3, -0.68])
    assert np.all(field.value(x, y) == 0.0)
    gx, gy = field.grad(x, y)
    assert np.all(gx == 0.0) and np.all(gy == 0.0)
    assert np.all(field.laplacian(x, y) == 0.0)


def test_c1_matching_at_64_angles(field):
    theta = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)

    def radial(r, coeffs, powers, d=0):
        return sum(c * (p * r ** (p - 1) if d else r**p)
                   for c, p in zip(coeffs, powers))

    for r0 in (field.r1, field.r2):
        if r0 == field.r1:
            va = radial(r0, field.inner_coeffs, field.inner_powers)
            da = radial(r0, field.inner_coeffs, field.inner_powers, d=1)
        else:
            va, da = 0.0, 0.0  # clamped continuation by zero
        vb = radial(r0, field.annulus_coeffs, field.annulus_powers)
        db = radial(r0, field.annulus_coeffs, field.annulus_powers, d=1)
        # value and gradient agree across the interface for every mode angle
        assert np.max(np.abs(np.cos(4 * theta) * (va - vb))) <= 1e-10
        assert np.max(np.abs(np.cos(4 * theta) * (da - db))) <= 1e-10


def test_biharmonic_by_finite_differences(field):
    # fourth-order FD of the biharmonic operator at interior sample points
    rng = np.random.default_rng(4)
    pts = []
    while len(pts) < 12:
        x, y = rng.uniform(-0.6, 0.6, 2)
        r = np.hypot(x, y)
        if 0.05 < r < field.r1 - 0.05 or field.r1 + 0.05 < r < field.r2 - 0.05:
            pts.append((x, y))
    h = 1e-3
    for x, y in pts:
        xs = np.array([x - 2 * h, x - h, x, x + h, x + 2 * h])
        lap_x = field.laplacian(xs, np.full(5, y))
        lap_y = field.laplacian(np.full(5, x), np.array([y - 2 * h, y - h, y, y + h, y + 2 * h]))
        stencil = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
        bih = stencil @ lap_x + stencil @ lap_y
        scale = max(1.0, abs(field.laplacian(np.array([x]), np.array([y]))[0]) / h)
        assert abs(bih) <= 1e-4 * max(scale, 1e3)


def test_laplacian_jump_nonzero_at_inner_interface(field):
    eps = 1e-9
    inner = field.laplacian(np.array([field.r1 - eps]), np.array([0.0]))[0]
    outer = field.laplacian(np.array([field.r1 + eps]), np.array([0.0]))[0]
    assert abs(outer - inner) > 0.1


def test_gradient_matches_finite_differences(field):
    rng = np.random.default_rng(9)
    x = rng.uniform(-0.62, 0.62, 40)
    y = rng.uniform(-0.62, 0.62, 40)
    r = np.hypot(x, y)
    keep = (np.abs(r - field.r1) > 0.02) & (np.abs(r - field.r2) > 0.02) & (r > 0.05)
    x, y = x[keep], y[keep]
    h = 1e-7
    gx, gy = field.grad(x, y)
    fdx = (field.value(x + h, y) - field.value(x - h, y)) / (2 * h)
    fdy = (field.value(x, y + h) - field.value(x, y - h)) / (2 * h)
    assert np.max(np.abs(gx - fdx)) <= 1e-5
    assert np.max(np.abs(gy - fdy)) <= 1e-5


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        BenchmarkParams(r1=0.5, r2=0.4)


def test_benchmark_particles_shapes():
    inner, outer = benchmark_particles(BenchmarkParams())
    assert inner.variable_height and not inner.exterior
    assert not outer.variable_height and outer.exterior
    assert inner.shape.a == pytest.approx(1 / 3)
    assert outer.shape.a == pytest.approx(2 / 3)
    theta = np.linspace(0, 2 * np.pi, 8)
    assert np.allclose(inner.f1(theta), np.cos(4 * theta))
    assert np.allclose(inner.f2(theta), 0.0)
