import numpy as np
import pytest

from bendfem.assembly import SoftCurveProblem, build_system
from bendfem.basis import interpolate
from bendfem.benchmark import (BenchmarkParams, benchmark_particles,
                               derive_coefficients)
from bendfem.errors import (ErrorReport, boundary_residuals, compare_to_reference,
                            compute_eoc, compute_errors, compute_errors_naive)
from bendfem.fields import SinProduct, ZeroField
from bendfem.grid import build_space
from bendfem.solve import solve_system


def interp_errors(N, field):
    sp = build_space((-1, 1, -1, 1), N)
    coeffs = interpolate(sp, field)
    return compute_errors(sp, coeffs, field, particles=[], order=6)


def test_interpolation_error_orders_smooth_field():
    # bicubic interpolation of a smooth field: orders 4 / 3 / 2 in L2 / H1 / H2
    field = SinProduct()
    hs, errs = [], []
    for N in (8, 16, 32, 64):
        errs.append(interp_errors(N, field))
        hs.append(1.0 / N)
    for norm, expected, tol in (("L2", 4.0, 0.1), ("H1", 3.0, 0.1), ("H2", 2.0, 0.1)):
        _, fit, _ = compute_eoc(hs, [e[norm] for e in errs])
        assert fit == pytest.approx(expected, abs=tol)


def test_zero_solution_zero_field():
    sp = build_space((-1, 1, -1, 1), 8)
    errs = compute_errors(sp, np.zeros(4 * sp.grid.n_nodes), ZeroField(), particles=[])
    assert all(v == 0.0 for v in errs.values())


def test_error_sign_symmetry():
    field = SinProduct()

    class Neg:
        def value(self, x, y):
            return -field.value(x, y)

        def grad(self, x, y):
            gx, gy = field.grad(x, y)
            return -gx, -gy

        def laplacian(self, x, y):
            return -field.laplacian(x, y)

    sp = build_space((-1, 1, -1, 1), 8)
    coeffs = interpolate(sp, field)
    e1 = compute_errors(sp, coeffs, field, particles=[])
    e2 = compute_errors(sp, -coeffs, Neg(), particles=[])
    for n in e1:
        assert e1[n] == pytest.approx(e2[n], rel=1e-12)


def test_subdomain_split_consistent_with_whole_domain():
    # for a smooth integrand the split integral must agree with plain
    # cell-wise quadrature
    field = SinProduct()
    particles = benchmark_particles(BenchmarkParams())
    sp = build_space((-1, 1, -1, 1), 12)
    coeffs = interpolate(sp, field)
    split = compute_errors(sp, coeffs, field, particles=particles)
    naive = compute_errors_naive(sp, coeffs, field)
    for n in split:
        assert abs(split[n] - naive[n]) <= 1e-8 * max(1.0, naive[n])


def test_naive_quadrature_overestimates_h2_error():
    # the solved benchmark field kinks across the interfaces: a measurement
    # that treats every grid element as single-region inflates the H2 error
    params = BenchmarkParams()
    exact = derive_coefficients(params)
    particles = benchmark_particles(params)
    sp = build_space((-1, 1, -1, 1), 16)
    h = 1 / 16
    sys_ = build_system(sp, particles, SoftCurveProblem(eps1=1e-3 * h**2, eps2=1e-3 * h))
    _, full = solve_system(sp, sys_)
    split = compute_errors(sp, full, exact, particles, norms=("H2",))["H2"]
    naive = compute_errors_naive(
        sp, full, exact, norms=("H2",),
        cell_field=lambda xc, yc: exact.branch_view(exact.branch_at(xc, yc)))["H2"]
    assert naive / split > 1.0


def test_compute_eoc_examples():
    pw, fit, _ = compute_eoc([0.1, 0.05], [0.1, 0.05])
    assert pw[0] == pytest.approx(1.0)
    assert fit == pytest.approx(1.0)
    hs = np.array([0.2, 0.1, 0.05, 0.025])
    _, fit, _ = compute_eoc(hs, 3.7 * hs**0.5)
    assert fit == pytest.approx(0.5, abs=1e-12)
    _, fit, _ = compute_eoc(hs, np.full(4, 2.0))
    assert fit == pytest.approx(0.0, abs=1e-12)


def test_compute_eoc_zero_rows_excluded():
    hs = [0.2, 0.1, 0.05]
    pw, fit, usable = compute_eoc(hs, [0.1, 0.0, 0.025])
    assert np.isnan(pw[0]) and np.isnan(pw[1])
    assert usable.tolist() == [True, False, True]
    assert fit == pytest.approx(1.0)


def test_compute_eoc_validation():
    with pytest.raises(ValueError):
        compute_eoc([0.1], [0.1])
    with pytest.raises(ValueError):
        compute_eoc([0.1, 0.1], [1.0, 1.0])


def test_compare_to_reference_same_grid_is_zero():
    sp = build_space((-1, 1, -1, 1), 8)
    coeffs = interpolate(sp, SinProduct())
    d = compare_to_reference(sp, coeffs, sp, coeffs, particles=[])
    assert all(v == 0.0 for v in d.values())


def test_compare_to_reference_zero_reference_gives_norm():
    field = SinProduct()
    coarse = build_space((-1, 1, -1, 1), 8)
    fine = build_space((-1, 1, -1, 1), 32)
    cc = interpolate(coarse, field)
    d = compare_to_reference(coarse, cc, fine, np.zeros(4 * fine.grid.n_nodes),
                             particles=[], norms=("L2",))
    # ~ L2 norm of the coarse interpolant ~ |sin sin| over [-1,1]^2 = sqrt(1) = 1... area 4, mean 1/4
    assert d["L2"] == pytest.approx(1.0, rel=5e-3)


def test_compare_to_reference_matches_direct_error():
    field = SinProduct()
    coarse = build_space((-1, 1, -1, 1), 8)
    fine = build_space((-1, 1, -1, 1), 64)
    cc = interpolate(coarse, field)
    fc = interpolate(fine, field)
    vs_ref = compare_to_reference(coarse, cc, fine, fc, particles=[])
    direct = compute_errors(coarse, cc, field, particles=[])
    for n in ("L2", "H1", "H2"):
        assert vs_ref[n] == pytest.approx(direct[n], rel=0.05)


def test_compare_to_reference_rejects_non_nested():
    a = build_space((-1, 1, -1, 1), 8)
    b = build_space((-1, 1, -1, 1), 12)
    with pytest.raises(ValueError):
        compare_to_reference(a, np.zeros(4 * a.grid.n_nodes),
                             b, np.zeros(4 * b.grid.n_nodes), particles=[])


def test_boundary_residuals_of_compatible_field():
    # a field constant through a zero-data particle: mean-removed profile
    # residual and slope residual both vanish
    from tests.test_assembly import _RadialPlateau
    from bendfem.geometry import Particle, circle

    sp = build_space((-1, 1, -1, 1), 16)
    particle = Particle(shape=circle((0.0, 0.0), 1 / 3))
    coeffs = interpolate(sp, _RadialPlateau(level=4.2))
    r1, r2 = boundary_residuals(sp, coeffs, particle)
    assert r1 <= 1e-10
    assert r2 <= 1e-10


def test_error_report_csv_format():
    rep = ErrorReport()
    rep.add_row(8, 0.125, {"L2": 0.5, "H1": 1.0, "H2": 2.0})
    rep.add_row(16, 0.0625, {"L2": 0.25, "H1": 0.5, "H2": 1.4142135623730951})
    csv = rep.to_csv()
    lines = csv.strip().split("\n")
    assert lines[0] == "N,h,errL2,errH1,errH2"
    assert lines[1].startswith("8,0.125,0.5,1,2")
    assert any(line.startswith("# eoc_fit,L2,1") for line in lines)
    assert any(line.startswith("# eoc_fit,H2,0.5") for line in lines)
