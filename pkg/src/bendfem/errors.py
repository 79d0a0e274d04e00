"""Error measurement and convergence-order estimation.

Because the solved fields are not smooth across particle boundaries, all error
integrals are split into the particle regions and the membrane region using
the cut-cell decomposition; integrating naively over grid cells would stall
the measured orders.  Reference comparisons between nested grids evaluate both
fields at the fine grid's (split) quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import eval_coeffs
from .geometry import MEMBRANE
from .grid import Space
from .quadrature import GridDecomposition, decompose_grid, grid_curve_rule, tensor_gauss

NORMS = ("L2", "H1", "H2")
_DERIVS = {"L2": ("v",), "H1": ("dx", "dy"), "H2": ("lap",)}


def _diff_square(uh, exact, x, y, norm):
    if norm == "L2":
        return (uh["v"] - exact.value(x, y)) ** 2
    if norm == "H1":
        gx, gy = exact.grad(x, y)
        return (uh["dx"] - gx) ** 2 + (uh["dy"] - gy) ** 2
    if norm == "H2":
        return (uh["lap"] - exact.laplacian(x, y)) ** 2
    raise ValueError(f"unknown norm {norm!r}")


def region_tags(particles):
    return list(range(len(particles))) + [MEMBRANE]


def compute_errors(space: Space, coeffs_full, exact, particles, norms=NORMS,
                   dec: GridDecomposition | None = None, order=5, depth=8):
    """Subdomain-split norms of (discrete field - exact field).

    Returns {norm: value}; ``exact`` provides value/grad/laplacian.
    """
    if dec is None:
        dec = decompose_grid(particles, space.grid, order=order, depth=depth)
    derivs = tuple({d for n in norms for d in _DERIVS[n]})
    acc = {n: 0.0 for n in norms}
    for tag in region_tags(particles):
        rule = dec.region_rule(tag)
        if rule.n == 0:
            continue
        x, y = rule.points[:, 0], rule.points[:, 1]
        uh = eval_coeffs(space, coeffs_full, x, y, derivs=derivs)
        for n in norms:
            acc[n] += float(np.sum(rule.weights * _diff_square(uh, exact, x, y, n)))
    return {n: np.sqrt(v) for n, v in acc.items()}


def compute_error(space, coeffs_full, exact, particles, norm, **kw):
    return compute_errors(space, coeffs_full, exact, particles, norms=(norm,), **kw)[norm]


def compute_errors_naive(space: Space, coeffs_full, exact, norms=NORMS, order=5,
                         cell_field=None):
    """Plain per-cell tensor quadrature, ignoring the interfaces; the negative
    control for the subdomain split.

    ``cell_field(xc, yc)``, when given, picks the comparison field per cell
    from its center (e.g. one closed-form branch of a piecewise exact
    solution), reproducing a measurement that treats every grid element as
    single-region.
    """
    grid = space.grid
    derivs = tuple({d for n in norms for d in _DERIVS[n]})
    acc = {n: 0.0 for n in norms}
    ref = tensor_gauss((0.0, grid.hx, 0.0, grid.hy), order)
    for cid in range(grid.n_cells):
        cx, cy = grid.cell_index(cid)
        x0, y0 = grid.cell_origin(cx, cy)
        x = ref.points[:, 0] + x0
        y = ref.points[:, 1] + y0
        field = exact if cell_field is None else cell_field(x0 + grid.hx / 2,
                                                            y0 + grid.hy / 2)
        uh = eval_coeffs(space, coeffs_full, x, y, derivs=derivs)
        for n in norms:
            acc[n] += float(np.sum(ref.weights * _diff_square(uh, field, x, y, n)))
    return {n: np.sqrt(v) for n, v in acc.items()}


def compare_to_reference(coarse_space: Space, coarse_coeffs, ref_space: Space,
                         ref_coeffs, particles, norms=NORMS,
                         dec: GridDecomposition | None = None, order=5, depth=8):
    """Norms of (coarse field - reference field) on nested grids.

    Quadrature lives on the reference grid (subdomain-split); the reference
    field is evaluated natively, the coarse field by point location.
    """
    cg, rg = coarse_space.grid, ref_space.grid
    ratio_x, ratio_y = rg.nx / cg.nx, rg.ny / cg.ny
    if ratio_x != int(ratio_x) or ratio_y != int(ratio_y):
        raise ValueError(f"grids are not nested: {cg.nx}x{cg.ny} vs {rg.nx}x{rg.ny}")
    if (cg.xmin, cg.xmax, cg.ymin, cg.ymax) != (rg.xmin, rg.xmax, rg.ymin, rg.ymax):
        raise ValueError("grids cover different domains")
    if dec is None:
        dec = decompose_grid(particles, rg, order=order, depth=depth)
    derivs = tuple({d for n in norms for d in _DERIVS[n]})
    acc = {n: 0.0 for n in norms}
    for tag in region_tags(particles):
        rule = dec.region_rule(tag)
        if rule.n == 0:
            continue
        x, y = rule.points[:, 0], rule.points[:, 1]
        uc = eval_coeffs(coarse_space, coarse_coeffs, x, y, derivs=derivs)
        ur = eval_coeffs(ref_space, ref_coeffs, x, y, derivs=derivs)
        for n in norms:
            if n == "L2":
                d2 = (uc["v"] - ur["v"]) ** 2
            elif n == "H1":
                d2 = (uc["dx"] - ur["dx"]) ** 2 + (uc["dy"] - ur["dy"]) ** 2
            else:
                d2 = (uc["lap"] - ur["lap"]) ** 2
            acc[n] += float(np.sum(rule.weights * d2))
    return {n: np.sqrt(v) for n, v in acc.items()}


def boundary_residuals(space: Space, coeffs_full, particle, curve_pts=6,
                       max_dtheta=0.2):
    """L2 boundary residuals of the coupling conditions: (height profile with
    the mean removed for variable-height particles, normal slope)."""
    rule = grid_curve_rule(particle, space.grid, pts_per_seg=curve_pts,
                           max_dtheta=max_dtheta)
    x, y = rule.points[:, 0], rule.points[:, 1]
    uh = eval_coeffs(space, coeffs_full, x, y, derivs=("v", "dx", "dy"))
    d1 = uh["v"] - particle.f1(rule.thetas)
    if particle.variable_height:
        d1 = d1 - np.sum(rule.weights * d1) / rule.total()
    dn = rule.normals[:, 0] * uh["dx"] + rule.normals[:, 1] * uh["dy"]
    d2 = dn - particle.f2(rule.thetas)
    return (float(np.sqrt(np.sum(rule.weights * d1**2))),
            float(np.sqrt(np.sum(rule.weights * d2**2))))


def compute_eoc(hs, errors):
    """Pairwise and least-squares orders of log(err) against log(h).

    Zero-error rows are excluded from the fit and flagged; the fit is NaN when
    fewer than two usable rows remain.
    """
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.size != errors.size or hs.size < 2:
        raise ValueError("need at least two (h, error) rows")
    if np.any(np.diff(hs) == 0):
        raise ValueError("mesh sizes must be distinct")
    pairwise = np.full(hs.size - 1, np.nan)
    for k in range(hs.size - 1):
        if errors[k] > 0 and errors[k + 1] > 0:
            pairwise[k] = np.log(errors[k] / errors[k + 1]) / np.log(hs[k] / hs[k + 1])
    usable = errors > 0
    if np.count_nonzero(usable) >= 2:
        fit = float(np.polyfit(np.log(hs[usable]), np.log(errors[usable]), 1)[0])
    else:
        fit = float("nan")
    return pairwise, fit, usable


@dataclass
class ErrorReport:
    """Per-grid error rows with estimated orders of convergence."""

    rows: list = field(default_factory=list)  # dicts: N, h, errL2, errH1, errH2
    extras: dict = field(default_factory=dict)

    def add_row(self, N, h, errs):
        self.rows.append({"N": N, "h": h,
                          **{f"err{n}": errs.get(n, 0.0) for n in NORMS}})

    def column(self, key):
        return np.array([r[key] for r in self.rows])

    def eoc(self, norm):
        return compute_eoc(self.column("h"), self.column(f"err{norm}"))

    def eoc_fit(self, norm):
        return self.eoc(norm)[1]

    def to_csv(self) -> str:
        lines = ["N,h,errL2,errH1,errH2"]
        for r in self.rows:
            lines.append(",".join([str(r["N"]), f"{r['h']:.12g}"]
                                  + [f"{r[f'err{n}']:.12g}" for n in NORMS]))
        if len(self.rows) >= 2:
            for n in NORMS:
                lines.append(f"# eoc_fit,{n},{self.eoc_fit(n):.12g}")
        return "\n".join(lines) + "\n"
