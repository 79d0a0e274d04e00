"""Assembly of the bending energy form, the curve and bulk penalty forms with
their projection corrections, and penalty right-hand sides.

Projection corrections (one per variable-height particle) are rank-one and
densely coupled along the particle, so they are kept out of the sparse matrix
and carried as signed rank-one updates; the solver applies them by a Woodbury
correction.  All matrices live on free DOFs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import shape_table
from .grid import Space
from .quadrature import (GridDecomposition, decompose_grid, gauss_01,
                         grid_curve_rule)


@dataclass(frozen=True)
class QuadOptions:
    """Accuracy knobs for all integration in assembly and error measurement."""

    order: int = 5
    cutcell_depth: int = 8
    curve_pts: int = 6
    max_dtheta: float = 0.2


@dataclass(frozen=True)
class SoftCurveProblem:
    """Penalize height-profile and slope deviations on the particle curves."""

    eps1: float
    eps2: float


@dataclass(frozen=True)
class SoftBulkProblem:
    """Penalize deviation from prescribed bulk fields over the particle areas,
    in the s in {0, 1} Sobolev sense; ``bulk_fields`` holds one field per
    particle (value/grad callables)."""

    s: int
    eps: float
    bulk_fields: tuple

    def __post_init__(self):
        if self.s not in (0, 1):
            raise ValueError(f"bulk penalty smoothness must be 0 or 1, got {self.s}")


@dataclass
class AssembledSystem:
    """base + sum(sign * coeff * v v^T) on free DOFs, with right-hand side."""

    base: sp.csr_matrix
    lowrank: list
    rhs: np.ndarray
    n_free: int

    def matvec(self, x):
        y = self.base @ x
        for sign, coeff, v in self.lowrank:
            y += sign * coeff * v * np.dot(v, x)
        return y

    def form_value(self, x):
        return float(np.dot(x, self.matvec(x)))


class _CooBuilder:
    """Accumulates 16x16 cell blocks and restricts to free DOFs on build."""

    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add_block(self, dofs, block):
        self.rows.append(np.repeat(dofs, 16))
        self.cols.append(np.tile(dofs, 16))
        self.vals.append(np.asarray(block).ravel())

    def add_blocks(self, dofs, blocks):
        # dofs (ncells, 16), blocks (ncells, 16, 16) or a shared (16, 16)
        n = dofs.shape[0]
        self.rows.append(np.repeat(dofs, 16, axis=1).ravel())
        self.cols.append(np.tile(dofs, 16).ravel())
        if np.ndim(blocks) == 2:
            self.vals.append(np.tile(np.asarray(blocks).ravel(), n))
        else:
            self.vals.append(np.asarray(blocks).reshape(n, -1).ravel())

    def build(self, dofmap):
        if not self.rows:
            return sp.csr_matrix((dofmap.n_free, dofmap.n_free))
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        vals = np.concatenate(self.vals)
        fi = dofmap.free_index[rows]
        fj = dofmap.free_index[cols]
        keep = (fi >= 0) & (fj >= 0)
        mat = sp.coo_matrix((vals[keep], (fi[keep], fj[keep])),
                            shape=(dofmap.n_free, dofmap.n_free)).tocsr()
        # duplicate-summation order differs between (i,j) and (j,i); restore
        # exact symmetry
        return 0.5 * (mat + mat.T)


def _cell_groups(cells):
    order = np.argsort(cells, kind="stable")
    sorted_cells = cells[order]
    starts = np.flatnonzero(np.r_[True, np.diff(sorted_cells) != 0])
    ends = np.r_[starts[1:], cells.size]
    for s, e in zip(starts, ends):
        yield int(sorted_cells[s]), order[s:e]


def _rule_tables(space: Space, rule, derivs):
    """Iterate (cell dofs, point subset indices, shape tables) over the cells
    of a cell-tagged quadrature rule."""
    grid = space.grid
    for cid, idx in _cell_groups(rule.cells):
        cx, cy = grid.cell_index(cid)
        x0, y0 = grid.cell_origin(cx, cy)
        xi = (rule.points[idx, 0] - x0) / grid.hx
        eta = (rule.points[idx, 1] - y0) / grid.hy
        tab = shape_table(xi, eta, grid.hx, grid.hy, derivs=derivs)
        dofs = space.dofmap.cell_dofs(cx, cy)
        yield dofs, idx, tab


def _sym(block):
    return 0.5 * (block + block.T)


def element_energy_matrix(hx, hy, kappa, sigma, order=5):
    """kappa (lap, lap) + sigma (grad, grad) on one cell; shared by all cells
    of a uniform grid."""
    t, w = gauss_01(order)
    XI, ETA = np.meshgrid(t, t, indexing="ij")
    wq = np.outer(w, w).ravel() * hx * hy
    tab = shape_table(XI.ravel(), ETA.ravel(), hx, hy,
                      derivs=("dx", "dy", "dxx", "dyy"))
    lap = tab["dxx"] + tab["dyy"]
    E = kappa * np.einsum("qi,q,qj->ij", lap, wq, lap)
    if sigma != 0.0:
        E += sigma * (np.einsum("qi,q,qj->ij", tab["dx"], wq, tab["dx"])
                      + np.einsum("qi,q,qj->ij", tab["dy"], wq, tab["dy"]))
    return 0.5 * (E + E.T)  # exact symmetry despite roundoff


def assemble_energy(space: Space, kappa=1.0, sigma=0.0, order=5):
    """Bending + tension energy matrix on free DOFs."""
    if kappa <= 0 or sigma < 0:
        raise ValueError("need kappa > 0 and sigma >= 0")
    grid = space.grid
    E = element_energy_matrix(grid.hx, grid.hy, kappa, sigma, order)
    cids = np.arange(grid.n_cells)
    cxs, cys = grid.cell_index(cids)
    dofs = space.dofmap.cell_dofs(cxs, cys)
    builder = _CooBuilder()
    builder.add_blocks(dofs, E)
    return builder.build(space.dofmap)


@dataclass
class CurveAssembly:
    """Per-particle curve integrals shared by matrix and rhs assembly."""

    particle: object
    trace_mass: sp.csr_matrix            # (T1 w, T1 v)
    slope_mass: sp.csr_matrix            # (T2 w, T2 v)
    moment: np.ndarray                   # int psi dsigma (free)
    data_profile: np.ndarray             # int f1 psi (free)
    data_slope: np.ndarray               # int f2 dnu(psi) (free)
    profile_total: float                 # int f1
    perimeter: float


def _assemble_curve(space: Space, particle, quad: QuadOptions) -> CurveAssembly:
    rule = grid_curve_rule(particle, space.grid,
                           pts_per_seg=quad.curve_pts, max_dtheta=quad.max_dtheta)
    if rule.n == 0:
        raise ValueError("particle boundary does not intersect the grid")
    f1 = np.asarray(particle.f1(rule.thetas), dtype=float)
    f2 = np.asarray(particle.f2(rule.thetas), dtype=float)
    m1, m2 = _CooBuilder(), _CooBuilder()
    moment = np.zeros(space.dofmap.n_total)
    a1 = np.zeros(space.dofmap.n_total)
    a2 = np.zeros(space.dofmap.n_total)
    for dofs, idx, tab in _rule_tables(space, rule, ("v", "dx", "dy")):
        w = rule.weights[idx]
        B = tab["v"]
        Bn = rule.normals[idx, 0, None] * tab["dx"] + rule.normals[idx, 1, None] * tab["dy"]
        m1.add_block(dofs, _sym(np.einsum("qi,q,qj->ij", B, w, B)))
        m2.add_block(dofs, _sym(np.einsum("qi,q,qj->ij", Bn, w, Bn)))
        np.add.at(moment, dofs, w @ B)
        np.add.at(a1, dofs, (w * f1[idx]) @ B)
        np.add.at(a2, dofs, (w * f2[idx]) @ Bn)
    dm = space.dofmap
    return CurveAssembly(
        particle=particle,
        trace_mass=m1.build(dm),
        slope_mass=m2.build(dm),
        moment=dm.restrict(moment),
        data_profile=dm.restrict(a1),
        data_slope=dm.restrict(a2),
        profile_total=float(np.sum(rule.weights * f1)),
        perimeter=rule.total(),
    )


def assemble_curve_penalty(space: Space, particles, which, quad=QuadOptions()):
    """Curve penalty form: trace mass (which=1, with mean-removal rank-one per
    variable-height particle) or normal-slope mass (which=2, no projection)."""
    if which not in (1, 2):
        raise ValueError("curve penalty index must be 1 or 2")
    mats, lowrank = [], []
    for ca in (_assemble_curve(space, p, quad) for p in particles):
        if which == 1:
            mats.append(ca.trace_mass)
            if ca.particle.variable_height:
                lowrank.append((-1, 1.0 / ca.perimeter, ca.moment))
        else:
            mats.append(ca.slope_mass)
    return sum(mats[1:], start=mats[0]), lowrank


@dataclass
class BulkAssembly:
    particle_index: int
    matrix: sp.csr_matrix
    moment: np.ndarray        # int psi (s=0) or int psi (s=1 rank-one carrier)
    data: np.ndarray          # int g psi (s=0) or int grad g . grad psi (s=1)
    data_total: float         # int g
    area: float


def _assemble_bulk_region(space: Space, dec: GridDecomposition, i, s, bulk_field) -> BulkAssembly:
    rule = dec.region_rule(i)
    builder = _CooBuilder()
    moment = np.zeros(space.dofmap.n_total)
    data = np.zeros(space.dofmap.n_total)
    data_total = 0.0
    derivs = ("v",) if s == 0 else ("v", "dx", "dy")
    for dofs, idx, tab in _rule_tables(space, rule, derivs):
        w = rule.weights[idx]
        x, y = rule.points[idx, 0], rule.points[idx, 1]
        np.add.at(moment, dofs, w @ tab["v"])
        if s == 0:
            builder.add_block(dofs, _sym(np.einsum("qi,q,qj->ij", tab["v"], w, tab["v"])))
            if bulk_field is not None:
                g = np.asarray(bulk_field.value(x, y), dtype=float)
                np.add.at(data, dofs, (w * g) @ tab["v"])
                data_total += float(np.sum(w * g))
        else:
            builder.add_block(dofs, _sym(np.einsum("qi,q,qj->ij", tab["dx"], w, tab["dx"])
                              + np.einsum("qi,q,qj->ij", tab["dy"], w, tab["dy"])))
            if bulk_field is not None:
                gx, gy = bulk_field.grad(x, y)
                np.add.at(data, dofs, (w * np.asarray(gx)) @ tab["dx"]
                          + (w * np.asarray(gy)) @ tab["dy"])
                data_total += float(np.sum(w * bulk_field.value(x, y)))
    dm = space.dofmap
    return BulkAssembly(particle_index=i, matrix=builder.build(dm),
                        moment=dm.restrict(moment), data=dm.restrict(data),
                        data_total=data_total, area=rule.total())


def assemble_bulk_penalty(space: Space, particles, s, quad=QuadOptions(), dec=None,
                          bulk_fields=None):
    """Bulk penalty form over all particle areas.

    s=0 is an area mass form; variable-height particles subtract the mean by a
    negative rank-one.  s=1 is the gradient form; fixed-height particles add
    the (int w)(int v) rank-one completing the reduced H1 norm.
    """
    if s not in (0, 1):
        raise ValueError("bulk penalty smoothness must be 0 or 1")
    if dec is None:
        dec = decompose_grid(particles, space.grid, order=quad.order,
                             depth=quad.cutcell_depth)
    mats, lowrank, assemblies = [], [], []
    for i, p in enumerate(particles):
        gfield = None if bulk_fields is None else bulk_fields[i]
        ba = _assemble_bulk_region(space, dec, i, s, gfield)
        assemblies.append(ba)
        mats.append(ba.matrix)
        if s == 0 and p.variable_height:
            lowrank.append((-1, 1.0 / ba.area, ba.moment))
        elif s == 1 and not p.variable_height:
            lowrank.append((+1, 1.0, ba.moment))
    return sum(mats[1:], start=mats[0]), lowrank, assemblies


def assemble_rhs(space: Space, particles, problem, quad=QuadOptions(),
                 curve_assemblies=None, bulk_assemblies=None):
    """Penalty right-hand side from the coupling data; there is no body force
    in this application."""
    n_free = space.dofmap.n_free
    rhs = np.zeros(n_free)
    if isinstance(problem, SoftCurveProblem):
        if curve_assemblies is None:
            curve_assemblies = [_assemble_curve(space, p, quad) for p in particles]
        for ca in curve_assemblies:
            term = ca.data_profile.copy()
            if ca.particle.variable_height:
                term -= (ca.profile_total / ca.perimeter) * ca.moment
            rhs += term / problem.eps1
            rhs += ca.data_slope / problem.eps2
        return rhs
    if isinstance(problem, SoftBulkProblem):
        if bulk_assemblies is None:
            if problem.bulk_fields is None:
                raise ValueError("soft bulk problem needs prescribed bulk fields")
            _, _, bulk_assemblies = assemble_bulk_penalty(
                space, particles, problem.s, quad, bulk_fields=problem.bulk_fields)
        for ba, p in zip(bulk_assemblies, particles):
            term = ba.data.copy()
            if problem.s == 0 and p.variable_height:
                term -= (ba.data_total / ba.area) * ba.moment
            elif problem.s == 1 and not p.variable_height:
                term += ba.data_total * ba.moment
            rhs += term / problem.eps
        return rhs
    raise TypeError(f"unknown problem type {type(problem).__name__}")


def build_system(space: Space, particles, problem, kappa=1.0, sigma=0.0,
                 quad=QuadOptions(), dec=None) -> AssembledSystem:
    """Assemble energy + scaled penalty forms + data right-hand side."""
    A = assemble_energy(space, kappa=kappa, sigma=sigma, order=quad.order)
    if isinstance(problem, SoftCurveProblem):
        if problem.eps1 <= 0 or problem.eps2 <= 0:
            raise ValueError("penalty parameters must be positive")
        cas = [_assemble_curve(space, p, quad) for p in particles]
        base = A.copy()
        lowrank = []
        for ca in cas:
            base = base + ca.trace_mass / problem.eps1 + ca.slope_mass / problem.eps2
            if ca.particle.variable_height:
                lowrank.append((-1, 1.0 / (problem.eps1 * ca.perimeter), ca.moment))
        rhs = assemble_rhs(space, particles, problem, quad, curve_assemblies=cas)
        return AssembledSystem(base=base.tocsr(), lowrank=lowrank, rhs=rhs,
                               n_free=space.dofmap.n_free)
    if isinstance(problem, SoftBulkProblem):
        if problem.eps <= 0:
            raise ValueError("penalty parameter must be positive")
        M, lowrank_raw, bas = assemble_bulk_penalty(
            space, particles, problem.s, quad, dec=dec,
            bulk_fields=problem.bulk_fields)
        base = (A + M / problem.eps).tocsr()
        lowrank = [(sign, coeff / problem.eps, v) for sign, coeff, v in lowrank_raw]
        rhs = assemble_rhs(space, particles, problem, quad, bulk_assemblies=bas)
        return AssembledSystem(base=base, lowrank=lowrank, rhs=rhs,
                               n_free=space.dofmap.n_free)
    raise TypeError(f"unknown problem type {type(problem).__name__}")
