"""Bicubic Hermite shape functions on rectangles.

The 16 local functions per cell are tensor products of the 1D cubic Hermite
polynomials on [0,1].  Derivative DOFs are stored in physical units, so every
shape function attached to multi-index alpha carries the scaling
hx^alpha_x * hy^alpha_y.  All evaluation routines are vectorized over points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DOF_MULTI_INDICES, Space

#: Local corner order, matching RectGrid.cell_nodes.
CELL_CORNERS = ((0, 0), (1, 0), (0, 1), (1, 1))

#: (alpha, corner) -> row in the Hermite coefficient table below.
_H_COEFFS = {
    # value functions
    (0, 0): (1.0, 0.0, -3.0, 2.0),   # 1 - 3t^2 + 2t^3
    (0, 1): (0.0, 0.0, 3.0, -2.0),   # 3t^2 - 2t^3
    # derivative functions
    (1, 0): (0.0, 1.0, -2.0, 1.0),   # t - 2t^2 + t^3
    (1, 1): (0.0, 0.0, -1.0, 1.0),   # -t^2 + t^3
}


def _poly_eval(coeffs, t, deriv):
    c0, c1, c2, c3 = coeffs
    if deriv == 0:
        return c0 + t * (c1 + t * (c2 + t * c3))
    if deriv == 1:
        return c1 + t * (2.0 * c2 + t * 3.0 * c3)
    if deriv == 2:
        return 2.0 * c2 + t * 6.0 * c3
    raise ValueError(f"unsupported derivative order {deriv}")


def hermite_1d(alpha, corner, t, deriv=0):
    """1D Hermite basis polynomial for DOF type ``alpha`` at ``corner``."""
    return _poly_eval(_H_COEFFS[(alpha, corner)], np.asarray(t, dtype=float), deriv)


@dataclass(frozen=True)
class ShapeEval:
    """All derivatives up to mixed second order of one shape function."""

    value: float
    grad: np.ndarray
    dxx: float
    dyy: float
    dxy: float


def shape_table(xi, eta, hx, hy, derivs=("v", "dx", "dy", "dxx", "dyy", "dxy")):
    """Evaluate all 16 shape functions at reference points.

    Returns a dict of (npts, 16) arrays keyed by derivative name; entries are
    in physical units for a cell of size (hx, hy).  Local function order is
    corner-major (corner order of CELL_CORNERS), derivative-minor
    (DOF_MULTI_INDICES).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    need_dx = {"v": 0, "dx": 1, "dy": 0, "dxx": 2, "dyy": 0, "dxy": 1}
    need_dy = {"v": 0, "dx": 0, "dy": 1, "dxx": 0, "dyy": 2, "dxy": 1}
    orders_x = {need_dx[d] for d in derivs}
    orders_y = {need_dy[d] for d in derivs}

    # 1D tables: fx[(alpha, corner, order)] of shape (npts,)
    fx = {(a, c, o): hermite_1d(a, c, xi, o) for a in (0, 1) for c in (0, 1) for o in orders_x}
    fy = {(a, c, o): hermite_1d(a, c, eta, o) for a in (0, 1) for c in (0, 1) for o in orders_y}

    out = {d: np.empty((xi.size, 16)) for d in derivs}
    for ci, (cx, cy) in enumerate(CELL_CORNERS):
        for ai, (ax, ay) in enumerate(DOF_MULTI_INDICES):
            loc = 4 * ci + ai
            for d in derivs:
                ox, oy = need_dx[d], need_dy[d]
                scale = hx ** (ax - ox) * hy ** (ay - oy)
                out[d][:, loc] = scale * fx[(ax, cx, ox)] * fy[(ay, cy, oy)]
    return out


def eval_shape(local_index, point, hx=1.0, hy=1.0) -> ShapeEval:
    """Evaluate one local shape function at a reference point in [0,1]^2."""
    if not 0 <= local_index < 16:
        raise ValueError(f"local index {local_index} out of range 0..15")
    xi, eta = point
    if not (0.0 <= xi <= 1.0 and 0.0 <= eta <= 1.0):
        raise ValueError(f"point {point} outside the reference square")
    tab = shape_table([xi], [eta], hx, hy)
    k = local_index
    return ShapeEval(
        value=tab["v"][0, k],
        grad=np.array([tab["dx"][0, k], tab["dy"][0, k]]),
        dxx=tab["dxx"][0, k],
        dyy=tab["dyy"][0, k],
        dxy=tab["dxy"][0, k],
    )


def interpolate(space: Space, field) -> np.ndarray:
    """Nodal interpolation onto the C1 space.

    ``field`` must provide vectorized ``value(x, y)``, ``grad(x, y)`` (pair of
    arrays) and ``dxy(x, y)``.  Returns the full DOF vector (Dirichlet DOFs
    included); the interpolant reproduces all four nodal quantities exactly.
    """
    grid = space.grid
    nodes = np.arange(grid.n_nodes)
    x, y = grid.node_coords(nodes)
    gx, gy = field.grad(x, y)
    coeffs = np.empty(4 * grid.n_nodes)
    coeffs[0::4] = field.value(x, y)
    coeffs[1::4] = gx
    coeffs[2::4] = gy
    coeffs[3::4] = field.dxy(x, y)
    return coeffs


def eval_coeffs(space: Space, coeffs, x, y, derivs=("v",)):
    """Evaluate a coefficient-vector field at arbitrary points.

    ``coeffs`` is a full DOF vector.  Returns a dict of point arrays, one per
    requested derivative; "lap" is available as dxx + dyy.
    """
    grid = space.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    want = set(derivs)
    table_derivs = sorted((want - {"lap"}) | ({"dxx", "dyy"} if "lap" in want else set()))
    cx, cy, xi, eta = grid.locate(x, y)
    tab = shape_table(xi, eta, grid.hx, grid.hy, derivs=tuple(table_derivs))
    dofs = space.dofmap.cell_dofs(cx, cy)          # (npts, 16)
    local_coeffs = np.asarray(coeffs)[dofs]        # (npts, 16)
    out = {}
    for d in table_derivs:
        out[d] = np.einsum("pk,pk->p", tab[d], local_coeffs)
    if "lap" in want:
        out["lap"] = out["dxx"] + out["dyy"]
        for d in ("dxx", "dyy"):
            if d not in want:
                del out[d]
    return out
