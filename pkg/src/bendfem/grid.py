"""Uniform rectangular grids and degree-of-freedom management.

Every node of the quad grid carries four degrees of freedom: value, the two
first partial derivatives, and the mixed second derivative.  Nodes on the
outer boundary are eliminated (all four DOFs), which realizes the clamped
outer boundary condition exactly on the C1 element space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Derivative multi-indices attached to each node, in storage order.
DOF_MULTI_INDICES = ((0, 0), (1, 0), (0, 1), (1, 1))
N_NODE_DOFS = 4


@dataclass(frozen=True)
class RectGrid:
    """Axis-aligned uniform grid of congruent rectangular cells."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"cell counts must be positive, got ({self.nx}, {self.ny})")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("bounds are degenerate or inverted")

    @property
    def hx(self) -> float:
        return (self.xmax - self.xmin) / self.nx

    @property
    def hy(self) -> float:
        return (self.ymax - self.ymin) / self.ny

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def node_id(self, ix, iy):
        """Node numbering runs x-fastest: id = iy*(nx+1) + ix."""
        return np.asarray(iy) * (self.nx + 1) + np.asarray(ix)

    def node_coords(self, node_id):
        node_id = np.asarray(node_id)
        ix = node_id % (self.nx + 1)
        iy = node_id // (self.nx + 1)
        return self.xmin + ix * self.hx, self.ymin + iy * self.hy

    def cell_id(self, cx, cy):
        return np.asarray(cy) * self.nx + np.asarray(cx)

    def cell_index(self, cell_id):
        cell_id = np.asarray(cell_id)
        return cell_id % self.nx, cell_id // self.nx

    def cell_nodes(self, cx, cy):
        """The four corner nodes of cell (cx, cy) in tensor order
        (0,0), (1,0), (0,1), (1,1)."""
        n00 = self.node_id(cx, cy)
        return np.stack([n00, n00 + 1, n00 + self.nx + 1, n00 + self.nx + 2], axis=-1)

    def cell_origin(self, cx, cy):
        return self.xmin + np.asarray(cx) * self.hx, self.ymin + np.asarray(cy) * self.hy

    def cell_bounds(self, cx, cy):
        x0, y0 = self.cell_origin(cx, cy)
        return x0, x0 + self.hx, y0, y0 + self.hy

    def locate(self, x, y):
        """Containing cell indices and local reference coordinates in [0,1]^2.

        Points on interior cell edges are assigned to the lower-indexed cell;
        points outside the grid are clamped to the nearest cell.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        tx = (x - self.xmin) / self.hx
        ty = (y - self.ymin) / self.hy
        cx = np.clip(np.floor(tx).astype(int), 0, self.nx - 1)
        cy = np.clip(np.floor(ty).astype(int), 0, self.ny - 1)
        # tie toward the lower-indexed cell on interior edges
        on_edge_x = (tx == cx) & (cx > 0)
        on_edge_y = (ty == cy) & (cy > 0)
        cx = np.where(on_edge_x, cx - 1, cx)
        cy = np.where(on_edge_y, cy - 1, cy)
        return cx, cy, tx - cx, ty - cy


def build_grid(bounds, n) -> RectGrid:
    """Create a uniform grid; ``bounds`` is (xmin, xmax, ymin, ymax),
    ``n`` the cell counts per axis (int or pair)."""
    if np.isscalar(n):
        n = (int(n), int(n))
    xmin, xmax, ymin, ymax = (float(b) for b in bounds)
    return RectGrid(xmin, xmax, ymin, ymax, int(n[0]), int(n[1]))


@dataclass(frozen=True)
class DofMap:
    """Global DOF numbering with outer-boundary elimination.

    Global index of (node p, multi-index alpha) is ``4*p + alpha_index``
    (node-major, derivative-minor).  ``free_index`` maps global DOFs to
    contiguous free indices (-1 for eliminated DOFs).
    """

    grid: RectGrid
    dirichlet_mask: np.ndarray
    free_index: np.ndarray
    free_dofs: np.ndarray

    @property
    def n_total(self) -> int:
        return self.dirichlet_mask.size

    @property
    def n_free(self) -> int:
        return self.free_dofs.size

    def global_dof(self, node, alpha_index):
        return np.asarray(node) * N_NODE_DOFS + np.asarray(alpha_index)

    def dof_node_alpha(self, gdof):
        gdof = np.asarray(gdof)
        return gdof // N_NODE_DOFS, gdof % N_NODE_DOFS

    def cell_dofs(self, cx, cy):
        """The 16 global DOFs of a cell: corner-major, derivative-minor."""
        nodes = self.grid.cell_nodes(cx, cy)
        return (nodes[..., :, None] * N_NODE_DOFS
                + np.arange(N_NODE_DOFS)).reshape(*nodes.shape[:-1], 16)

    def restrict(self, full_vec):
        return np.asarray(full_vec)[self.free_dofs]

    def expand(self, free_vec):
        full = np.zeros(self.n_total, dtype=float)
        full[self.free_dofs] = free_vec
        return full


def build_dofmap(grid: RectGrid) -> DofMap:
    """Number all DOFs and mask every DOF of every boundary node."""
    nxp, nyp = grid.nx + 1, grid.ny + 1
    ix, iy = np.meshgrid(np.arange(nxp), np.arange(nyp), indexing="xy")
    boundary_node = (ix == 0) | (ix == grid.nx) | (iy == 0) | (iy == grid.ny)
    mask = np.repeat(boundary_node.reshape(-1), N_NODE_DOFS)
    free = np.flatnonzero(~mask)
    free_index = np.full(mask.size, -1, dtype=int)
    free_index[free] = np.arange(free.size)
    return DofMap(grid=grid, dirichlet_mask=mask, free_index=free_index, free_dofs=free)


@dataclass(frozen=True)
class Space:
    """A grid equipped with its DOF map; the unit most assembly routines take."""

    grid: RectGrid
    dofmap: DofMap

    @property
    def n_free(self) -> int:
        return self.dofmap.n_free


def build_space(bounds, n) -> Space:
    grid = build_grid(bounds, n)
    return Space(grid=grid, dofmap=build_dofmap(grid))
