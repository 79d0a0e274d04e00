"""Integration rules: tensor Gauss on rectangles, curve rules on particle
boundaries, and cut-cell rules for regions bounded by particle curves.

Cut cells have two backends.  The primary rule parameterizes the interface
locally as a graph over one axis (closed-form conic sections give the graph
height exactly) and integrates column-wise, which makes the two side rules of
a cut cell an exact partition of the cell.  The fallback/oracle is a quadtree
that clips leaf squares with interface chords; it is slower and lower order
but robust and has nonnegative weights, and serves as the cross-check for the
graph rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .geometry import MEMBRANE, TWO_PI, classify_point

#: Relative geometric tolerance for degenerate pieces.
GEOM_TOL = 1e-13


class AmbiguousTopologyError(RuntimeError):
    """A cell's interface topology could not be resolved by refinement."""


@dataclass(frozen=True)
class QuadRule:
    """Points and weights, with optional curve normals and owning cell ids."""

    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray | None = None
    cells: np.ndarray | None = None
    thetas: np.ndarray | None = None

    @property
    def n(self):
        return self.weights.size

    def total(self):
        return float(np.sum(self.weights))


def _empty_rule():
    return QuadRule(points=np.empty((0, 2)), weights=np.empty(0))


@lru_cache(maxsize=32)
def gauss_01(n):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def tensor_gauss(rect, p) -> QuadRule:
    """Tensor Gauss rule on rectangle (x0, x1, y0, y1); exact for bivariate
    polynomials of degree <= 2p-1 per axis."""
    if p < 1:
        raise ValueError("need at least one point per axis")
    x0, x1, y0, y1 = rect
    t, w = gauss_01(p)
    xs = x0 + (x1 - x0) * t
    ys = y0 + (y1 - y0) * t
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(w, w) * (x1 - x0) * (y1 - y0)
    return QuadRule(points=np.column_stack([X.ravel(), Y.ravel()]), weights=W.ravel())


# ---------------------------------------------------------------------------
# curve rules
# ---------------------------------------------------------------------------

def curve_rule(particle, n_points=256) -> QuadRule:
    """Whole-curve rule with equally spaced parameters.

    On circles this integrates trigonometric polynomials of degree < n_points
    exactly; on ellipses it converges spectrally for smooth integrands.
    """
    if n_points < 1:
        raise ValueError("need at least one point")
    theta = (np.arange(n_points) + 0.5) * TWO_PI / n_points
    x, y = particle.shape.point(theta)
    nx, ny = particle.region_normal(theta)
    w = particle.shape.speed(theta) * TWO_PI / n_points
    return QuadRule(points=np.column_stack([x, y]), weights=w,
                    normals=np.column_stack([nx, ny]), thetas=theta)


def curve_rule_in_rect(particle, rect, pts_per_seg=6, max_dtheta=0.2) -> QuadRule:
    """Curve rule restricted to the sub-arcs inside one rectangle; empty when
    the boundary misses it."""
    intervals = arc_intervals_in_rect(particle.shape, rect)
    if not intervals:
        return _empty_rule()
    t, w = gauss_01(pts_per_seg)
    thetas, weights = [], []
    for a, b in intervals:
        k = max(1, int(np.ceil((b - a) / max_dtheta)))
        edges = np.linspace(a, b, k + 1)
        for sa, sb in zip(edges[:-1], edges[1:]):
            thetas.append(sa + (sb - sa) * t)
            weights.append(w * (sb - sa))
    theta = np.concatenate(thetas)
    x, y = particle.shape.point(theta)
    nx, ny = particle.region_normal(theta)
    return QuadRule(points=np.column_stack([x, y]),
                    weights=np.concatenate(weights) * particle.shape.speed(theta),
                    normals=np.column_stack([nx, ny]), thetas=np.mod(theta, TWO_PI))


def _curve_breakpoints(shape, grid, max_dtheta):
    """Parameters where the curve crosses grid lines, refined so no segment
    exceeds max_dtheta."""
    xb0, xb1, yb0, yb1 = shape.bbox()
    crossings = []
    for axis, (lo, hi, start, h, count) in enumerate(
        [(xb0, xb1, grid.xmin, grid.hx, grid.nx), (yb0, yb1, grid.ymin, grid.hy, grid.ny)]
    ):
        i0 = max(0, int(np.floor((lo - start) / h)))
        i1 = min(count, int(np.ceil((hi - start) / h)))
        for i in range(i0, i1 + 1):
            crossings.append(shape.line_crossings(axis, start + i * h))
    thetas = np.sort(np.concatenate(crossings)) if crossings else np.empty(0)
    if thetas.size:
        keep = np.concatenate([[True], np.diff(thetas) > 1e-12])
        thetas = thetas[keep]
        segments = np.column_stack([thetas, np.r_[thetas[1:], thetas[0] + TWO_PI]])
    else:
        segments = np.array([[0.0, TWO_PI]])
    refined = []
    for a, b in segments:
        k = max(1, int(np.ceil((b - a) / max_dtheta)))
        edges = np.linspace(a, b, k + 1)
        refined.extend(zip(edges[:-1], edges[1:]))
    return np.array(refined)


def grid_curve_rule(particle, grid, pts_per_seg=6, max_dtheta=0.2) -> QuadRule:
    """Curve rule localized to grid cells: composite Gauss on parameter
    segments that never cross a grid line, each tagged with its cell."""
    if pts_per_seg < 1:
        raise ValueError("need at least one point per segment")
    segs = _curve_breakpoints(particle.shape, grid, max_dtheta)
    t, w = gauss_01(pts_per_seg)
    theta = (segs[:, 0, None] + (segs[:, 1] - segs[:, 0])[:, None] * t).ravel()
    dsdt = np.repeat(segs[:, 1] - segs[:, 0], pts_per_seg)
    x, y = particle.shape.point(theta)
    nx, ny = particle.region_normal(theta)
    weights = np.tile(w, segs.shape[0]) * dsdt * particle.shape.speed(theta)
    # one cell per segment, determined at the segment midpoint
    mx, my = particle.shape.point(segs.mean(axis=1))
    cx, cy, _, _ = grid.locate(mx, my)
    cells = np.repeat(grid.cell_id(cx, cy), pts_per_seg)
    return QuadRule(points=np.column_stack([x, y]), weights=weights,
                    normals=np.column_stack([nx, ny]), cells=cells,
                    thetas=np.mod(theta, TWO_PI))


# ---------------------------------------------------------------------------
# cut cells: arcs inside rectangles
# ---------------------------------------------------------------------------

def _in_rect(x, y, rect, tol):
    x0, x1, y0, y1 = rect
    return (x0 - tol <= x <= x1 + tol) and (y0 - tol <= y <= y1 + tol)


def arc_intervals_in_rect(shape, rect):
    """Parameter intervals of the curve lying inside the rectangle.

    Returns a list of (theta_a, theta_b) with theta_b possibly exceeding 2pi
    for wrap-around intervals; an empty list if the curve misses the
    rectangle, and [(0, 2pi)] if it is entirely contained.
    """
    x0, x1, y0, y1 = rect
    tol = GEOM_TOL * max(x1 - x0, y1 - y0, 1.0)
    crossings = []
    for axis, values, lo, hi in ((0, (x0, x1), y0, y1), (1, (y0, y1), x0, x1)):
        for v in values:
            for th in shape.line_crossings(axis, v):
                px, py = shape.point(th)
                other = py if axis == 0 else px
                if lo - tol <= other <= hi + tol:
                    crossings.append(th)
    if not crossings:
        px, py = shape.point(0.0)
        return [(0.0, TWO_PI)] if _in_rect(px, py, rect, tol) else []
    thetas = np.sort(np.asarray(crossings))
    keep = np.concatenate([[True], np.diff(thetas) > 1e-12])
    thetas = thetas[keep]
    intervals = []
    for a, b in zip(thetas, np.r_[thetas[1:], thetas[0] + TWO_PI]):
        if b - a < 1e-12:
            continue
        mx, my = shape.point(0.5 * (a + b))
        if _in_rect(mx, my, rect, tol):
            intervals.append((a, b))
    return intervals


def _graph_pieces(particle, rect, interval, inner_tag, outer_tag, n_gauss, outer_splits):
    """Column-decompose a rectangle cut by one monotone interface arc.

    Returns [(tag, points, weights)] whose union partitions the rectangle
    exactly; raises AmbiguousTopologyError when the arc is not a graph over
    either axis.
    """
    shape = particle.shape
    x0, x1, y0, y1 = rect
    ta, tb = interval
    samples = np.linspace(ta, tb, 9)
    tx, ty = shape.tangent(samples)
    speed = np.hypot(tx, ty)
    score_x = np.min(np.abs(tx) / speed) if np.all(tx > 0) or np.all(tx < 0) else -1.0
    score_y = np.min(np.abs(ty) / speed) if np.all(ty > 0) or np.all(ty < 0) else -1.0
    if max(score_x, score_y) < 0.05:
        raise AmbiguousTopologyError("arc is not a graph over either axis")
    base_axis = 0 if score_x >= score_y else 1  # arc is monotone along this axis

    if base_axis == 0:
        b0, b1, o0, o1 = x0, x1, y0, y1
    else:
        b0, b1, o0, o1 = y0, y1, x0, x1
    pa = shape.point(ta)
    pb = shape.point(tb)
    ea, eb = sorted((pa[base_axis], pb[base_axis]))
    ea, eb = max(ea, b0), min(eb, b1)

    # which side of the arc (in the height coordinate) the particle occupies
    tm = 0.5 * (ta + tb)
    nm = particle.region_normal(tm)
    particle_below = nm[1 - base_axis] > 0

    t_g, w_g = gauss_01(n_gauss)
    pieces = []

    def add_rect(tag, lo, hi):
        if hi - lo <= GEOM_TOL * (b1 - b0):
            return
        rect_piece = (lo, hi, o0, o1) if base_axis == 0 else (o0, o1, lo, hi)
        rule = tensor_gauss(rect_piece, n_gauss)
        pieces.append((tag, rule.points, rule.weights))

    # side strips never meet the arc: one region each
    for lo, hi in ((b0, ea), (eb, b1)):
        if hi - lo > GEOM_TOL * (b1 - b0):
            mid_b, mid_o = 0.5 * (lo + hi), 0.5 * (o0 + o1)
            mx, my = (mid_b, mid_o) if base_axis == 0 else (mid_o, mid_b)
            tag = inner_tag if particle.inside(mx, my) else outer_tag
            add_rect(tag, lo, hi)

    if eb - ea <= GEOM_TOL * (b1 - b0):
        return pieces

    nseg = max(1, min(outer_splits, int(np.ceil((eb - ea) / ((b1 - b0) / outer_splits)))))
    edges = np.linspace(ea, eb, nseg + 1)
    below_tag = inner_tag if particle_below else outer_tag
    above_tag = outer_tag if particle_below else inner_tag
    pts_below, w_below, pts_above, w_above = [], [], [], []
    for sa, sb in zip(edges[:-1], edges[1:]):
        bq = sa + (sb - sa) * t_g
        wq = w_g * (sb - sa)
        for b, wb in zip(bq, wq):
            roots = shape.coordinate_roots(base_axis, b, o0 - GEOM_TOL, o1 + GEOM_TOL)
            if roots.size != 1:
                raise AmbiguousTopologyError(
                    f"expected one interface height per column, got {roots.size}")
            phi = float(np.clip(roots[0], o0, o1))
            for lo, hi, acc_p, acc_w in ((o0, phi, pts_below, w_below),
                                         (phi, o1, pts_above, w_above)):
                if hi - lo <= 0.0:
                    continue
                oq = lo + (hi - lo) * t_g
                if base_axis == 0:
                    acc_p.append(np.column_stack([np.full(n_gauss, b), oq]))
                else:
                    acc_p.append(np.column_stack([oq, np.full(n_gauss, b)]))
                acc_w.append(wb * w_g * (hi - lo))
    for tag, ps, ws in ((below_tag, pts_below, w_below), (above_tag, pts_above, w_above)):
        if ps:
            pieces.append((tag, np.vstack(ps), np.concatenate(ws)))
    return pieces


def split_cell(particles, rect, order=5, depth=8, _cut_order=None):
    """Partition a rectangle into per-region quadrature pieces.

    Returns a list of (tag, points, weights) where tag is a particle index or
    MEMBRANE; the weights of all pieces sum to the rectangle's area exactly
    (up to roundoff).  Cells with unresolvable interface topology are
    subdivided; leaves at the depth limit fall back to center classification.
    """
    x0, x1, y0, y1 = rect
    cut_order = _cut_order if _cut_order is not None else order + 4
    arcs = [(i, iv) for i, p in enumerate(particles)
            for iv in arc_intervals_in_rect(p.shape, rect)]
    if not arcs:
        tag = int(classify_point(particles, 0.5 * (x0 + x1), 0.5 * (y0 + y1)))
        rule = tensor_gauss(rect, order)
        return [(tag, rule.points, rule.weights)]
    if len(arcs) == 1:
        i, interval = arcs[0]
        try:
            return _graph_pieces(particles[i], rect, interval, inner_tag=i,
                                 outer_tag=MEMBRANE, n_gauss=cut_order,
                                 outer_splits=4)
        except AmbiguousTopologyError:
            pass
    if depth == 0:
        tag = int(classify_point(particles, 0.5 * (x0 + x1), 0.5 * (y0 + y1)))
        rule = tensor_gauss(rect, order)
        return [(tag, rule.points, rule.weights)]
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    pieces = []
    for sub in ((x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)):
        pieces.extend(split_cell(particles, sub, order, depth - 1, _cut_order=cut_order))
    return pieces


def cutcell_rule(particles, rect, side, order=5, depth=8) -> QuadRule:
    """Quadrature over rect intersected with one region.

    ``side`` is a particle index or MEMBRANE.  Falls back to a plain tensor
    rule when the rectangle is entirely on the requested side.
    """
    pts, wts = [], []
    for tag, p, w in split_cell(particles, rect, order=order, depth=depth):
        if tag == side:
            pts.append(p)
            wts.append(w)
    if not pts:
        return _empty_rule()
    return QuadRule(points=np.vstack(pts), weights=np.concatenate(wts))


# ---------------------------------------------------------------------------
# grid-wide region decomposition
# ---------------------------------------------------------------------------

@dataclass
class GridDecomposition:
    """All per-region quadrature over a grid, split at particle boundaries.

    ``cut_cells`` maps flat cell ids to their per-region pieces; uncut cells
    carry a single region tag and share one reference tensor rule.
    """

    grid: object
    particles: list
    order: int
    cell_tags: np.ndarray
    cut_cells: dict
    _region_cache: dict = field(default_factory=dict)

    def region_rule(self, tag) -> QuadRule:
        """Concatenated rule (points, weights, cells) for one region."""
        if tag in self._region_cache:
            return self._region_cache[tag]
        grid = self.grid
        ref = tensor_gauss((0.0, grid.hx, 0.0, grid.hy), self.order)
        full_cells = np.flatnonzero(self.cell_tags == tag)
        full_cells = full_cells[~np.isin(full_cells, list(self.cut_cells))]
        cxs, cys = grid.cell_index(full_cells)
        ox = grid.xmin + cxs * grid.hx
        oy = grid.ymin + cys * grid.hy
        pts = (ref.points[None, :, :] + np.column_stack([ox, oy])[:, None, :]).reshape(-1, 2)
        wts = np.tile(ref.weights, full_cells.size)
        cells = np.repeat(full_cells, ref.n)
        parts_p, parts_w, parts_c = [pts], [wts], [cells]
        for cid, pieces in self.cut_cells.items():
            for t, p, w in pieces:
                if t == tag:
                    parts_p.append(p)
                    parts_w.append(w)
                    parts_c.append(np.full(w.size, cid))
        rule = QuadRule(points=np.vstack(parts_p), weights=np.concatenate(parts_w),
                        cells=np.concatenate(parts_c))
        self._region_cache[tag] = rule
        return rule

    def region_measure(self, tag):
        return self.region_rule(tag).total()


def decompose_grid(particles, grid, order=5, depth=8) -> GridDecomposition:
    """Classify all cells against all particles and build cut-cell pieces."""
    ncells = grid.n_cells
    cids = np.arange(ncells)
    cxs, cys = grid.cell_index(cids)
    mx = grid.xmin + (cxs + 0.5) * grid.hx
    my = grid.ymin + (cys + 0.5) * grid.hy
    cell_tags = classify_point(particles, mx, my)

    cut_cells = {}
    for i, p in enumerate(particles):
        xb0, xb1, yb0, yb1 = p.shape.bbox()
        cx0 = max(0, int(np.floor((xb0 - grid.xmin) / grid.hx)) - 1)
        cx1 = min(grid.nx - 1, int(np.ceil((xb1 - grid.xmin) / grid.hx)))
        cy0 = max(0, int(np.floor((yb0 - grid.ymin) / grid.hy)) - 1)
        cy1 = min(grid.ny - 1, int(np.ceil((yb1 - grid.ymin) / grid.hy)))
        for cy in range(cy0, cy1 + 1):
            for cx in range(cx0, cx1 + 1):
                cid = int(grid.cell_id(cx, cy))
                if cid in cut_cells:
                    continue
                rect = grid.cell_bounds(cx, cy)
                if any(arc_intervals_in_rect(q.shape, rect) for q in particles):
                    cut_cells[cid] = split_cell(particles, rect, order=order, depth=depth)
    return GridDecomposition(grid=grid, particles=list(particles), order=order,
                             cell_tags=cell_tags, cut_cells=cut_cells)


# ---------------------------------------------------------------------------
# quadtree oracle
# ---------------------------------------------------------------------------

def _polygon_area_centroid(poly):
    x = np.array([p[0] for p in poly])
    y = np.array([p[1] for p in poly])
    xs, ys = np.roll(x, -1), np.roll(y, -1)
    cross = x * ys - xs * y
    area = 0.5 * np.sum(cross)
    if abs(area) < 1e-300:
        return 0.0, (np.mean(x), np.mean(y))
    cx = np.sum((x + xs) * cross) / (6.0 * area)
    cy = np.sum((y + ys) * cross) / (6.0 * area)
    return abs(area), (cx, cy)


def _clip_halfplane(poly, a, b, keep_positive):
    """Sutherland-Hodgman clip of polygon against the line through a, b."""
    def side(p):
        s = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        return s if keep_positive else -s

    out = []
    for i, p in enumerate(poly):
        q = poly[(i + 1) % len(poly)]
        sp, sq = side(p), side(q)
        if sp >= 0:
            out.append(p)
        if (sp > 0 and sq < 0) or (sp < 0 and sq > 0):
            t = sp / (sp - sq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _quadtree_pieces(particles, rect, depth, order, out):
    x0, x1, y0, y1 = rect
    arcs = [(i, iv) for i, p in enumerate(particles)
            for iv in arc_intervals_in_rect(p.shape, rect)]
    if not arcs:
        tag = int(classify_point(particles, 0.5 * (x0 + x1), 0.5 * (y0 + y1)))
        rule = tensor_gauss(rect, order)
        out.append((tag, rule.points, rule.weights))
        return
    if depth > 0:
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        for sub in ((x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)):
            _quadtree_pieces(particles, sub, depth - 1, order, out)
        return
    # leaf: approximate the interface by the chord between its edge crossings
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    if len(arcs) == 1:
        i, (ta, tb) = arcs[0]
        pa = particles[i].shape.point(ta)
        pb = particles[i].shape.point(tb)
        if np.hypot(pb[0] - pa[0], pb[1] - pa[1]) > GEOM_TOL:
            for keep in (True, False):
                poly = _clip_halfplane(corners, pa, pb, keep)
                if len(poly) >= 3:
                    area, centroid = _polygon_area_centroid(poly)
                    if area > 0:
                        tag = int(classify_point(particles, *centroid))
                        out.append((tag, np.array([centroid]), np.array([area])))
            return
    tag = int(classify_point(particles, 0.5 * (x0 + x1), 0.5 * (y0 + y1)))
    out.append((tag, np.array([[0.5 * (x0 + x1), 0.5 * (y0 + y1)]]),
                np.array([(x1 - x0) * (y1 - y0)])))


def quadtree_rule(particles, rect, side, depth=8, order=5) -> QuadRule:
    """Robust subdivision-based rule over rect intersected with one region.

    All weights are nonnegative and the two sides of any interface partition
    the rectangle's area exactly.
    """
    pieces = []
    _quadtree_pieces(particles, rect, depth, order, pieces)
    pts = [p for tag, p, w in pieces if tag == side]
    wts = [w for tag, p, w in pieces if tag == side]
    if not pts:
        return _empty_rule()
    return QuadRule(points=np.vstack(pts), weights=np.concatenate(wts))
