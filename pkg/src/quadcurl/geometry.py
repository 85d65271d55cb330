"""Structured triangulations of [-1,1]^2, implicit interfaces, and element
classification for the unfitted discretization.

The mesh is a uniform n x n grid of squares, each split along the
anti-diagonal into two triangles.  All triangles are congruent up to
translation to one of two shapes ("types"), which the assembly layer
exploits heavily.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable

import numpy as np

__all__ = [
    "Mesh",
    "InterfaceGeometry",
    "Classification",
    "AssumptionReport",
    "ElementTag",
    "build_structured_mesh",
    "levelset_circle",
    "levelset_peanut",
    "classify_elements",
    "validate_assumptions",
    "edge_crossing",
    "UnsupportedGeometryError",
]

# local vertex offsets of the two triangle types, in units of the cell size.
# type 0: right angle at the cell's lower-left corner, type 1 at the upper-right.
TYPE_OFFSETS = (
    np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
)
# columns (v1-v0, v2-v0) of the affine map, in units of the cell size
TYPE_BMAT = (
    np.array([[1.0, 0.0], [0.0, 1.0]]),
    np.array([[0.0, -1.0], [1.0, 1.0]]),
)
# element-local edges as (lo, hi) local vertex pairs, ordered so that the
# global orientation (lower vertex index -> higher) is respected for the
# lexicographic vertex numbering used below.
TYPE_EDGES = (
    ((0, 1), (1, 2), (0, 2)),
    ((0, 1), (2, 1), (0, 2)),
)


class UnsupportedGeometryError(RuntimeError):
    pass


class ElementTag(IntEnum):
    MINUS = 0
    PLUS = 1
    CUT = 2


@dataclass(frozen=True)
class Mesh:
    """Triangulation of [-1,1]^2 with full vertex/edge/triangle connectivity."""

    n: int
    vertices: np.ndarray          # (V, 2)
    triangles: np.ndarray         # (F, 3) vertex ids
    edges: np.ndarray             # (E, 2) vertex ids, lo < hi
    edge_of_triangle: np.ndarray  # (F, 3) edge ids, in TYPE_EDGES order
    triangles_of_edge: np.ndarray  # (E, 2) triangle ids, -1 if boundary
    boundary_vertex: np.ndarray   # (V,) bool
    boundary_edge: np.ndarray     # (E,) bool
    tri_type: np.ndarray          # (F,) 0/1
    tri_cell: np.ndarray          # (F, 2) (ix, iy) of the containing cell
    edge_orientation: np.ndarray  # (E,) 0=horizontal 1=vertical 2=diagonal
    h: float                      # max element diameter
    cell: float                   # grid cell size 2/n

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def anchor(self, t: int) -> np.ndarray:
        """Lower-left corner of triangle t's cell (origin of its local frame)."""
        return -1.0 + self.cell * self.tri_cell[t].astype(float)

    def anchors(self) -> np.ndarray:
        return -1.0 + self.cell * self.tri_cell.astype(float)

    def tri_vertices(self, t: int) -> np.ndarray:
        return self.vertices[self.triangles[t]]

    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d01 = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        d12 = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        d02 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        return np.max(np.stack([d01, d12, d02]), axis=0)


def build_structured_mesh(n: int) -> Mesh:
    """Uniform triangulation of [-1,1]^2 with n cells per side.

    Each cell is split along its anti-diagonal; h = 2*sqrt(2)/n.
    """
    if n < 1:
        raise ValueError(f"cells-per-side must be >= 1, got {n}")
    s = 2.0 / n
    # vertices, lexicographic: id = ix + iy*(n+1)
    ii = np.arange(n + 1)
    gx, gy = np.meshgrid(-1.0 + s * ii, -1.0 + s * ii, indexing="xy")
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(ix, iy):
        return ix + iy * (n + 1)

    cx, cy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    cx, cy = cx.ravel(), cy.ravel()
    a = vid(cx, cy)
    b = vid(cx + 1, cy)
    c = vid(cx + 1, cy + 1)
    d = vid(cx, cy + 1)
    # triangle ids: 2*cell + type; type 0 = (a,b,d), type 1 = (b,c,d)
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, d])
    tris[1::2] = np.column_stack([b, c, d])
    tri_type = np.tile(np.array([0, 1], dtype=np.int8), n * n)
    tri_cell = np.repeat(np.column_stack([cx, cy]), 2, axis=0)

    # edges: horizontal block, vertical block, diagonal block
    n_h = n * (n + 1)

    def eid_h(ix, iy):  # (ix,iy)->(ix+1,iy)
        return iy * n + ix

    def eid_v(ix, iy):  # (ix,iy)->(ix,iy+1)
        return n_h + iy * (n + 1) + ix

    def eid_d(ix, iy):  # cell anti-diagonal (ix+1,iy)->(ix,iy+1)
        return 2 * n_h + iy * n + ix

    E = 3 * n * n + 2 * n
    edges = np.empty((E, 2), dtype=np.int64)
    hx, hy = np.meshgrid(np.arange(n), np.arange(n + 1), indexing="xy")
    hx, hy = hx.ravel(), hy.ravel()
    edges[eid_h(hx, hy)] = np.column_stack([vid(hx, hy), vid(hx + 1, hy)])
    vx, vy = np.meshgrid(np.arange(n + 1), np.arange(n), indexing="xy")
    vx, vy = vx.ravel(), vy.ravel()
    edges[eid_v(vx, vy)] = np.column_stack([vid(vx, vy), vid(vx, vy + 1)])
    edges[eid_d(cx, cy)] = np.column_stack([vid(cx + 1, cy), vid(cx, cy + 1)])

    edge_orientation = np.empty(E, dtype=np.int8)
    edge_orientation[:n_h] = 0
    edge_orientation[n_h : 2 * n_h] = 1
    edge_orientation[2 * n_h :] = 2

    # per-triangle edges in TYPE_EDGES order
    t0 = 2 * (cy * n + cx)
    edge_of_triangle = np.empty((2 * n * n, 3), dtype=np.int64)
    edge_of_triangle[t0, 0] = eid_h(cx, cy)          # (a,b) bottom
    edge_of_triangle[t0, 1] = eid_d(cx, cy)          # (b,d) diagonal
    edge_of_triangle[t0, 2] = eid_v(cx, cy)          # (a,d) left
    edge_of_triangle[t0 + 1, 0] = eid_v(cx + 1, cy)  # (b,c) right
    edge_of_triangle[t0 + 1, 1] = eid_h(cx, cy + 1)  # (d,c) top
    edge_of_triangle[t0 + 1, 2] = eid_d(cx, cy)      # (b,d) diagonal

    triangles_of_edge = np.full((E, 2), -1, dtype=np.int64)
    # horizontal: triangle above is type 0 of cell (ix,iy), below type 1 of (ix,iy-1)
    above = hy < n
    triangles_of_edge[eid_h(hx[above], hy[above]), 0] = 2 * (hy[above] * n + hx[above])
    below = hy > 0
    triangles_of_edge[eid_h(hx[below], hy[below]), 1] = 2 * ((hy[below] - 1) * n + hx[below]) + 1
    # vertical: right neighbor type 0 of (ix,iy), left neighbor type 1 of (ix-1,iy)
    right = vx < n
    triangles_of_edge[eid_v(vx[right], vy[right]), 0] = 2 * (vy[right] * n + vx[right])
    left = vx > 0
    triangles_of_edge[eid_v(vx[left], vy[left]), 1] = 2 * (vy[left] * n + vx[left] - 1) + 1
    # diagonal: both triangles of the cell
    triangles_of_edge[eid_d(cx, cy), 0] = t0
    triangles_of_edge[eid_d(cx, cy), 1] = t0 + 1
    # normalize: first slot filled, lower triangle id first
    swap = triangles_of_edge[:, 0] == -1
    triangles_of_edge[swap] = triangles_of_edge[swap][:, ::-1]
    both = (triangles_of_edge[:, 1] >= 0) & (
        triangles_of_edge[:, 0] > triangles_of_edge[:, 1]
    )
    triangles_of_edge[both] = triangles_of_edge[both][:, ::-1]

    vx_, vy_ = vertices[:, 0], vertices[:, 1]
    boundary_vertex = (
        np.isclose(np.abs(vx_), 1.0) | np.isclose(np.abs(vy_), 1.0)
    )
    boundary_edge = triangles_of_edge[:, 1] == -1

    return Mesh(
        n=n,
        vertices=vertices,
        triangles=tris,
        edges=edges,
        edge_of_triangle=edge_of_triangle,
        triangles_of_edge=triangles_of_edge,
        boundary_vertex=boundary_vertex,
        boundary_edge=boundary_edge,
        tri_type=tri_type,
        tri_cell=tri_cell,
        edge_orientation=edge_orientation,
        h=s * np.sqrt(2.0),
        cell=s,
    )


@dataclass(frozen=True)
class InterfaceGeometry:
    """Closed C^2 interface given both implicitly and parametrically.

    level_set is negative strictly inside (the minus region), positive
    outside.  The parametric curve is a polar graph r(theta), so any point on
    the curve recovers its parameter through atan2.  normal(p) points from
    the minus to the plus side.
    """

    level_set: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    parametric: Callable[[np.ndarray], np.ndarray]
    velocity: Callable[[np.ndarray], np.ndarray]  # d(parametric)/d(theta)
    name: str = "interface"

    def normal(self, pts: np.ndarray) -> np.ndarray:
        g = self.gradient(np.atleast_2d(pts))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def param_of_point(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * np.pi)

    def speed(self, theta: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.velocity(np.atleast_1d(theta)), axis=1)


def levelset_circle(center=(0.0, 0.0), radius: float = np.pi / 6) -> InterfaceGeometry:
    """Signed-distance circle interface."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    cx, cy = float(center[0]), float(center[1])

    def phi(p):
        p = np.atleast_2d(p)
        return np.hypot(p[:, 0] - cx, p[:, 1] - cy) - radius

    def grad(p):
        p = np.atleast_2d(p)
        d = p - [cx, cy]
        r = np.linalg.norm(d, axis=1, keepdims=True)
        return d / np.where(r > 0, r, 1.0)

    def gamma(theta):
        theta = np.atleast_1d(theta)
        return np.column_stack([cx + radius * np.cos(theta), cy + radius * np.sin(theta)])

    def vel(theta):
        theta = np.atleast_1d(theta)
        return np.column_stack([-radius * np.sin(theta), radius * np.cos(theta)])

    geo = InterfaceGeometry(phi, grad, gamma, vel, name=f"circle(r={radius:g})")
    if not (abs(cx) < 1e-14 and abs(cy) < 1e-14):
        # param_of_point must be taken about the circle center
        object.__setattr__(
            geo,
            "param_of_point",
            lambda pts: np.mod(
                np.arctan2(np.atleast_2d(pts)[:, 1] - cy, np.atleast_2d(pts)[:, 0] - cx),
                2 * np.pi,
            ),
        )
    return geo


def levelset_peanut() -> InterfaceGeometry:
    """Peanut interface r(theta) = 1/2 + sin(2 theta)/4 in polar form.

    Level set: phi = r - 1/2 - x*y / (2 r^2), using sin(2θ) = 2xy/r^2; the
    removable singularity at the origin is deep inside the minus region.
    """

    def phi(p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        r2 = x * x + y * y
        r = np.sqrt(r2)
        corr = np.divide(x * y, 2.0 * r2, out=np.zeros_like(r2), where=r2 > 0)
        return r - 0.5 - corr

    def grad(p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        r2 = x * x + y * y
        r = np.sqrt(r2)
        with np.errstate(divide="ignore", invalid="ignore"):
            gx = x / r - y / (2 * r2) + x * x * y / (r2 * r2)
            gy = y / r - x / (2 * r2) + x * y * y / (r2 * r2)
        g = np.column_stack([gx, gy])
        g[~np.isfinite(g).all(axis=1)] = [1.0, 0.0]  # origin: arbitrary, unused
        return g

    def radius(theta):
        return 0.5 + 0.25 * np.sin(2.0 * theta)

    def gamma(theta):
        theta = np.atleast_1d(theta)
        r = radius(theta)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    def vel(theta):
        theta = np.atleast_1d(theta)
        r = radius(theta)
        dr = 0.5 * np.cos(2.0 * theta)
        return np.column_stack(
            [dr * np.cos(theta) - r * np.sin(theta), dr * np.sin(theta) + r * np.cos(theta)]
        )

    return InterfaceGeometry(phi, grad, gamma, vel, name="peanut")


@dataclass(frozen=True)
class Classification:
    """Partition of the triangulation relative to the interface."""

    element_tag: np.ndarray  # (F,) ElementTag values
    t_minus: np.ndarray
    t_plus: np.ndarray
    t_gamma: np.ndarray
    e_gamma: np.ndarray           # edges of cut elements not on the boundary
    active_minus: np.ndarray      # bool mask (F,)
    active_plus: np.ndarray       # bool mask (F,)
    vertex_phi: np.ndarray        # tie-perturbed level set values at vertices


def _tie_perturbed_phi(mesh: Mesh, interface: InterfaceGeometry) -> np.ndarray:
    phi = np.asarray(interface.level_set(mesh.vertices), dtype=float)
    eps = 1e-12 * mesh.h
    ties = np.abs(phi) < eps
    phi[ties] = eps  # vertices on the interface count as plus side
    return phi


def edge_crossing(interface, p0, p1, f0=None, f1=None, tol=1e-13):
    """Root of phi on segment [p0, p1] with sign(phi(p0)) != sign(phi(p1)).

    Plain bisection on the parameter; robust for the C^2 interfaces used.
    """
    phi = interface.level_set
    a, b = 0.0, 1.0
    fa = float(phi(np.array([p0]))[0]) if f0 is None else f0
    fb = float(phi(np.array([p1]))[0]) if f1 is None else f1
    if fa * fb > 0:
        raise ValueError("no sign change on edge")
    d = np.asarray(p1) - np.asarray(p0)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = float(phi(np.array([p0 + m * d]))[0])
        if fm == 0.0:
            return np.asarray(p0 + m * d)
        if fa * fm < 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    m = 0.5 * (a + b)
    return np.asarray(p0 + m * d)


def _edge_has_interior_crossing(interface, p0, p1, samples=16) -> bool:
    """Detect a same-sign edge that still dips across the interface."""
    t = np.linspace(0.0, 1.0, samples + 2)[1:-1]
    pts = np.asarray(p0)[None, :] + t[:, None] * (np.asarray(p1) - np.asarray(p0))[None, :]
    vals = interface.level_set(pts)
    return bool(np.min(vals) < 0 < np.max(vals))


def classify_elements(mesh: Mesh, interface: InterfaceGeometry) -> Classification:
    """Tag every triangle MINUS / PLUS / CUT from vertex signs.

    Vertex values within 1e-12*h of zero are pushed to the plus side before
    classification.  Same-sign triangles additionally get an edge sampling
    check so double crossings of a single edge are not silently missed.
    """
    phi = _tie_perturbed_phi(mesh, interface)
    if np.any(phi[mesh.boundary_vertex] <= 0):
        raise UnsupportedGeometryError("interface touches the outer boundary")

    tri_phi = phi[mesh.triangles]
    neg = tri_phi < 0
    tags = np.full(mesh.num_triangles, ElementTag.PLUS, dtype=np.int8)
    tags[np.all(neg, axis=1)] = ElementTag.MINUS
    mixed = np.any(neg, axis=1) & ~np.all(neg, axis=1)
    tags[mixed] = ElementTag.CUT

    # same-sign triangles near the interface: sample the edges
    suspects = np.nonzero(~mixed)[0]
    if len(suspects):
        centers = mesh.vertices[mesh.triangles[suspects]].mean(axis=1)
        near = np.abs(interface.level_set(centers)) < 2.0 * mesh.h
        for t in suspects[near]:
            pv = mesh.tri_vertices(t)
            for (i, j) in ((0, 1), (1, 2), (0, 2)):
                if _edge_has_interior_crossing(interface, pv[i], pv[j]):
                    tags[t] = ElementTag.CUT
                    break

    cut = tags == ElementTag.CUT
    active_minus = (tags == ElementTag.MINUS) | cut
    active_plus = (tags == ElementTag.PLUS) | cut
    cut_edges = np.unique(mesh.edge_of_triangle[cut])
    e_gamma = cut_edges[~mesh.boundary_edge[cut_edges]] if len(cut_edges) else cut_edges
    return Classification(
        element_tag=tags,
        t_minus=np.nonzero(tags == ElementTag.MINUS)[0],
        t_plus=np.nonzero(tags == ElementTag.PLUS)[0],
        t_gamma=np.nonzero(cut)[0],
        e_gamma=e_gamma,
        active_minus=active_minus,
        active_plus=active_plus,
        vertex_phi=phi,
    )


@dataclass
class AssumptionReport:
    """Outcome of the mesh/interface admissibility checks."""

    passed: bool
    crossing_violations: list = field(default_factory=list)   # (element, count)
    double_crossed_edges: list = field(default_factory=list)  # edge ids
    unreachable: list = field(default_factory=list)           # (element, side)
    missed_cut_elements: list = field(default_factory=list)   # truly cut, not tagged

    def summary(self) -> str:
        if self.passed:
            return "geometry assumptions satisfied"
        parts = []
        if self.crossing_violations:
            parts.append(
                f"elements not crossed precisely twice: {self.crossing_violations[:5]}"
            )
        if self.double_crossed_edges:
            parts.append(f"edges crossed more than once: {self.double_crossed_edges[:5]}")
        if self.unreachable:
            parts.append(f"cut elements without nearby pure neighbor: {self.unreachable[:5]}")
        if self.missed_cut_elements:
            parts.append(f"interface inside untagged elements: {self.missed_cut_elements[:5]}")
        return "; ".join(parts)


def _count_edge_roots(interface, p0, p1, samples=64) -> int:
    t = np.linspace(0.0, 1.0, samples + 1)
    pts = np.asarray(p0)[None, :] + t[:, None] * (np.asarray(p1) - np.asarray(p0))[None, :]
    vals = interface.level_set(pts)
    signs = np.sign(vals)
    signs[signs == 0] = 1.0
    return int(np.sum(signs[1:] * signs[:-1] < 0))


def _truly_cut(interface, verts, grid=20) -> bool:
    """Dense barycentric sampling: does the closed triangle meet both signs?"""
    b = np.linspace(0.0, 1.0, grid + 1)
    l1, l2 = np.meshgrid(b, b, indexing="ij")
    keep = l1 + l2 <= 1.0 + 1e-12
    l1, l2 = l1[keep], l2[keep]
    pts = (
        np.outer(1.0 - l1 - l2, verts[0])
        + np.outer(l1, verts[1])
        + np.outer(l2, verts[2])
    )
    vals = interface.level_set(pts)
    return bool(np.min(vals) < 0 < np.max(vals))


def validate_assumptions(
    mesh: Mesh,
    classification: Classification,
    interface: InterfaceGeometry,
    path_bound: int = 3,
) -> AssumptionReport:
    """Check the admissibility assumptions behind the cut discretization.

    Per element meeting the interface: the boundary must be crossed exactly
    twice with no edge crossed twice, and a pure element of each side must be
    reachable within `path_bound` edge hops through the corresponding active
    mesh.  Violations are reported, never raised.
    """
    report = AssumptionReport(passed=True)
    tags = classification.element_tag

    # which elements does the interface actually pass through?
    center = mesh.vertices[mesh.triangles].mean(axis=1)
    near = np.abs(interface.level_set(center)) < 2.0 * mesh.h
    candidates = set(np.nonzero(near)[0]) | set(classification.t_gamma)
    for t in sorted(candidates):
        verts = mesh.tri_vertices(t)
        crossed = _truly_cut(interface, verts)
        if crossed and tags[t] != ElementTag.CUT:
            report.missed_cut_elements.append(int(t))
            report.passed = False
        if not crossed:
            continue
        counts = []
        for k, (i, j) in enumerate(((0, 1), (1, 2), (0, 2))):
            c = _count_edge_roots(interface, verts[i], verts[j])
            counts.append(c)
            if c > 1:
                report.double_crossed_edges.append(int(mesh.edge_of_triangle[t, k]))
                report.passed = False
        if sum(counts) != 2:
            report.crossing_violations.append((int(t), int(sum(counts))))
            report.passed = False

    # reachability of pure elements through each active mesh
    neighbors = _triangle_neighbors(mesh)
    for side, active in (("minus", classification.active_minus), ("plus", classification.active_plus)):
        pure = ElementTag.MINUS if side == "minus" else ElementTag.PLUS
        for t in classification.t_gamma:
            if not _reaches_pure(t, tags, active, neighbors, pure, path_bound):
                report.unreachable.append((int(t), side))
                report.passed = False
    return report


def _triangle_neighbors(mesh: Mesh) -> np.ndarray:
    nb = np.full((mesh.num_triangles, 3), -1, dtype=np.int64)
    for k in range(3):
        e = mesh.edge_of_triangle[:, k]
        t0, t1 = mesh.triangles_of_edge[e, 0], mesh.triangles_of_edge[e, 1]
        mine = np.arange(mesh.num_triangles)
        nb[:, k] = np.where(t0 == mine, t1, t0)
    return nb


def _reaches_pure(start, tags, active, neighbors, pure_tag, bound) -> bool:
    frontier = {int(start)}
    seen = set(frontier)
    for _ in range(bound):
        nxt = set()
        for t in frontier:
            for u in neighbors[t]:
                if u < 0 or u in seen or not active[u]:
                    continue
                if tags[u] == pure_tag:
                    return True
                seen.add(int(u))
                nxt.add(int(u))
        frontier = nxt
        if not frontier:
            break
    return False
