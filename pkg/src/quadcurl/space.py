"""Global DOF enumeration for the two-component unfitted space.

Each component (minus/plus) carries a full curl-curl conforming space over
its active mesh (all elements intersecting that side), so elements cut by
the interface hold 26 live local DOFs.  Outer boundary conditions
(vanishing tangential trace and curl) are imposed strongly: the vertex-curl
DOF at boundary vertices and all three moments of boundary edges are exactly
those traces, so the corresponding rows/columns are eliminated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Classification, ElementTag, Mesh

__all__ = ["DofSpace", "build_space", "MINUS", "PLUS"]

MINUS, PLUS = 0, 1
_NO_DOF = -1


@dataclass(frozen=True)
class _ComponentBlock:
    vertex_dof: np.ndarray    # (V,) raw index or -1
    edge_dof: np.ndarray      # (E,) raw index of first of 3 moments, or -1
    interior_dof: np.ndarray  # (F,) raw index or -1
    active: np.ndarray        # (F,) bool
    size: int
    offset: int


class DofSpace:
    """Raw/free DOF bookkeeping for the doubled unfitted space.

    Raw indices enumerate every DOF of every live component
    (component-major: all minus DOFs first).  `free` masks out the strongly
    eliminated boundary DOFs; assembled systems are reduced by slicing with
    `free_index`.
    """

    def __init__(self, mesh: Mesh, blocks, eliminated: np.ndarray):
        self.mesh = mesh
        self.blocks = blocks
        self.eliminated = eliminated
        self.free = ~eliminated
        self.total_raw = len(eliminated)
        self.total_dofs = int(self.free.sum())
        self.free_index = np.nonzero(self.free)[0]
        self._tables = self._build_tables()

    @property
    def num_components(self) -> int:
        return len(self.blocks)

    def is_live(self, element: int, component: int) -> bool:
        return bool(self.blocks[component].active[element])

    def _build_tables(self):
        mesh = self.mesh
        tables = []
        for blk in self.blocks:
            tab = np.full((mesh.num_triangles, 13), _NO_DOF, dtype=np.int64)
            live = np.nonzero(blk.active)[0]
            tris = mesh.triangles[live]
            tab[live, 0:3] = blk.vertex_dof[tris]
            for k in range(3):
                first = blk.edge_dof[mesh.edge_of_triangle[live, k]]
                tab[live, 3 + 3 * k] = first
                tab[live, 4 + 3 * k] = first + 1
                tab[live, 5 + 3 * k] = first + 2
            tab[live, 12] = blk.interior_dof[live]
            tables.append(tab)
        return tables

    def gather(self, element: int, component: int) -> np.ndarray:
        """13 raw global indices of one element's DOFs for one component.

        Order: vertex curls, then 3 moments per edge, then interior.
        """
        if not self.is_live(element, component):
            raise LookupError(
                f"element {element} carries no component-{component} field"
            )
        return self._tables[component][element]

    def element_dofs(self, component: int) -> np.ndarray:
        """(F, 13) raw index table; -1 rows for dead elements."""
        return self._tables[component]

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        """Reduced (free) coefficients -> raw vector with eliminated DOFs = 0."""
        full = np.zeros(self.total_raw)
        full[self.free_index] = reduced
        return full

    def reduce(self, raw: np.ndarray) -> np.ndarray:
        return raw[self.free_index]


def _enumerate_component(mesh: Mesh, active: np.ndarray, offset: int) -> _ComponentBlock:
    live = np.nonzero(active)[0]
    verts = np.unique(mesh.triangles[live])
    edges = np.unique(mesh.edge_of_triangle[live])
    vertex_dof = np.full(mesh.num_vertices, _NO_DOF, dtype=np.int64)
    edge_dof = np.full(mesh.num_edges, _NO_DOF, dtype=np.int64)
    interior_dof = np.full(mesh.num_triangles, _NO_DOF, dtype=np.int64)
    nxt = offset
    vertex_dof[verts] = nxt + np.arange(len(verts))
    nxt += len(verts)
    edge_dof[edges] = nxt + 3 * np.arange(len(edges))
    nxt += 3 * len(edges)
    interior_dof[live] = nxt + np.arange(len(live))
    nxt += len(live)
    return _ComponentBlock(
        vertex_dof=vertex_dof,
        edge_dof=edge_dof,
        interior_dof=interior_dof,
        active=active.copy(),
        size=nxt - offset,
        offset=offset,
    )


def build_space(mesh: Mesh, classification: Classification | None) -> DofSpace:
    """Enumerate DOFs for both components and mark boundary eliminations.

    With classification=None the interface is absent and a single component
    covers the whole mesh (the fitted configuration).
    """
    if classification is None:
        active_sets = [np.ones(mesh.num_triangles, dtype=bool)]
    else:
        active_sets = [classification.active_minus, classification.active_plus]

    blocks = []
    offset = 0
    for active in active_sets:
        blk = _enumerate_component(mesh, active, offset)
        blocks.append(blk)
        offset += blk.size

    eliminated = np.zeros(offset, dtype=bool)
    for blk in blocks:
        bv = np.nonzero(mesh.boundary_vertex & (blk.vertex_dof != _NO_DOF))[0]
        eliminated[blk.vertex_dof[bv]] = True
        be = np.nonzero(mesh.boundary_edge & (blk.edge_dof != _NO_DOF))[0]
        for k in range(3):
            eliminated[blk.edge_dof[be] + k] = True
    return DofSpace(mesh, blocks, eliminated)
