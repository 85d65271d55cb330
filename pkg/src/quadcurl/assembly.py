"""Assembly of the stabilized bilinear form and right-hand side.

Terms, in the order they are assembled:

  volume    alpha * (curlcurl u, curlcurl v) + gamma (u, v) over the physical
            parts of each element (cut rules on interface elements)
  div       h^-2 (div u, div v), same regions
  flux      symmetric Nitsche consistency terms on the interface, built from
            kappa-weighted averages of n x (alpha curlcurl .) and of
            curl(alpha curlcurl .) against jumps of curl and n x .
  normal    h^-3 jumps of n.u on the interface plus h^-3 jumps of n.u across
            every interior edge shared by two elements of one component
  tangential/curl   lambda h^-3 [n x u][n x v] and lambda h^-1 [curl u][curl v]
            on the interface
  ghost     per component, on edges of cut elements: sum over derivative
            orders l = 0..4 of h^(2l-1) jumps of the plain directional
            derivative stacks of u and of curl u

The structured mesh has two element shapes and three edge orientations, all
translation-congruent, so pure-element volume blocks and edge penalty blocks
are computed once and scattered.  Right-hand sides follow the same split.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .element import ElementBasis
from .geometry import Classification, ElementTag, Mesh
from .manufactured import ProblemData
from .quadrature import CutDecomposition, gauss01, reference_rule
from .space import DofSpace

__all__ = [
    "ProblemParams",
    "InterfaceWeights",
    "LinearSystem",
    "average_weights",
    "assemble",
    "nitsche_flux_block",
    "PART_NAMES",
]

PART_NAMES = ("volume", "div", "flux", "normal", "tangential", "curl", "ghost")
GHOST_ORDER = 4


@dataclass(frozen=True)
class ProblemParams:
    """Material and penalty parameters of one run."""

    alpha_minus: float
    alpha_plus: float
    gamma: float
    lam: float
    h: float

    def __post_init__(self):
        if self.alpha_minus <= 0 or self.alpha_plus <= 0:
            raise ValueError("material coefficients must be positive")
        if self.gamma < 0:
            raise ValueError("zeroth-order coefficient must be nonnegative")
        if self.lam <= 0:
            raise ValueError("penalty parameter must be positive")

    def alpha(self, component: int) -> float:
        return self.alpha_minus if component == 0 else self.alpha_plus


@dataclass(frozen=True)
class InterfaceWeights:
    kappa1: float
    kappa2: float


def average_weights(dec: CutDecomposition, params: ProblemParams) -> InterfaceWeights:
    """Area/coefficient weighted averaging weights of a cut element.

    kappa1 = a+ |K-| / (a+ |K-| + a- |K+|), kappa2 its complement; the
    cross-weighting keeps the averages stable for small cut fragments and
    high contrast.
    """
    den = params.alpha_plus * dec.area_minus + params.alpha_minus * dec.area_plus
    if den <= 0.0:
        raise ValueError(f"element {dec.element}: cut element with empty parts")
    k1 = params.alpha_plus * dec.area_minus / den
    return InterfaceWeights(kappa1=k1, kappa2=1.0 - k1)


@dataclass
class LinearSystem:
    """Reduced symmetric system plus the bookkeeping to interpret it."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    space: DofSpace
    params: ProblemParams
    parts: Optional[dict] = None  # raw (pre-elimination) per-term matrices

    @property
    def total_dofs(self) -> int:
        return self.space.total_dofs


class _Accumulator:
    """COO triplet buffers, one per named term."""

    def __init__(self, n: int):
        self.n = n
        self.rows = {k: [] for k in PART_NAMES}
        self.cols = {k: [] for k in PART_NAMES}
        self.vals = {k: [] for k in PART_NAMES}

    def add_blocks(self, part: str, dofs: np.ndarray, values: np.ndarray):
        """dofs (ne, m), values (ne, m, m) or (m, m) broadcast over ne."""
        ne, m = dofs.shape
        if values.ndim == 2:
            values = np.broadcast_to(values, (ne, m, m))
        rows = np.repeat(dofs, m, axis=1).astype(np.int32)
        cols = np.tile(dofs, (1, m)).astype(np.int32)
        self.rows[part].append(rows.ravel())
        self.cols[part].append(cols.ravel())
        self.vals[part].append(np.asarray(values, float).reshape(ne, m * m).ravel())

    def matrices(self) -> dict:
        out = {}
        for k in PART_NAMES:
            if self.rows[k]:
                out[k] = sp.coo_matrix(
                    (
                        np.concatenate(self.vals[k]),
                        (np.concatenate(self.rows[k]), np.concatenate(self.cols[k])),
                    ),
                    shape=(self.n, self.n),
                ).tocsr()
            else:
                out[k] = sp.csr_matrix((self.n, self.n))
        return out


def _volume_type_matrices(basis: ElementBasis):
    """Per-type (curlcurl, mass, div) Gram matrices over the full element."""
    ref = reference_rule(8)
    cell = basis.cell
    out = []
    for t in range(2):
        verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        # zeta-frame triangle of this type
        from .geometry import TYPE_OFFSETS

        v = TYPE_OFFSETS[t]
        b = np.column_stack([v[1] - v[0], v[2] - v[0]])
        pts = v[0][None, :] + ref.points @ b.T
        w = ref.weights * abs(np.linalg.det(b)) * cell**2  # physical measure
        tab = basis.tabulate(t, pts, kinds=("u", "curlcurl", "div"))
        k1 = np.einsum("icq,jcq,q->ij", tab["curlcurl"], tab["curlcurl"], w)
        m = np.einsum("icq,jcq,q->ij", tab["u"], tab["u"], w)
        d = np.einsum("iq,jq,q->ij", tab["div"], tab["div"], w)
        out.append((k1, m, d, pts, w))
    return out


def _cut_side_rule(dec: CutDecomposition, component: int):
    return dec.minus_rule if component == 0 else dec.plus_rule


def _edge_points(mesh: Mesh, edge: int, s: np.ndarray) -> np.ndarray:
    p0 = mesh.vertices[mesh.edges[edge, 0]]
    p1 = mesh.vertices[mesh.edges[edge, 1]]
    return p0[None, :] + s[:, None] * (p1 - p0)[None, :]


def _edge_normal(mesh: Mesh, edge: int) -> np.ndarray:
    p0 = mesh.vertices[mesh.edges[edge, 0]]
    p1 = mesh.vertices[mesh.edges[edge, 1]]
    t = (p1 - p0) / np.linalg.norm(p1 - p0)
    return np.array([t[1], -t[0]])


def _normal_jump_edge_block(mesh: Mesh, basis: ElementBasis, edge: int, h: float):
    """26x26 block of h^-3 int_E [n.u][n.v] for the edge's two neighbors."""
    s, w = gauss01(5)
    pts = _edge_points(mesh, edge, s)
    p0 = mesh.vertices[mesh.edges[edge, 0]]
    p1 = mesh.vertices[mesh.edges[edge, 1]]
    wphys = w * np.linalg.norm(p1 - p0)
    n = _edge_normal(mesh, edge)
    t0, t1 = mesh.triangles_of_edge[edge]
    traces = []
    for t_el, sign in ((t0, 1.0), (t1, -1.0)):
        tt = int(mesh.tri_type[t_el])
        zeta = (pts - mesh.anchor(t_el)) / mesh.cell
        u = basis.tabulate(tt, zeta, kinds=("u",))["u"]
        traces.append(sign * (n[0] * u[:, 0, :] + n[1] * u[:, 1, :]))
    j = np.vstack(traces)  # (26, q)
    return (h**-3) * np.einsum("iq,jq,q->ij", j, j, wphys)


def _ghost_edge_block(mesh: Mesh, basis: ElementBasis, edge: int, h: float):
    """26x26 block of the two derivative-jump penalties on one edge.

    sum_l h^(2l-1) int_E [dn^l u].[dn^l v] + [dn^l curl u][dn^l curl v],
    l = 0..4, jumps between the polynomial extensions of the two neighbors.
    """
    s, w = gauss01(5)
    pts = _edge_points(mesh, edge, s)
    p0 = mesh.vertices[mesh.edges[edge, 0]]
    p1 = mesh.vertices[mesh.edges[edge, 1]]
    wphys = w * np.linalg.norm(p1 - p0)
    n = _edge_normal(mesh, edge)
    t0, t1 = mesh.triangles_of_edge[edge]
    stacks = []
    for t_el, sign in ((t0, 1.0), (t1, -1.0)):
        tt = int(mesh.tri_type[t_el])
        zeta = (pts - mesh.anchor(t_el)) / mesh.cell
        us, cs = basis.normal_derivative_stack(tt, zeta, n, GHOST_ORDER)
        stacks.append((sign, us, cs))
    block = np.zeros((26, 26))
    for l in range(GHOST_ORDER + 1):
        ju = np.concatenate(
            [sign * us[l] for sign, us, _ in stacks], axis=0
        )  # (26, 2, q)
        jc = np.concatenate([sign * cs[l] for sign, _, cs in stacks], axis=0)
        scale = h ** (2 * l - 1)
        block += scale * np.einsum("icq,jcq,q->ij", ju, ju, wphys)
        block += scale * np.einsum("iq,jq,q->ij", jc, jc, wphys)
    return block


def _representative_edges(mesh: Mesh) -> dict:
    """One interior edge id per orientation (away from the boundary)."""
    reps = {}
    interior = ~mesh.boundary_edge
    for o in range(3):
        ids = np.nonzero(interior & (mesh.edge_orientation == o))[0]
        if len(ids):
            reps[o] = int(ids[0])
    return reps


def nitsche_flux_block(tab: dict, weights: InterfaceWeights, params: ProblemParams, rule):
    """26x26 interface consistency/symmetry block of one cut element.

    `tab` holds the 13 local basis quantities at the interface rule points;
    rows/columns are ordered [minus component, plus component].
    """
    n = rule.normals
    w = rule.weights
    nxcc = n[:, 0][None, :] * tab["curlcurl"][:, 1, :] - n[:, 1][None, :] * tab["curlcurl"][:, 0, :]
    curl = tab["curl"]
    nxu = n[:, 0][None, :] * tab["u"][:, 1, :] - n[:, 1][None, :] * tab["u"][:, 0, :]
    curl3 = tab["curl3"]

    k = (weights.kappa1, weights.kappa2)
    al = (params.alpha_minus, params.alpha_plus)
    sg = (1.0, -1.0)
    avg_flux = np.vstack([k[c] * al[c] * nxcc for c in range(2)])      # {{n x (a curlcurl .)}}
    jump_curl = np.vstack([sg[c] * curl for c in range(2)])            # [curl .]
    avg_curl3 = np.vstack([k[c] * al[c] * curl3 for c in range(2)])    # {{curl(a curlcurl .)}}
    jump_nxu = np.vstack([sg[c] * nxu for c in range(2)])              # [n x .]

    ab = np.einsum("iq,jq,q->ij", avg_flux, jump_curl, w)
    cd = np.einsum("iq,jq,q->ij", avg_curl3, jump_nxu, w)
    return (ab + ab.T) - (cd + cd.T)


def assemble(
    mesh: Mesh,
    classification: Optional[Classification],
    space: DofSpace,
    cut_decompositions: Optional[dict],
    params: ProblemParams,
    data: ProblemData,
    basis: Optional[ElementBasis] = None,
    eliminate: bool = True,
    return_parts: bool = False,
) -> LinearSystem:
    """Assemble the full stabilized system.

    With classification=None (single fitted component) all interface and
    ghost terms drop out naturally.  The returned system is reduced to the
    free DOFs unless eliminate=False; return_parts additionally exposes the
    raw per-term matrices for diagnostics.
    """
    if basis is None:
        basis = ElementBasis(mesh)
    h = params.h
    acc = _Accumulator(space.total_raw)
    rhs = np.zeros(space.total_raw)
    ncomp = space.num_components
    f_of = {0: data.f_minus, 1: data.f_plus} if ncomp == 2 else {0: data.f_plus}
    alpha_of = (
        (params.alpha_minus, params.alpha_plus) if ncomp == 2 else (params.alpha_plus,)
    )

    tags = (
        classification.element_tag
        if classification is not None
        else np.full(mesh.num_triangles, ElementTag.PLUS, dtype=np.int8)
    )
    cut_set = classification.t_gamma if classification is not None else np.array([], dtype=int)
    if len(cut_set) and not cut_decompositions:
        raise RuntimeError("cut elements present but no decompositions supplied")
    if len(cut_set):
        missing = [int(t) for t in cut_set if t not in cut_decompositions]
        if missing:
            raise RuntimeError(f"missing cut decompositions for elements {missing[:5]}")

    type_mats = _volume_type_matrices(basis)

    # ---- pure elements: volume terms and load, reused per type/side --------
    for comp in range(ncomp):
        pure_tag = ElementTag.MINUS if (ncomp == 2 and comp == 0) else ElementTag.PLUS
        alpha = alpha_of[comp]
        fload = f_of[comp]
        table = space.element_dofs(comp)
        for t in range(2):
            els = np.nonzero((tags == pure_tag) & (mesh.tri_type == t))[0]
            if not len(els):
                continue
            k1, m, d, zpts, w = type_mats[t]
            acc.add_blocks("volume", table[els], alpha * k1 + params.gamma * m)
            acc.add_blocks("div", table[els], (h**-2) * d)
            # load: f at the mapped points of every element of this type
            tab_u = basis.tabulate(t, zpts, kinds=("u",))["u"]
            phys = mesh.anchors()[els][:, None, :] + (basis.cell * zpts)[None, :, :]
            fv = fload(phys.reshape(-1, 2)).reshape(len(els), -1, 2)
            bloc = np.einsum("eqc,jcq,q->ej", fv, tab_u, w)
            if data.div_source is not None:
                dv = data.div_source(phys.reshape(-1, 2)).reshape(len(els), -1)
                bloc += (h**-2) * np.einsum("eq,jq,q->ej", dv, basis.tabulate(t, zpts, kinds=("div",))["div"], w)
            np.add.at(rhs, table[els], bloc)

    # ---- cut elements: one-sided volume terms and load ---------------------
    for el in cut_set:
        el = int(el)
        dec = cut_decompositions[el]
        t = int(mesh.tri_type[el])
        anchor = mesh.anchor(el)
        for comp in range(2):
            rule = _cut_side_rule(dec, comp)
            if len(rule) == 0:
                continue
            dofs = space.gather(el, comp)
            zeta = (rule.points - anchor) / basis.cell
            tab = basis.tabulate(t, zeta, kinds=("u", "curlcurl", "div"))
            w = rule.weights
            k1 = np.einsum("icq,jcq,q->ij", tab["curlcurl"], tab["curlcurl"], w)
            m = np.einsum("icq,jcq,q->ij", tab["u"], tab["u"], w)
            d = np.einsum("iq,jq,q->ij", tab["div"], tab["div"], w)
            acc.add_blocks("volume", dofs[None, :], (alpha_of[comp] * k1 + params.gamma * m)[None])
            acc.add_blocks("div", dofs[None, :], (h**-2 * d)[None])
            fv = f_of[comp](rule.points)
            rhs[dofs] += np.einsum("qc,jcq,q->j", fv, tab["u"], w)
            if data.div_source is not None:
                dv = data.div_source(rule.points)
                rhs[dofs] += (h**-2) * np.einsum("q,jq,q->j", dv, tab["div"], w)

    # ---- interface terms on cut elements ------------------------------------
    for el in cut_set:
        el = int(el)
        dec = cut_decompositions[el]
        rule = dec.gamma_rule
        if len(rule) == 0:
            continue
        t = int(mesh.tri_type[el])
        zeta = (rule.points - mesh.anchor(el)) / basis.cell
        tab = basis.tabulate(t, zeta, kinds=("u", "curl", "curlcurl", "curl3"))
        kw = average_weights(dec, params)
        dofs = np.concatenate([space.gather(el, 0), space.gather(el, 1)])
        n, w = rule.normals, rule.weights

        acc.add_blocks("flux", dofs[None, :], nitsche_flux_block(tab, kw, params, rule)[None])

        nxu = n[:, 0][None, :] * tab["u"][:, 1, :] - n[:, 1][None, :] * tab["u"][:, 0, :]
        ndu = n[:, 0][None, :] * tab["u"][:, 0, :] + n[:, 1][None, :] * tab["u"][:, 1, :]
        jump_nxu = np.vstack([nxu, -nxu])
        jump_ndu = np.vstack([ndu, -ndu])
        jump_curl = np.vstack([tab["curl"], -tab["curl"]])
        acc.add_blocks(
            "tangential",
            dofs[None, :],
            (params.lam * h**-3 * np.einsum("iq,jq,q->ij", jump_nxu, jump_nxu, w))[None],
        )
        acc.add_blocks(
            "curl",
            dofs[None, :],
            (params.lam / h * np.einsum("iq,jq,q->ij", jump_curl, jump_curl, w))[None],
        )
        acc.add_blocks(
            "normal",
            dofs[None, :],
            (h**-3 * np.einsum("iq,jq,q->ij", jump_ndu, jump_ndu, w))[None],
        )

        # data terms with the swapped averages {{.}}* = k2 (.)- + k1 (.)+
        p3 = data.phi3(rule.points, n)
        p4 = data.phi4(rule.points, n)
        star = np.concatenate([np.full(13, kw.kappa2), np.full(13, kw.kappa1)])
        star_curl = star[:, None] * np.vstack([tab["curl"], tab["curl"]])
        star_nxu = star[:, None] * np.vstack([nxu, nxu])
        rhs[dofs] += np.einsum("iq,q,q->i", -star_curl, p3, w)
        rhs[dofs] += np.einsum("iq,q,q->i", star_nxu, p4, w)

    # ---- interior-edge normal jump penalty, per component -------------------
    reps = _representative_edges(mesh)
    normal_blocks = {o: _normal_jump_edge_block(mesh, basis, e, h) for o, e in reps.items()}
    interior = np.nonzero(~mesh.boundary_edge)[0]
    for comp in range(ncomp):
        blk = space.blocks[comp]
        t0 = mesh.triangles_of_edge[interior, 0]
        t1 = mesh.triangles_of_edge[interior, 1]
        both = blk.active[t0] & blk.active[t1]
        edges_c = interior[both]
        table = space.element_dofs(comp)
        for o in range(3):
            eo = edges_c[mesh.edge_orientation[edges_c] == o]
            if not len(eo):
                continue
            dofs = np.hstack(
                [table[mesh.triangles_of_edge[eo, 0]], table[mesh.triangles_of_edge[eo, 1]]]
            )
            acc.add_blocks("normal", dofs, normal_blocks[o])

    # ---- ghost penalties on cut-element edges, per component ----------------
    if classification is not None and len(classification.e_gamma):
        ghost_blocks = {o: _ghost_edge_block(mesh, basis, e, h) for o, e in reps.items()}
        for comp in range(ncomp):
            blk = space.blocks[comp]
            eg = classification.e_gamma
            t0 = mesh.triangles_of_edge[eg, 0]
            t1 = mesh.triangles_of_edge[eg, 1]
            both = blk.active[t0] & blk.active[t1]
            edges_c = eg[both]
            table = space.element_dofs(comp)
            for o in range(3):
                eo = edges_c[mesh.edge_orientation[edges_c] == o]
                if not len(eo):
                    continue
                dofs = np.hstack(
                    [table[mesh.triangles_of_edge[eo, 0]], table[mesh.triangles_of_edge[eo, 1]]]
                )
                acc.add_blocks("ghost", dofs, ghost_blocks[o])

    parts = acc.matrices()
    a_raw = sum(parts.values()).tocsr()
    if not np.all(np.isfinite(rhs)):
        bad = np.nonzero(~np.isfinite(rhs))[0][:5]
        raise FloatingPointError(f"non-finite right-hand side entries at raw DOFs {bad}")
    if eliminate:
        free = space.free_index
        a = a_raw[free][:, free].tocsr()
        b = rhs[free]
    else:
        a, b = a_raw, rhs
    return LinearSystem(
        matrix=a,
        rhs=b,
        space=space,
        params=params,
        parts=parts if return_parts else None,
    )
