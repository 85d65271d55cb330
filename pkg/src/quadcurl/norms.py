"""Interpolation onto the discrete space, error norms, and self-convergence
between nested refinements.

Norms follow the piecewise convention ||.||_h^2 = sum over the two physical
sides of the squared side norm; cut elements integrate each side with its
own cut rule and component field.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly import ProblemParams, average_weights
from .element import ElementBasis
from .geometry import TYPE_OFFSETS, Classification, ElementTag, Mesh
from .manufactured import ExactSolution
from .quadrature import gauss01, reference_rule
from .space import DofSpace

__all__ = [
    "ErrorReport",
    "DiscreteField",
    "interpolate_global",
    "compute_errors",
    "self_convergence",
    "interpolation_error_norms",
]


@dataclass
class ErrorReport:
    """Piecewise norms of a difference field over the two physical sides."""

    l2: float
    curl: float
    curlcurl: float
    div: float
    per_side: dict
    dofs: int
    h: float

    def as_tuple(self):
        return (self.l2, self.curl, self.curlcurl, self.div)


@dataclass
class DiscreteField:
    """A solved (or interpolated) coefficient vector with its discretization."""

    mesh: Mesh
    classification: Optional[Classification]
    space: DofSpace
    basis: ElementBasis
    coeffs: np.ndarray  # raw layout (eliminated entries zero)

    def eval_element(self, element: int, component: int, pts: np.ndarray, kinds):
        tab = self.basis.evaluate(element, pts, kinds=kinds)
        dofs = self.space.gather(element, component)
        c = self.coeffs[dofs]
        out = {}
        for k, v in tab.items():
            out[k] = np.einsum("j,j...->...", c, v)
        return out


def _zeta_rule(basis: ElementBasis, t: int, degree=8):
    ref = reference_rule(degree)
    v = TYPE_OFFSETS[t]
    b = np.column_stack([v[1] - v[0], v[2] - v[0]])
    pts = v[0][None, :] + ref.points @ b.T
    w = ref.weights * abs(np.linalg.det(b)) * basis.cell**2
    return pts, w


def interpolate_global(
    exact: ExactSolution,
    mesh: Mesh,
    classification: Optional[Classification],
    space: DofSpace,
    basis: Optional[ElementBasis] = None,
) -> np.ndarray:
    """Degree-of-freedom interpolant of a globally smooth field.

    The same field feeds both components (its own smooth extension), so
    per-entity DOF values are evaluated once per component, vectorized over
    vertices / edges / elements.
    """
    if basis is None:
        basis = ElementBasis(mesh)
    cell = basis.cell
    out = np.zeros(space.total_raw)
    s6, w6 = gauss01(10)
    zrules = [_zeta_rule(basis, t) for t in range(2)]
    for comp in range(space.num_components):
        blk = space.blocks[comp]
        # vertex curls
        vids = np.nonzero(blk.vertex_dof >= 0)[0]
        out[blk.vertex_dof[vids]] = exact.curl(mesh.vertices[vids])
        # edge moments against {1, s, s^2}, physical arc measure
        eids = np.nonzero(blk.edge_dof >= 0)[0]
        p0 = mesh.vertices[mesh.edges[eids, 0]]
        p1 = mesh.vertices[mesh.edges[eids, 1]]
        tangent = p1 - p0
        length = np.linalg.norm(tangent, axis=1)
        tau = tangent / length[:, None]
        pts = p0[:, None, :] + s6[None, :, None] * tangent[:, None, :]
        uv = exact.u(pts.reshape(-1, 2)).reshape(len(eids), -1, 2)
        ut = np.einsum("eqc,ec->eq", uv, tau)
        for k in range(3):
            mom = length * np.einsum("eq,q->e", ut, w6 * s6**k)
            out[blk.edge_dof[eids] + k] = mom
        # interior moments (det-normalized): cell * int u . zeta dzeta
        for t in range(2):
            els = np.nonzero((blk.interior_dof >= 0) & (mesh.tri_type == t))[0]
            if not len(els):
                continue
            zpts, w = zrules[t]
            phys = mesh.anchors()[els][:, None, :] + (cell * zpts)[None, :, :]
            uv = exact.u(phys.reshape(-1, 2)).reshape(len(els), -1, 2)
            mom = cell * np.einsum("eqc,qc,q->e", uv, zpts, w / cell**2)
            out[blk.interior_dof[els]] = mom
    return out


_NORM_KINDS = ("u", "curl", "curlcurl", "div")


def _accumulate_sq(acc, side, diff):
    acc[side]["l2"] += diff["u_sq"]
    acc[side]["curl"] += diff["curl_sq"]
    acc[side]["curlcurl"] += diff["curlcurl_sq"]
    acc[side]["div"] += diff["div_sq"]


def _diff_squares(tabs, coeffs, exact_vals, w):
    uh = np.einsum("j,jcq->cq", coeffs, tabs["u"])
    ch = np.einsum("j,jq->q", coeffs, tabs["curl"])
    cch = np.einsum("j,jcq->cq", coeffs, tabs["curlcurl"])
    dh = np.einsum("j,jq->q", coeffs, tabs["div"])
    du = exact_vals["u"].T - uh
    dc = exact_vals["curl"] - ch
    dcc = exact_vals["curlcurl"].T - cch
    dd = exact_vals["div"] - dh
    return {
        "u_sq": float(np.einsum("cq,cq,q->", du, du, w)),
        "curl_sq": float(np.einsum("q,q,q->", dc, dc, w)),
        "curlcurl_sq": float(np.einsum("cq,cq,q->", dcc, dcc, w)),
        "div_sq": float(np.einsum("q,q,q->", dd, dd, w)),
    }


def _exact_at(exact: ExactSolution, pts: np.ndarray):
    return {
        "u": exact.u(pts),
        "curl": exact.curl(pts),
        "curlcurl": exact.curlcurl(pts),
        "div": exact.div(pts),
    }


def compute_errors(
    field: DiscreteField,
    exact: ExactSolution,
    cut_decompositions: Optional[dict],
) -> ErrorReport:
    """Piecewise L2 / curl / curlcurl / div norms of (exact - discrete)."""
    mesh, space, basis = field.mesh, field.space, field.basis
    cls = field.classification
    acc = {s: {"l2": 0.0, "curl": 0.0, "curlcurl": 0.0, "div": 0.0} for s in (0, 1)}
    tags = (
        cls.element_tag if cls is not None else np.full(mesh.num_triangles, ElementTag.PLUS)
    )
    ncomp = space.num_components
    for comp in range(ncomp):
        pure_tag = ElementTag.MINUS if (ncomp == 2 and comp == 0) else ElementTag.PLUS
        side = comp if ncomp == 2 else 1
        table = space.element_dofs(comp)
        for t in range(2):
            els = np.nonzero((tags == pure_tag) & (mesh.tri_type == t))[0]
            if not len(els):
                continue
            zpts, w = _zeta_rule(basis, t)
            tabs = basis.tabulate(t, zpts, kinds=_NORM_KINDS)
            phys = mesh.anchors()[els][:, None, :] + (basis.cell * zpts)[None, :, :]
            ex = _exact_at(exact, phys.reshape(-1, 2))
            coeffs = field.coeffs[table[els]]
            # batch the element loop through einsum over e
            uh = np.einsum("ej,jcq->ecq", coeffs, tabs["u"])
            ch = np.einsum("ej,jq->eq", coeffs, tabs["curl"])
            cch = np.einsum("ej,jcq->ecq", coeffs, tabs["curlcurl"])
            dh = np.einsum("ej,jq->eq", coeffs, tabs["div"])
            q = len(w)
            du = ex["u"].reshape(len(els), q, 2).transpose(0, 2, 1) - uh
            dc = ex["curl"].reshape(len(els), q) - ch
            dcc = ex["curlcurl"].reshape(len(els), q, 2).transpose(0, 2, 1) - cch
            dd = ex["div"].reshape(len(els), q) - dh
            acc[side]["l2"] += float(np.einsum("ecq,ecq,q->", du, du, w))
            acc[side]["curl"] += float(np.einsum("eq,eq,q->", dc, dc, w))
            acc[side]["curlcurl"] += float(np.einsum("ecq,ecq,q->", dcc, dcc, w))
            acc[side]["div"] += float(np.einsum("eq,eq,q->", dd, dd, w))

    if cls is not None:
        for el in cls.t_gamma:
            el = int(el)
            dec = cut_decompositions[el]
            for comp, rule in ((0, dec.minus_rule), (1, dec.plus_rule)):
                if len(rule) == 0:
                    continue
                tabs = field.basis.evaluate(el, rule.points, kinds=_NORM_KINDS)
                coeffs = field.coeffs[space.gather(el, comp)]
                diff = _diff_squares(tabs, coeffs, _exact_at(exact, rule.points), rule.weights)
                _accumulate_sq(acc, comp, diff)

    per_side = {
        side: {k: np.sqrt(v) for k, v in vals.items()} for side, vals in acc.items()
    }
    tot = {k: np.sqrt(acc[0][k] + acc[1][k]) for k in acc[0]}
    return ErrorReport(
        l2=tot["l2"],
        curl=tot["curl"],
        curlcurl=tot["curlcurl"],
        div=tot["div"],
        per_side=per_side,
        dofs=space.total_dofs,
        h=mesh.h,
    )


def _containing_coarse_element(coarse: Mesh, pts: np.ndarray) -> np.ndarray:
    s = coarse.cell
    ij = np.floor((pts + 1.0) / s).astype(np.int64)
    ij = np.clip(ij, 0, coarse.n - 1)
    loc = (pts + 1.0) / s - ij
    upper = loc.sum(axis=1) > 1.0
    return 2 * (ij[:, 1] * coarse.n + ij[:, 0]) + upper.astype(np.int64)


def self_convergence(
    coarse: DiscreteField,
    fine: DiscreteField,
    fine_cut_decompositions: Optional[dict],
) -> ErrorReport:
    """Norms of (coarse solution - fine solution) on nested meshes.

    Both fields are evaluated at the fine mesh's quadrature points; each
    fine-side region uses the matching component of both solutions.
    """
    if fine.mesh.n != 2 * coarse.mesh.n:
        raise ValueError(
            f"needs nested meshes (fine n = 2 coarse n), got {coarse.mesh.n} -> {fine.mesh.n}"
        )
    mesh, space = fine.mesh, fine.space
    cls = fine.classification
    acc = {s: {"l2": 0.0, "curl": 0.0, "curlcurl": 0.0, "div": 0.0} for s in (0, 1)}
    tags = (
        cls.element_tag if cls is not None else np.full(mesh.num_triangles, ElementTag.PLUS)
    )
    ncomp = space.num_components

    def eval_coarse(pts, comp):
        els = _containing_coarse_element(coarse.mesh, pts)
        out_u = np.empty((len(pts), 2))
        out_c = np.empty(len(pts))
        out_cc = np.empty((len(pts), 2))
        out_d = np.empty(len(pts))
        for el in np.unique(els):
            m = els == el
            vals = coarse.eval_element(int(el), comp, pts[m], kinds=_NORM_KINDS)
            out_u[m] = vals["u"].T
            out_c[m] = vals["curl"]
            out_cc[m] = vals["curlcurl"].T
            out_d[m] = vals["div"]
        return {"u": out_u, "curl": out_c, "curlcurl": out_cc, "div": out_d}

    for comp in range(ncomp):
        pure_tag = ElementTag.MINUS if (ncomp == 2 and comp == 0) else ElementTag.PLUS
        side = comp if ncomp == 2 else 1
        for el in np.nonzero(tags == pure_tag)[0]:
            el = int(el)
            t = int(mesh.tri_type[el])
            zpts, w = _zeta_rule(fine.basis, t)
            pts = mesh.anchor(el)[None, :] + fine.basis.cell * zpts
            tabs = fine.basis.tabulate(t, zpts, kinds=_NORM_KINDS)
            coeffs = fine.coeffs[space.gather(el, comp)]
            diff = _diff_squares(tabs, coeffs, eval_coarse(pts, comp), w)
            _accumulate_sq(acc, side, diff)
    if cls is not None:
        for el in cls.t_gamma:
            el = int(el)
            dec = fine_cut_decompositions[el]
            for comp, rule in ((0, dec.minus_rule), (1, dec.plus_rule)):
                if len(rule) == 0:
                    continue
                tabs = fine.basis.evaluate(el, rule.points, kinds=_NORM_KINDS)
                coeffs = fine.coeffs[space.gather(el, comp)]
                diff = _diff_squares(tabs, coeffs, eval_coarse(rule.points, comp), rule.weights)
                _accumulate_sq(acc, comp, diff)

    per_side = {
        side: {k: np.sqrt(v) for k, v in vals.items()} for side, vals in acc.items()
    }
    tot = {k: np.sqrt(acc[0][k] + acc[1][k]) for k in acc[0]}
    return ErrorReport(
        l2=tot["l2"],
        curl=tot["curl"],
        curlcurl=tot["curlcurl"],
        div=tot["div"],
        per_side=per_side,
        dofs=space.total_dofs,
        h=mesh.h,
    )


def interpolation_error_norms(
    exact: ExactSolution,
    field: DiscreteField,
    cut_decompositions: Optional[dict],
    params: ProblemParams,
) -> dict:
    """Error measures of (exact - interpolant) including the penalty terms.

    Returns the plain piecewise norms plus the discrete energy norm: squared
    volume terms (curlcurl, L2, scaled div), the three interface penalties,
    and the two scaled interface-average flux terms.
    """
    rep = compute_errors(field, exact, cut_decompositions)
    h, lam = params.h, params.lam
    energy_sq = rep.curlcurl**2 + rep.l2**2 + (h**-2) * rep.div**2
    cls = field.classification
    if cls is not None:
        for el in cls.t_gamma:
            el = int(el)
            dec = cut_decompositions[el]
            rule = dec.gamma_rule
            if len(rule) == 0:
                continue
            n, w = rule.normals, rule.weights
            kw = average_weights(dec, params)
            sides = {}
            for comp in (0, 1):
                vals = field.eval_element(el, comp, rule.points, kinds=("u", "curl", "curlcurl", "curl3"))
                e_u = exact.u(rule.points).T - vals["u"]
                e_c = exact.curl(rule.points) - vals["curl"]
                e_cc = exact.curlcurl(rule.points).T - vals["curlcurl"]
                e_c3 = exact.curl3(rule.points) - vals["curl3"]
                sides[comp] = (e_u, e_c, e_cc, e_c3)
            jump_nxu = (
                n[:, 0] * sides[0][0][1] - n[:, 1] * sides[0][0][0]
                - (n[:, 0] * sides[1][0][1] - n[:, 1] * sides[1][0][0])
            )
            jump_ndu = (
                n[:, 0] * sides[0][0][0] + n[:, 1] * sides[0][0][1]
                - (n[:, 0] * sides[1][0][0] + n[:, 1] * sides[1][0][1])
            )
            jump_curl = sides[0][1] - sides[1][1]
            al = (params.alpha_minus, params.alpha_plus)
            avg_flux = kw.kappa1 * al[0] * (n[:, 0] * sides[0][2][1] - n[:, 1] * sides[0][2][0]) + \
                kw.kappa2 * al[1] * (n[:, 0] * sides[1][2][1] - n[:, 1] * sides[1][2][0])
            avg_curl3 = kw.kappa1 * al[0] * sides[0][3] + kw.kappa2 * al[1] * sides[1][3]
            energy_sq += (h**-3) * float(w @ jump_ndu**2)
            energy_sq += lam * (h**-3) * float(w @ jump_nxu**2)
            energy_sq += lam / h * float(w @ jump_curl**2)
            energy_sq += (h / lam) * float(w @ avg_flux**2)
            energy_sq += (h**3 / lam) * float(w @ avg_curl3**2)
    return {
        "l2": rep.l2,
        "curl": rep.curl,
        "curlcurl": rep.curlcurl,
        "div": rep.div,
        "energy": float(np.sqrt(energy_sq)),
        "dofs": rep.dofs,
        "h": rep.h,
    }
