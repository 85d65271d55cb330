"""Lowest-order curl-curl conforming triangular element.

Shape space: full quadratic vector polynomials enriched by one degree-4
bubble field whose scalar curl is the cubic barycentric bubble.  The 13 local
degrees of freedom are

  * scalar curl values at the 3 vertices,
  * 3 tangential moments per edge against {1, s, s^2} in the normalized arc
    parameter of the globally oriented edge (physical arc measure),
  * one interior moment against the position vector, normalized by the
    Jacobian determinant (on the unit reference triangle this is literally
    the moment against x).

Tangential traces of all shape functions are quadratic along edges and the
curl is linear along edges, so matching these DOFs across elements yields a
globally curl-curl conforming space.

Shape functions are stored as degree-4 coefficient tables in the scaled local
frame zeta = (x - anchor)/cell of each of the two congruence types of the
structured mesh; evaluation applies 1/cell per physical derivative order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import poly
from .geometry import TYPE_BMAT, TYPE_EDGES, TYPE_OFFSETS, Mesh
from .quadrature import gauss01, reference_rule

__all__ = [
    "poincare_bubble",
    "build_reference_basis",
    "map_covariant",
    "ReferenceElement",
    "ElementBasis",
    "N_DOFS",
    "DERIV_KINDS",
]

N_DOFS = 13
# P2 monomial exponents, per vector component
_P2 = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))

DERIV_KINDS = ("u", "curl", "curlcurl", "div", "curl3")


def poincare_bubble() -> np.ndarray:
    """Bubble field on the reference triangle, as a (2,5,5) table.

    With B = l1 l2 l3 = B2 + B3 split into homogeneous parts about the vertex
    (0,0), the field is x_perp (B2/4 + B3/5); its scalar curl equals B and
    its tangential trace vanishes on the two edges through the origin.
    """
    b2 = poly.monomial(1, 1)
    b3 = -(poly.monomial(2, 1) + poly.monomial(1, 2))
    f = b2 / 4.0 + b3 / 5.0
    out = poly.zero_vector()
    out[0] = -poly.multiply(poly.monomial(0, 1), f)
    out[1] = poly.multiply(poly.monomial(1, 0), f)
    return out


def map_covariant(field: np.ndarray, bmat: np.ndarray) -> np.ndarray:
    """Covariant (tangential-trace preserving) image of a vector table.

    For the affine map x = B xhat + b, returns the table of
    u(x) = B^{-T} uhat(B^{-1}(x - b)) in the translated frame z = x - b.
    Tangential edge moments are invariant under this map and the scalar curl
    picks up a factor 1/det(B).
    """
    binv = np.linalg.inv(bmat)
    comp0 = poly.compose_linear(field[0], binv)
    comp1 = poly.compose_linear(field[1], binv)
    bt_inv = binv.T
    out = poly.zero_vector()
    out[0] = bt_inv[0, 0] * comp0 + bt_inv[0, 1] * comp1
    out[1] = bt_inv[1, 0] * comp0 + bt_inv[1, 1] * comp1
    return out


def _generators(bmat: np.ndarray) -> np.ndarray:
    """12 vector monomials + the mapped bubble, as a (13,2,5,5) stack."""
    gens = np.zeros((N_DOFS, 2, poly.NC, poly.NC))
    k = 0
    for comp in range(2):
        for (i, j) in _P2:
            gens[k, comp] = poly.monomial(i, j)
            k += 1
    bubble = map_covariant(poincare_bubble(), bmat)
    # generator scale does not matter; normalize to O(1) coefficients
    gens[12] = bubble / np.abs(bubble).max()
    return gens


def _dof_matrix(gens: np.ndarray, verts: np.ndarray, edges, cell: float) -> np.ndarray:
    """Evaluate the 13 physical DOFs on a generator stack.

    `verts` are the element vertices in the scaled local frame (units of the
    cell size are already divided out), `cell` restores physical scaling.
    """
    n = len(gens)
    m = np.zeros((N_DOFS, n))
    # vertex curls (physical): (1/cell) * zeta-curl at the vertices
    curls = np.stack([poly.curl_vector(g) for g in gens])
    xp, yp = poly.power_matrices(verts)
    m[0:3, :] = poly.eval_batch(curls, xp, yp).T / cell
    # edge moments: int u.tau s^k ds, s in [0,1] along the oriented edge
    s, w = gauss01(6)
    row = 3
    for (a, b) in edges:
        pa, pb = verts[a], verts[b]
        tau = pb - pa
        length = np.linalg.norm(tau) * cell
        tau = tau / np.linalg.norm(tau)
        pts = pa[None, :] + s[:, None] * (pb - pa)[None, :]
        xp, yp = poly.power_matrices(pts)
        vals = poly.eval_batch(gens, xp, yp)  # (n, 2, q)
        ut = vals[:, 0, :] * tau[0] + vals[:, 1, :] * tau[1]
        for k in range(3):
            m[row, :] = length * (ut * (w * s**k)[None, :]).sum(axis=1)
            row += 1
    # interior moment, det-normalized: (1/cell^2) int u.(x-anchor) dx
    # in the zeta frame this is cell * int u.zeta dzeta over the local triangle
    ref = reference_rule(8)
    bmat = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
    det = abs(np.linalg.det(bmat))
    qpts = verts[0][None, :] + ref.points @ bmat.T
    qw = ref.weights * det
    xp, yp = poly.power_matrices(qpts)
    vals = poly.eval_batch(gens, xp, yp)
    dot = vals[:, 0, :] * qpts[None, :, 0] + vals[:, 1, :] * qpts[None, :, 1]
    m[12, :] = cell * (dot * qw[None, :]).sum(axis=1)
    return m


@dataclass(frozen=True)
class ReferenceElement:
    """Dual basis on the unit reference triangle (cell size 1)."""

    basis: np.ndarray       # (13, 2, 5, 5)
    bubble: np.ndarray      # (2, 5, 5)
    dof_condition: float


def build_reference_basis(max_condition: float = 1e8) -> ReferenceElement:
    """Invert the DOF/generator matrix on the reference triangle."""
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    edges = ((0, 1), (1, 2), (0, 2))
    gens = _generators(np.eye(2))
    m = _dof_matrix(gens, verts, edges, cell=1.0)
    cond = float(np.linalg.cond(m))
    if cond > max_condition:
        raise RuntimeError(
            f"degrees of freedom are ill-posed on the shape space (cond={cond:.2e})"
        )
    coeff = np.einsum("kj,kcab->jcab", np.linalg.inv(m), gens)
    return ReferenceElement(basis=coeff, bubble=poincare_bubble(), dof_condition=cond)


class ElementBasis:
    """Per-mesh shape-function tables for the two triangle congruence types.

    All elements of one type share the same 13 dual-basis polynomials in
    their scaled local frame, so tables are built once per mesh.  Evaluation
    returns physical values of u, curl u, the vector curl of curl u, div u,
    the third-order scalar curl(curlcurl u) = -laplace(curl u), and arbitrary
    mixed derivatives up to total order 4.
    """

    def __init__(self, mesh: Mesh, max_condition: float = 1e8):
        self.mesh = mesh
        self.cell = mesh.cell
        self.coeff = np.zeros((2, N_DOFS, 2, poly.NC, poly.NC))
        conds = []
        for t in range(2):
            gens = _generators(TYPE_BMAT[t])
            m = _dof_matrix(gens, TYPE_OFFSETS[t], TYPE_EDGES[t], self.cell)
            cond = float(np.linalg.cond(m))
            if cond > max_condition:
                raise RuntimeError(
                    f"element type {t}: DOF matrix condition {cond:.2e} exceeds limit"
                )
            conds.append(cond)
            self.coeff[t] = np.einsum("kj,kcab->jcab", np.linalg.inv(m), gens)
        self.dof_condition = max(conds)
        self._deriv_cache: dict[tuple[int, int, int], np.ndarray] = {}

    # -- coefficient tables ------------------------------------------------
    def deriv_tables(self, t: int, a: int, b: int) -> np.ndarray:
        """(13,2,5,5) tables of the zeta-frame derivative d^a_x d^b_y."""
        key = (t, a, b)
        if key not in self._deriv_cache:
            base = self.coeff[t]
            out = np.empty_like(base)
            for j in range(N_DOFS):
                for c in range(2):
                    out[j, c] = poly.diff(base[j, c], a, b)
            self._deriv_cache[key] = out
        return self._deriv_cache[key]

    def local_frame(self, elements: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Physical points -> zeta frame of each element (broadcast pairs)."""
        anchors = self.mesh.anchors()[elements]
        return (pts - anchors) / self.cell

    # -- evaluation ----------------------------------------------------------
    def tabulate(self, t: int, zeta: np.ndarray, kinds=DERIV_KINDS) -> dict:
        """Evaluate basis quantities at zeta-frame points (q,2).

        Returns arrays keyed by kind: 'u' (13,2,q), 'curl' (13,q),
        'curlcurl' (13,2,q), 'div' (13,q), 'curl3' (13,q).
        """
        xp, yp = poly.power_matrices(zeta)
        inv = 1.0 / self.cell
        out = {}
        d = lambda a, b: poly.eval_batch(self.deriv_tables(t, a, b), xp, yp)
        if "u" in kinds:
            out["u"] = d(0, 0)
        need1 = {"curl", "div"} & set(kinds)
        if need1:
            dx = d(1, 0)
            dy = d(0, 1)
            if "curl" in kinds:
                out["curl"] = (dx[:, 1, :] - dy[:, 0, :]) * inv
            if "div" in kinds:
                out["div"] = (dx[:, 0, :] + dy[:, 1, :]) * inv
        if "curlcurl" in kinds:
            dxx = d(2, 0)
            dxy = d(1, 1)
            dyy = d(0, 2)
            # vector curl of the scalar curl: (d_y curl, -d_x curl)
            cc = np.empty((N_DOFS, 2, len(zeta)))
            cc[:, 0, :] = dxy[:, 1, :] - dyy[:, 0, :]
            cc[:, 1, :] = -(dxx[:, 1, :] - dxy[:, 0, :])
            out["curlcurl"] = cc * inv**2
        if "curl3" in kinds:
            # curl(curlcurl u) = -laplace(curl u)
            dxxx = d(3, 0)
            dxxy = d(2, 1)
            dxyy = d(1, 2)
            dyyy = d(0, 3)
            lap_curl = (
                dxxx[:, 1, :] - dxxy[:, 0, :] + dxyy[:, 1, :] - dyyy[:, 0, :]
            )
            out["curl3"] = -lap_curl * inv**3
        return out

    def normal_derivative_stack(self, t: int, zeta: np.ndarray, normal: np.ndarray, order: int):
        """Plain directional sums sum_{|m|=l} D^m q n^m for l = 0..order.

        Returns (u_stack, curl_stack): u_stack[l] has shape (13,2,q), the
        curl stack (13,q).  No multinomial weights, matching the penalty
        definition verbatim.
        """
        if order > poly.MAX_DEG:
            raise ValueError("derivatives beyond total order 4 vanish identically")
        xp, yp = poly.power_matrices(zeta)
        n1, n2 = float(normal[0]), float(normal[1])
        inv = 1.0 / self.cell
        u_stack, curl_stack = [], []
        for l in range(order + 1):
            acc_u = None
            acc_c = None
            for a in range(l + 1):
                b = l - a
                fac = (n1**a) * (n2**b) * inv**l
                du = poly.eval_batch(self.deriv_tables(t, a, b), xp, yp)
                # curl needs one extra derivative applied after the mix
                dcu = (
                    poly.eval_batch(self.deriv_tables(t, a + 1, b), xp, yp)[:, 1, :]
                    - poly.eval_batch(self.deriv_tables(t, a, b + 1), xp, yp)[:, 0, :]
                ) * inv
                acc_u = fac * du if acc_u is None else acc_u + fac * du
                acc_c = fac * dcu if acc_c is None else acc_c + fac * dcu
            u_stack.append(acc_u)
            curl_stack.append(acc_c)
        return u_stack, curl_stack

    def evaluate(self, element: int, pts: np.ndarray, kinds=DERIV_KINDS) -> dict:
        """Physical-point evaluation of all 13 basis functions on one element."""
        pts = np.atleast_2d(pts)
        t = int(self.mesh.tri_type[element])
        zeta = (pts - self.mesh.anchor(element)) / self.cell
        return self.tabulate(t, zeta, kinds)

    def mixed_derivative(self, element: int, pts: np.ndarray, a: int, b: int) -> np.ndarray:
        """Physical mixed derivative d^(a+b)/dx^a dy^b of all basis fields."""
        if a + b > poly.MAX_DEG:
            raise ValueError("derivatives beyond total order 4 vanish identically")
        pts = np.atleast_2d(pts)
        t = int(self.mesh.tri_type[element])
        zeta = (pts - self.mesh.anchor(element)) / self.cell
        xp, yp = poly.power_matrices(zeta)
        return poly.eval_batch(self.deriv_tables(t, a, b), xp, yp) / self.cell ** (a + b)
