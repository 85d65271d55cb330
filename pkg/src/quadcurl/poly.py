"""Dense bivariate polynomial tables of degree <= 4.

A scalar polynomial is a (5, 5) coefficient array ``c`` with
``p(x, y) = sum_ij c[i, j] x^i y^j`` and ``c[i, j] = 0`` for ``i + j > 4``.
A vector field is a (2, 5, 5) array.  These tables back the shape functions
of the curl-curl conforming element, so everything here is exact coefficient
arithmetic; no evaluation shortcuts that would spoil the degree bound.
"""

from __future__ import annotations

import numpy as np

MAX_DEG = 4
NC = MAX_DEG + 1


def zero_scalar() -> np.ndarray:
    return np.zeros((NC, NC))


def zero_vector() -> np.ndarray:
    return np.zeros((2, NC, NC))


def monomial(i: int, j: int) -> np.ndarray:
    c = zero_scalar()
    c[i, j] = 1.0
    return c


def degree(c: np.ndarray) -> int:
    """Total degree of a scalar table (-1 for the zero polynomial)."""
    nz = np.argwhere(np.abs(c) > 0)
    if nz.size == 0:
        return -1
    return int((nz[:, 0] + nz[:, 1]).max())


def diff_x(c: np.ndarray) -> np.ndarray:
    out = zero_scalar()
    out[:-1, :] = c[1:, :] * np.arange(1, NC)[:, None]
    return out


def diff_y(c: np.ndarray) -> np.ndarray:
    out = zero_scalar()
    out[:, :-1] = c[:, 1:] * np.arange(1, NC)[None, :]
    return out


def diff(c: np.ndarray, a: int, b: int) -> np.ndarray:
    """Mixed derivative d^(a+b) / dx^a dy^b."""
    out = c
    for _ in range(a):
        out = diff_x(out)
    for _ in range(b):
        out = diff_y(out)
    return out


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of two scalar tables, truncated at total degree MAX_DEG.

    Raises if the true product has degree > MAX_DEG; silent truncation would
    corrupt shape-function algebra.
    """
    full = np.zeros((2 * NC - 1, 2 * NC - 1))
    for i in range(NC):
        for j in range(NC):
            if a[i, j] != 0.0:
                full[i : i + NC, j : j + NC] += a[i, j] * b
    hi = np.argwhere(np.abs(full) > 1e-15)
    if hi.size and (hi[:, 0] + hi[:, 1]).max() > MAX_DEG:
        raise ValueError("polynomial product exceeds degree 4")
    return full[:NC, :NC].copy()


def compose_linear(c: np.ndarray, m: np.ndarray, shift=None) -> np.ndarray:
    """Substitute (x, y) <- M ((x, y) - shift) into a scalar table.

    Exact: an affine change of variables preserves total degree.
    """
    s0, s1 = (0.0, 0.0) if shift is None else (float(shift[0]), float(shift[1]))
    lx = zero_scalar()
    lx[1, 0], lx[0, 1] = m[0, 0], m[0, 1]
    lx[0, 0] = -(m[0, 0] * s0 + m[0, 1] * s1)
    ly = zero_scalar()
    ly[1, 0], ly[0, 1] = m[1, 0], m[1, 1]
    ly[0, 0] = -(m[1, 0] * s0 + m[1, 1] * s1)
    # powers of the two linear forms
    one = monomial(0, 0)
    px = [one]
    py = [one]
    for _ in range(MAX_DEG):
        px.append(multiply(px[-1], lx))
        py.append(multiply(py[-1], ly))
    out = zero_scalar()
    for i in range(NC):
        for j in range(NC):
            if c[i, j] != 0.0 and i + j <= MAX_DEG:
                out += c[i, j] * multiply(px[i], py[j])
    return out


def eval_scalar(c: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate a scalar table at points of shape (n, 2)."""
    xp = np.vander(pts[:, 0], NC, increasing=True)
    yp = np.vander(pts[:, 1], NC, increasing=True)
    return np.einsum("ij,pi,pj->p", c, xp, yp)


def power_matrices(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(x^i, y^j) Vandermonde blocks shared by batched evaluations."""
    xp = np.vander(pts[:, 0], NC, increasing=True)
    yp = np.vander(pts[:, 1], NC, increasing=True)
    return xp, yp


def eval_batch(coeffs: np.ndarray, xp: np.ndarray, yp: np.ndarray) -> np.ndarray:
    """Evaluate a stack of tables (..., 5, 5) at precomputed power matrices.

    Returns an array of shape (..., n_points).
    """
    return np.einsum("...ij,pi,pj->...p", coeffs, xp, yp)


def curl_vector(v: np.ndarray) -> np.ndarray:
    """Scalar curl d(v2)/dx - d(v1)/dy of a (2,5,5) table."""
    return diff_x(v[1]) - diff_y(v[0])


def div_vector(v: np.ndarray) -> np.ndarray:
    return diff_x(v[0]) + diff_y(v[1])


def vector_curl(s: np.ndarray) -> np.ndarray:
    """Vector curl (ds/dy, -ds/dx) of a scalar table."""
    return np.stack([diff_y(s), -diff_x(s)])
