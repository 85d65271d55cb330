"""Exact solutions and derived data for the benchmark problems.

All closed-form fields are sums of separable 1D factors, so every derivative
order is exact: trigonometric factors differentiate by phase shifts and
polynomial factors through numpy's Polynomial.  The governing operator in 2D
reduces nicely through the stream function: for u = (dpsi/dy, -dpsi/dx),

    curl u           = -laplace(psi)
    curlcurl u       = vector-curl of curl u
    curl(curlcurl u) = laplace^2(psi)
    f                = vector-curl(alpha laplace^2 psi + gamma psi).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial


class _Sin3:
    """k-th derivative of sin^3(pi t) via sin^3 = (3 sin t - sin 3t)/4."""

    def __init__(self, k: int = 0):
        self.k = k

    def deriv(self) -> "_Sin3":
        return _Sin3(self.k + 1)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        k = self.k
        ph = 0.5 * np.pi * k
        return (np.pi**k / 4.0) * (
            3.0 * np.sin(np.pi * t + ph) - 3.0**k * np.sin(3.0 * np.pi * t + ph)
        )


class SepField:
    """Sum of separable terms c * fx(x) * fy(y); factors expose deriv()/call."""

    def __init__(self, terms):
        self.terms = list(terms)

    def dx(self) -> "SepField":
        return SepField([(fx.deriv(), fy, c) for fx, fy, c in self.terms])

    def dy(self) -> "SepField":
        return SepField([(fx, fy.deriv(), c) for fx, fy, c in self.terms])

    def __add__(self, other: "SepField") -> "SepField":
        return SepField(self.terms + other.terms)

    def __sub__(self, other: "SepField") -> "SepField":
        return self + other.scale(-1.0)

    def scale(self, c: float) -> "SepField":
        return SepField([(fx, fy, c * cc) for fx, fy, cc in self.terms])

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        out = np.zeros(len(pts))
        for fx, fy, c in self.terms:
            out += c * fx(x) * fy(y)
        return out


def _laplacian(s: SepField) -> SepField:
    return s.dx().dx() + s.dy().dy()


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form solution with every derivative the scheme touches.

    All callables take (n, 2) point arrays; vector fields return (n, 2).
    """

    u: Callable[[np.ndarray], np.ndarray]
    curl: Callable[[np.ndarray], np.ndarray]
    curlcurl: Callable[[np.ndarray], np.ndarray]
    curl3: Callable[[np.ndarray], np.ndarray]  # scalar curl of curlcurl u
    div: Callable[[np.ndarray], np.ndarray]
    divergence_free: bool
    components: tuple  # (u1, u2) as SepField, for oracle-style testing


def _vector(f1: SepField, f2: SepField):
    def ev(pts):
        pts = np.atleast_2d(pts)
        return np.column_stack([f1(pts), f2(pts)])

    return ev


def _solution_from_components(u1: SepField, u2: SepField, divergence_free: bool) -> ExactSolution:
    curl = u2.dx() - u1.dy()
    div = u1.dx() + u2.dy()
    cc1, cc2 = curl.dy(), curl.dx().scale(-1.0)
    curl3 = _laplacian(curl).scale(-1.0)
    return ExactSolution(
        u=_vector(u1, u2),
        curl=curl,
        curlcurl=_vector(cc1, cc2),
        curl3=curl3,
        div=div,
        divergence_free=divergence_free,
        components=(u1, u2),
    )


@dataclass(frozen=True)
class ProblemData:
    """Right-hand side and interface jump data feeding the assembly.

    phi3/phi4 receive the interface points and unit normals (normals are
    ignored by data that does not need them).  div_source, when set, is the
    exact piecewise divergence whose scaled product with div(v) must be added
    to the right-hand side: it keeps the divergence penalty consistent for
    manufactured solutions that are not divergence-free.
    """

    f_minus: Callable[[np.ndarray], np.ndarray]
    f_plus: Callable[[np.ndarray], np.ndarray]
    phi3: Callable[[np.ndarray, np.ndarray], np.ndarray]
    phi4: Callable[[np.ndarray, np.ndarray], np.ndarray]
    alpha_minus: float
    alpha_plus: float
    gamma: float
    exact: Optional[ExactSolution] = None
    div_source: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""


def _smooth_problem(exact: ExactSolution, alpha_minus, alpha_plus, gamma, label) -> ProblemData:
    """Data for a globally smooth solution: jumps come only from alpha."""
    u1, u2 = exact.components
    curl = u2.dx() - u1.dy()
    lap_curl = _laplacian(curl)

    def make_f(alpha):
        f1 = lap_curl.dy().scale(-alpha) + u1.scale(gamma)
        f2 = lap_curl.dx().scale(alpha) + u2.scale(gamma)
        return _vector(f1, f2)

    dal = alpha_minus - alpha_plus
    cc = exact.curlcurl
    c3 = exact.curl3

    def phi3(pts, normals):
        w = cc(pts)
        return dal * (normals[:, 0] * w[:, 1] - normals[:, 1] * w[:, 0])

    def phi4(pts, normals):
        return dal * c3(pts)

    return ProblemData(
        f_minus=make_f(alpha_minus),
        f_plus=make_f(alpha_plus),
        phi3=phi3,
        phi4=phi4,
        alpha_minus=alpha_minus,
        alpha_plus=alpha_plus,
        gamma=gamma,
        exact=exact,
        div_source=None if exact.divergence_free else exact.div,
        label=label,
    )


def example1_solution() -> ExactSolution:
    """u = vector-curl of sin^3(pi x) sin^3(pi y); divergence free, and both
    u and curl u vanish on the boundary of [-1,1]^2."""
    u1 = SepField([(_Sin3(0), _Sin3(1), 1.0)])   # dpsi/dy
    u2 = SepField([(_Sin3(1), _Sin3(0), -1.0)])  # -dpsi/dx
    return _solution_from_components(u1, u2, divergence_free=True)


def example1_problem(alpha_minus=1.0, alpha_plus=1.0, gamma=1.0) -> ProblemData:
    return _smooth_problem(
        example1_solution(), alpha_minus, alpha_plus, gamma, label="example1"
    )


def example2_problem(alpha_minus=1.0, alpha_plus=1.0, gamma=0.01) -> ProblemData:
    """Same solution as example 1; meant to be paired with the peanut interface."""
    return _smooth_problem(
        example1_solution(), alpha_minus, alpha_plus, gamma, label="example2"
    )


def example3_data(gamma=1.0, alpha_minus=1.0, alpha_plus=1.0) -> ProblemData:
    """Constant/affine data with no closed-form solution (self-convergence)."""

    def f_plus(pts):
        pts = np.atleast_2d(pts)
        out = np.zeros_like(pts)
        out[:, 0] = 10.0
        return out

    def f_minus(pts):
        pts = np.atleast_2d(pts)
        out = np.zeros_like(pts)
        out[:, 0] = 1.0
        return out

    def phi3(pts, normals):
        pts = np.atleast_2d(pts)
        return 2.0 * pts[:, 0] + 3.0 * pts[:, 1]

    def phi4(pts, normals):
        pts = np.atleast_2d(pts)
        return -9.0 * pts[:, 1]

    return ProblemData(
        f_minus=f_minus,
        f_plus=f_plus,
        phi3=phi3,
        phi4=phi4,
        alpha_minus=alpha_minus,
        alpha_plus=alpha_plus,
        gamma=gamma,
        exact=None,
        label="example3",
    )


# backwards-friendly alias matching the operation name used in the docs
example3_problem = example3_data


def example4_solution() -> ExactSolution:
    """Polynomial solution vanishing (with its curl) on the boundary.

    Not divergence free: problems built on it carry a div_source so the
    divergence penalty stays consistent.
    """
    q = Polynomial([-1.0, 0.0, 1.0])  # t^2 - 1
    t = Polynomial([0.0, 1.0])
    u1 = SepField([(q**3, q**2 * t, 1.0)])   # (x^2-1)^3 (y^2-1)^2 y
    u2 = SepField([(q**2 * t, q**2, -1.0)])  # -(x^2-1)^2 x (y^2-1)^2
    return _solution_from_components(u1, u2, divergence_free=False)


def example4_problem(alpha_minus=1.0, alpha_plus=10.0, gamma=0.0) -> ProblemData:
    return _smooth_problem(
        example4_solution(), alpha_minus, alpha_plus, gamma, label="example4"
    )
