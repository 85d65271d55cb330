"""Study harness: refinement ladders, convergence/condition tables, output.

Drives the full pipeline (mesh, classification, cut rules, space, assembly,
solve, norms) over a list of refinements and formats the results as CSV,
markdown, or JSON.  Example 3 has no closed-form solution and is measured by
differencing solutions on nested meshes.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import LinearSystem, ProblemParams, assemble
from .element import ElementBasis
from .geometry import (
    Classification,
    InterfaceGeometry,
    Mesh,
    build_structured_mesh,
    classify_elements,
    levelset_circle,
    levelset_peanut,
    validate_assumptions,
)
from .manufactured import (
    ProblemData,
    example1_problem,
    example2_problem,
    example3_data,
    example4_problem,
)
from .norms import DiscreteField, compute_errors, self_convergence
from .quadrature import decompose_cut_element
from .solver import SolverError, estimate_condition, factorize_spd, solve
from .space import DofSpace, build_space

__all__ = [
    "StudyConfig",
    "StudyResult",
    "Discretization",
    "GeometryAssumptionError",
    "discretize",
    "solve_problem",
    "run_study",
    "problem_for_example",
    "interface_for_example",
]

ERROR_COLUMNS = (
    "n,h,dofs,e_l2,rate_l2,e_curl,rate_curl,e_curlcurl,rate_curlcurl,e_div,rate_div,seconds"
)
CONDITION_COLUMNS = "n,h,dofs,norm_A,rate_A,norm_Ainv,rate_Ainv,cond,rate_cond,seconds"


class GeometryAssumptionError(RuntimeError):
    pass


@dataclass
class StudyConfig:
    example: int | str = 1
    n_list: tuple = (10, 20)
    alpha_minus: float = 1.0
    alpha_plus: float = 1.0
    gamma: Optional[float] = None  # None -> example default
    lam: float = 100.0
    mode: str = "convergence"
    output_format: str = "csv"
    output_path: Optional[str] = None
    parallel: bool = False
    # programmatic hooks for example="custom"
    data: Optional[ProblemData] = None
    interface: Optional[InterfaceGeometry] = None

    def __post_init__(self):
        ns = tuple(int(n) for n in self.n_list)
        if len(ns) == 0:
            raise ValueError("refinement list must not be empty")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("refinement list must be strictly increasing")
        if self.mode not in ("convergence", "condition", "single-solve"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.output_format not in ("csv", "markdown", "json"):
            raise ValueError(f"unknown format {self.output_format!r}")
        if self.example not in (1, 2, 3, 4, "custom"):
            raise ValueError(f"unknown example {self.example!r}")
        if self._needs_nesting() and any(2 * a != b for a, b in zip(ns, ns[1:])):
            raise ValueError("self-convergence needs a doubling ladder")
        self.n_list = ns

    def _needs_nesting(self) -> bool:
        return self.example == 3 and self.mode == "convergence"

    def resolved_gamma(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return {1: 1.0, 2: 0.01, 3: 1.0, 4: 0.0}.get(self.example, 1.0)


@dataclass
class StudyResult:
    config: StudyConfig
    rows: list
    notes: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)

    def column_header(self) -> str:
        return CONDITION_COLUMNS if self.config.mode == "condition" else ERROR_COLUMNS


@dataclass
class Discretization:
    """Everything geometric/discrete that depends only on (n, interface)."""

    mesh: Mesh
    classification: Optional[Classification]
    cut_decompositions: Optional[dict]
    space: DofSpace
    basis: ElementBasis


def interface_for_example(example) -> Optional[InterfaceGeometry]:
    if example in (1, 3, 4):
        return levelset_circle(radius=np.pi / 6)
    if example == 2:
        return levelset_peanut()
    return None


def problem_for_example(config: StudyConfig) -> ProblemData:
    gamma = config.resolved_gamma()
    a_m, a_p = config.alpha_minus, config.alpha_plus
    if config.example == 1:
        return example1_problem(a_m, a_p, gamma)
    if config.example == 2:
        return example2_problem(a_m, a_p, gamma)
    if config.example == 3:
        return example3_data(gamma, a_m, a_p)
    if config.example == 4:
        return example4_problem(a_m, a_p, gamma)
    if config.data is None:
        raise ValueError("custom example requires explicit problem data")
    return config.data


def discretize(
    n: int,
    interface: Optional[InterfaceGeometry],
    validate: bool = True,
) -> Discretization:
    """Mesh, classification, cut rules, DOF space and basis tables for one n."""
    mesh = build_structured_mesh(n)
    if interface is None:
        space = build_space(mesh, None)
        return Discretization(mesh, None, None, space, ElementBasis(mesh))
    cls = classify_elements(mesh, interface)
    if validate:
        report = validate_assumptions(mesh, cls, interface)
        if not report.passed:
            raise GeometryAssumptionError(report.summary())
    decs = {
        int(el): decompose_cut_element(
            int(el),
            mesh.tri_vertices(int(el)),
            cls.vertex_phi[mesh.triangles[int(el)]],
            interface,
            mesh.h,
        )
        for el in cls.t_gamma
    }
    space = build_space(mesh, cls)
    return Discretization(mesh, cls, decs, space, ElementBasis(mesh))


def solve_problem(
    disc: Discretization, data: ProblemData, lam: float
) -> tuple[DiscreteField, LinearSystem]:
    params = ProblemParams(
        alpha_minus=data.alpha_minus,
        alpha_plus=data.alpha_plus,
        gamma=data.gamma,
        lam=lam,
        h=disc.mesh.h,
    )
    system = assemble(
        disc.mesh, disc.classification, disc.space, disc.cut_decompositions, params, data,
        basis=disc.basis,
    )
    report = solve(system.matrix, system.rhs)
    coeffs = disc.space.expand(report.coefficients)
    fld = DiscreteField(disc.mesh, disc.classification, disc.space, disc.basis, coeffs)
    return fld, system


def _rate(prev: float, cur: float) -> float:
    if prev <= 0 or cur <= 0:
        return math.nan
    return math.log2(prev / cur)


def _attach_rates(rows, keys):
    for i, row in enumerate(rows):
        for k in keys:
            row[f"rate_{k.split('e_')[-1] if k.startswith('e_') else k}"] = (
                _rate(rows[i - 1][k], row[k]) if i > 0 else math.nan
            )
    return rows


def _solve_one(args):
    config, n = args
    interface = config.interface if config.example == "custom" else interface_for_example(config.example)
    data = problem_for_example(config)
    t0 = time.perf_counter()
    disc = discretize(n, interface)
    fld, system = solve_problem(disc, data, config.lam)
    seconds = time.perf_counter() - t0
    return n, disc, fld, system, data, seconds


def run_study(config: StudyConfig) -> StudyResult:
    """Run the configured ladder and emit the requested table.

    Raises GeometryAssumptionError / SolverError for exit-code mapping in
    the command-line front end.
    """
    result = StudyResult(config=config, rows=[])
    if config.example == 4:
        result.notes.append(
            "example 4: the manufactured solution is not divergence-free; the "
            "right-hand side carries the matching h^-2 (div u, div v) source "
            "so the divergence penalty stays consistent."
        )

    if config.mode == "condition":
        _run_condition(config, result)
    elif config.example == 3 and config.mode == "convergence":
        _run_self_convergence(config, result)
    else:
        _run_direct(config, result)

    emit(result)
    return result


def _run_direct(config: StudyConfig, result: StudyResult):
    keys = ("e_l2", "e_curl", "e_curlcurl", "e_div")
    jobs = [(config, n) for n in config.n_list]
    if config.parallel and len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            solved = list(pool.map(_solve_one, jobs))
    else:
        solved = [_solve_one(j) for j in jobs]
    for n, disc, fld, system, data, seconds in solved:
        row = {"n": n, "h": disc.mesh.h, "dofs": disc.space.total_dofs, "seconds": seconds}
        if data.exact is not None:
            rep = compute_errors(fld, data.exact, disc.cut_decompositions)
            row.update(e_l2=rep.l2, e_curl=rep.curl, e_curlcurl=rep.curlcurl, e_div=rep.div)
        else:
            row.update(e_l2=math.nan, e_curl=math.nan, e_curlcurl=math.nan, e_div=math.nan)
        result.rows.append(row)
    _attach_rates(result.rows, keys)


def _run_self_convergence(config: StudyConfig, result: StudyResult):
    keys = ("e_l2", "e_curl", "e_curlcurl", "e_div")
    solved = {}
    jobs = [(config, n) for n in config.n_list]
    if config.parallel and len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            for n, disc, fld, system, data, seconds in pool.map(_solve_one, jobs):
                solved[n] = (disc, fld, seconds)
    else:
        for j in jobs:
            n, disc, fld, system, data, seconds = _solve_one(j)
            solved[n] = (disc, fld, seconds)
    for n_c, n_f in zip(config.n_list, config.n_list[1:]):
        disc_c, fld_c, sec_c = solved[n_c]
        disc_f, fld_f, sec_f = solved[n_f]
        rep = self_convergence(fld_c, fld_f, disc_f.cut_decompositions)
        result.rows.append(
            {
                "n": n_c,
                "h": disc_c.mesh.h,
                "dofs": disc_c.space.total_dofs,
                "e_l2": rep.l2,
                "e_curl": rep.curl,
                "e_curlcurl": rep.curlcurl,
                "e_div": rep.div,
                "seconds": sec_c + (sec_f if n_f == config.n_list[-1] else 0.0),
            }
        )
    _attach_rates(result.rows, keys)


def _run_condition(config: StudyConfig, result: StudyResult):
    interface = config.interface if config.example == "custom" else interface_for_example(config.example)
    data = problem_for_example(config)
    for n in config.n_list:
        t0 = time.perf_counter()
        disc = discretize(n, interface)
        params = ProblemParams(
            alpha_minus=data.alpha_minus,
            alpha_plus=data.alpha_plus,
            gamma=data.gamma,
            lam=config.lam,
            h=disc.mesh.h,
        )
        system = assemble(
            disc.mesh, disc.classification, disc.space, disc.cut_decompositions,
            params, data, basis=disc.basis,
        )
        lu = factorize_spd(system.matrix)
        rep = estimate_condition(system.matrix, lu=lu)
        result.rows.append(
            {
                "n": n,
                "h": disc.mesh.h,
                "dofs": disc.space.total_dofs,
                "norm_A": rep.norm_a,
                "norm_Ainv": rep.norm_ainv,
                "cond": rep.cond,
                "seconds": time.perf_counter() - t0,
            }
        )
    rows = result.rows
    for i, row in enumerate(rows):
        for k in ("norm_A", "norm_Ainv", "cond"):
            tag = {"norm_A": "rate_A", "norm_Ainv": "rate_Ainv", "cond": "rate_cond"}[k]
            row[tag] = -_rate(rows[i - 1][k], row[k]) if i > 0 else math.nan
    if len(rows) >= 2:
        lh = np.log([r["h"] for r in rows])
        for k in ("norm_A", "norm_Ainv", "cond"):
            lv = np.log([r[k] for r in rows])
            result.slopes[k] = float(np.polyfit(lh, lv, 1)[0])


# ---- output ---------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return f"{v:.6e}" if (abs(v) >= 1e4 or 0 < abs(v) < 1e-2) else f"{v:.6g}"
    return str(v)


def format_rows(result: StudyResult, fmt: str) -> str:
    cols = result.column_header().split(",")
    if fmt == "csv":
        lines = [",".join(cols)]
        for r in result.rows:
            lines.append(",".join(_fmt(r.get(c, math.nan)) for c in cols))
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        for r in result.rows:
            lines.append("| " + " | ".join(_fmt(r.get(c, math.nan)) for c in cols) + " |")
        if result.slopes:
            lines.append("")
            lines.append(
                "fitted log-log slopes vs h: "
                + ", ".join(f"{k}: {v:.3f}" for k, v in result.slopes.items())
            )
        for note in result.notes:
            lines.append(f"\n> {note}")
        return "\n".join(lines) + "\n"
    if fmt == "json":
        payload = {
            "config": {
                "example": result.config.example,
                "n_list": list(result.config.n_list),
                "alpha_minus": result.config.alpha_minus,
                "alpha_plus": result.config.alpha_plus,
                "gamma": result.config.resolved_gamma(),
                "lambda": result.config.lam,
                "mode": result.config.mode,
            },
            "columns": cols,
            "rows": [
                {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}
                for r in result.rows
            ],
            "slopes": result.slopes,
            "notes": result.notes,
        }
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(fmt)


def emit(result: StudyResult):
    text = format_rows(result, result.config.output_format)
    if result.config.output_path:
        with open(result.config.output_path, "w") as f:
            f.write(text)
    else:
        print(text, end="")
        for note in result.notes:
            if result.config.output_format == "csv":
                print(f"# {note}")
