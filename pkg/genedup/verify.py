"""Property suites behind ``genedup verify``.

Each suite returns a list of `CheckRow`s; a suite passes when every row
does. The lemma suite reports the two orderings of the third stability
inequality for information only, since on the curve each holds on part of
the range and fails near an end.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List

import numpy as np

from . import diffusion1d, sde, subfunc, watterson
from .numerics import central_diff, central_diff2
from .report_builder import ReportWriter, render_table
from .schemas import ExperimentConfig, SubfuncParams

logger = logging.getLogger(__name__)

CURVE_RATES = (1e-4, 1e-3, 1e-2)
RESIDUAL_TOL = 1e-10
FIRST_DERIV_TOL = 1e-6
SECOND_DERIV_TOL = 1e-4
INFO_ONLY = ("a1_x3_le_y3", "a1_x3_ge_y3")


@dataclass(frozen=True)
class CheckRow:
    suite: str
    name: str
    value: float
    limit: float
    passed: bool
    note: str = ""

    def as_row(self):
        return (self.suite, self.name, self.value, self.limit, self.passed, self.note)


def suite_lemmas(config: ExperimentConfig) -> List[CheckRow]:
    report = subfunc.verify_lemmas(SubfuncParams(b=config.b), config.grid)
    rows = []
    for item in report.checks:
        info = item.name in INFO_ONLY
        note = f"{len(item.violations)} of {item.points} points fail" if item.violations else ""
        rows.append(CheckRow("lemmas", item.name, item.min_margin, 0.0, True if info else item.holds, note))
    rows.append(
        CheckRow("lemmas", "symmetric_gap_ratio", report.symmetric_gap_ratio, 1.0, True, "ratio to leading order")
    )
    return rows


def suite_curve(config: ExperimentConfig) -> List[CheckRow]:
    rows = []
    for b in CURVE_RATES:
        p = SubfuncParams(b=b)
        worst = max(
            float(np.abs(subfunc.equilibrium_residuals(e)).max())
            for e in subfunc.equilibrium_curve(b).points(config.grid)
        )
        rows.append(CheckRow("curve", f"residual b={b:g}", worst, RESIDUAL_TOL, worst <= RESIDUAL_TOL))
        y3_0 = subfunc.curve_y3_of_x3(0.0, p)
        y3_gap = abs(y3_0 - p.alpha)
        rows.append(CheckRow("curve", f"y3(0) b={b:g}", y3_gap, 1e-14, y3_gap <= 1e-14))
        sym = subfunc.symmetric_point(p)
        gap = abs(sym.x3 - subfunc.symmetric_point_asymptotics(b).x3)
        rows.append(CheckRow("curve", f"symmetric x3 b={b:g}", gap, 10.0 * b, gap <= 10.0 * b))
    pts = watterson.curve_samples(config.mu, config.grid)
    product = float(np.abs(pts[:, 0] * pts[:, 1] - np.sqrt(config.mu)).max())
    rows.append(CheckRow("curve", f"xy=sqrt(mu) mu={config.mu:g}", product, 1e-12, product <= 1e-12))
    drift = 0.0
    for x, y in pts[1:-1]:
        once = watterson.project_w(watterson.WState(x, y), config.mu)
        drift = max(drift, abs(once.x_star - x), abs(once.y_star - y))
    rows.append(CheckRow("curve", "project_w idempotent", drift, 1e-10, drift <= 1e-10))
    return rows


def suite_rh(config: ExperimentConfig) -> List[CheckRow]:
    rows = []
    for b in CURVE_RATES:
        p = SubfuncParams(b=b)
        failed, worst, worst2 = 0, -np.inf, -np.inf
        for e in subfunc.equilibrium_curve(b).points(config.grid):
            rep = subfunc.routh_hurwitz(e, p)
            failed += not rep.stable
            worst = max(worst, rep.max_real)
            m2, _ = subfunc.reduced_matrices(e, p)
            worst2 = max(worst2, float(np.linalg.eigvals(m2).real.max()))
        rows.append(CheckRow("rh", f"conditions b={b:g}", failed, 0, failed == 0))
        rows.append(CheckRow("rh", f"max Re eig M b={b:g}", worst, 0.0, worst < 0.0))
        rows.append(CheckRow("rh", f"max Re eig M2 b={b:g}", worst2, 0.0, worst2 < 0.0))
    return rows


def _relative_gap(closed: np.ndarray, numeric: np.ndarray) -> float:
    # Floor keeps isolated zero crossings from dominating.
    floor = max(1e-3 * float(np.abs(closed).max()), 1e-300)
    return float((np.abs(closed - numeric) / np.maximum(np.abs(closed), floor)).max())


def _deriv_rows(name: str, points, f: Callable, f1: Callable, f2: Callable) -> List[CheckRow]:
    closed1 = np.array([f1(t) for t in points])
    closed2 = np.array([f2(t) for t in points])
    numeric1 = np.array([central_diff(f, t, 1e-5 * t) for t in points])
    numeric2 = np.array([central_diff2(f, t, 1e-3 * t) for t in points])
    gap1 = _relative_gap(closed1, numeric1)
    gap2 = _relative_gap(closed2, numeric2)
    return [
        CheckRow("ito", f"{name}'", gap1, FIRST_DERIV_TOL, gap1 <= FIRST_DERIV_TOL),
        CheckRow("ito", f"{name}''", gap2, SECOND_DERIV_TOL, gap2 <= SECOND_DERIV_TOL),
    ]


def suite_ito(config: ExperimentConfig) -> List[CheckRow]:
    mu = config.mu
    ratios = np.geomspace(0.05, 20.0, 25)
    rows = _deriv_rows(
        "g",
        ratios,
        lambda u: watterson.g_eval(u, mu),
        lambda u: watterson.g_prime(u, mu),
        lambda u: watterson.g_second(u, mu),
    )
    p = SubfuncParams(b=config.b)
    curve = subfunc.equilibrium_curve(p.b)

    def u_of(r):
        return float(curve.x3_of_ratio(r))

    rows += _deriv_rows(
        "u",
        ratios,
        u_of,
        lambda r: subfunc.projection_derivs(r, p)[1],
        lambda r: subfunc.projection_derivs(r, p)[2],
    )
    # v(q) is u evaluated at q = x3/y3 = 1/r.
    rows += _deriv_rows(
        "v",
        1.0 / ratios,
        u_of,
        lambda q: subfunc.projection_derivs(q, p)[1],
        lambda q: subfunc.projection_derivs(q, p)[2],
    )
    return rows


def suite_oracles(config: ExperimentConfig) -> List[CheckRow]:
    """Quadrature exit times against Euler-Maruyama estimates.

    The check widens the 95% interval to three standard errors.
    """
    cases = [
        diffusion1d.constant_diffusion(1.0),
        diffusion1d.tabulated(diffusion1d.watterson_diffusion(config.mu, config.variance_mode)),
        diffusion1d.tabulated(diffusion1d.subfunc_diffusion(config.b, config.variance_mode)),
    ]
    rows = []
    for i, d in enumerate(cases):
        predicted = diffusion1d.mean_exit_time(d, 0.0, check_refinement=False)
        est = sde.mc_exit_time_1d(d, 0.0, config.paths, config.dt, config.seed, run_index=i)
        tol = 3.0 / 1.96 * est.half_width
        gap = abs(est.mean - predicted)
        note = f"mc {est.mean:.6g} quad {predicted:.6g}"
        if est.censored:
            note += f", {est.censored} censored"
        rows.append(CheckRow("oracles", d.name, gap, tol, gap <= tol, note))
        logger.info("oracle %s: %s", d.name, note)
    return rows


SUITE_HANDLERS: Dict[str, Callable[[ExperimentConfig], List[CheckRow]]] = {
    "lemmas": suite_lemmas,
    "curve": suite_curve,
    "rh": suite_rh,
    "ito": suite_ito,
    "oracles": suite_oracles,
}


def cmd_verify(config: ExperimentConfig) -> Dict[str, Any]:
    """Run one suite, print its table and record it; `passed` drives the exit code."""
    rows = SUITE_HANDLERS[config.suite](config)
    out = ReportWriter(config.out, config.model_dump(), config.seed)
    header = ["suite", "check", "value", "limit", "passed", "note"]
    out.csv("verify.csv", header, [r.as_row() for r in rows])
    passed = all(r.passed for r in rows)
    summary = {"suite": config.suite, "checks": len(rows), "failed": sum(not r.passed for r in rows), "passed": passed}
    out.summary(summary)
    out.finish()
    print(render_table(header, [r.as_row() for r in rows], title=f"verify {config.suite}: {'PASS' if passed else 'FAIL'}"))
    return summary
