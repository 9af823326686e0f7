"""Mechanical checks of the monotonicity theory on concrete experiments.

Each check returns a CheckResult naming the property it verifies, a
verdict, and a witness for failures.  Covered properties:

* one-sided / orthant containment of the optimizer trajectory around the
  sample moment vector (condition A);
* monotonicity of the target property along the trajectory (condition B);
* the 2-D slope-sign classification of model curve vs link contour, which
  predicts whether the best weight is infinite, zero, or interior;
* strict monotonicity of fixed-coordinate slices of a 2-parameter moment
  surface (the premise the orthant result needs in three dimensions);
* near-linearity of 3-D trajectories (reported, not asserted);
* the log-coordinate hyperplane identity and skewness growth rate of the
  log-normal moment map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .distmodels import ParametricModel, model_curve_value
from .errors import DomainError, MixedCase, SliceEmpty, TooFewPoints
from .links import LinkFunction, contour_slope
from .sweep import SweepCurve

CONTAINMENT_SLACK = 1e-9
LINK_MONOTONE_FRACTION = 1e-3
LINEAR_RESIDUAL_PASS = 0.05


@dataclass
class CheckResult:
    name: str
    verdict: str                    # pass | fail | not_applicable
    details: dict = field(default_factory=dict)
    witness: dict | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


# ---------------------------------------------------------------------------
# Conditions A and B on sweep curves
# ---------------------------------------------------------------------------


def check_condition_A(curve: SweepCurve, m_hat) -> CheckResult:
    """Trajectory stays weakly on one side of every sample moment coordinate."""
    m_hat = np.asarray(m_hat, dtype=float)
    pts = curve.converged_points()
    if len(pts) < 2:
        return CheckResult("one_sided_containment", "not_applicable",
                           {"reason": "fewer than 2 converged points"})
    r = np.array([p.solution.r_star for p in pts])
    orthant = []
    for j in range(r.shape[1]):
        slack = CONTAINMENT_SLACK * (1.0 + abs(m_hat[j]))
        above = bool(np.all(r[:, j] >= m_hat[j] - slack))
        below = bool(np.all(r[:, j] <= m_hat[j] + slack))
        if above and below:
            orthant.append("eq")
        elif above:
            orthant.append("ge")
        elif below:
            orthant.append("le")
        else:
            k_lo = int(np.argmin(r[:, j]))
            k_hi = int(np.argmax(r[:, j]))
            return CheckResult(
                "one_sided_containment",
                "fail",
                {"coordinate": j, "m_hat_j": float(m_hat[j])},
                witness={
                    "below_at_c": pts[k_lo].c_value,
                    "r_min": float(r[k_lo, j]),
                    "above_at_c": pts[k_hi].c_value,
                    "r_max": float(r[k_hi, j]),
                },
            )
    return CheckResult("one_sided_containment", "pass", {"orthant": orthant})


def check_condition_B(curve: SweepCurve, link: LinkFunction) -> CheckResult:
    """Target property is monotone along the trajectory, ordered by the swept moment."""
    i = curve.spec.index
    pts = curve.converged_points()
    if len(pts) < 2:
        return CheckResult("link_monotone_along_trajectory", "not_applicable",
                           {"reason": "fewer than 2 converged points"})
    order = np.argsort([p.solution.r_star[i] for p in pts], kind="stable")
    gammas = np.array([pts[k].gamma for k in order])
    g_range = float(gammas.max() - gammas.min())
    tau = LINK_MONOTONE_FRACTION * g_range
    diffs = np.diff(gammas)
    rises = diffs > tau
    falls = diffs < -tau
    if rises.any() and falls.any():
        return CheckResult(
            "link_monotone_along_trajectory",
            "fail",
            {"gamma_range": g_range, "tolerance": tau},
            witness={"max_rise_at": int(np.argmax(diffs)), "max_fall_at": int(np.argmin(diffs)),
                     "diffs_min": float(diffs.min()), "diffs_max": float(diffs.max())},
        )
    direction = "increasing" if rises.any() else ("decreasing" if falls.any() else "constant")
    return CheckResult("link_monotone_along_trajectory", "pass",
                       {"direction": direction, "gamma_range": g_range})


# ---------------------------------------------------------------------------
# 2-D slope-sign classification
# ---------------------------------------------------------------------------


@dataclass
class CaseClassification:
    case: str                       # a | b | c | mixed
    interval: tuple[float, float]
    n_grid: int
    boundaries: list[float]
    diff_min: float                 # min / max of R'(r1) - T'(r1) over the grid
    diff_max: float
    per_point_cases: list[str] = field(default_factory=list)


def _point_case(rp: float, tp: float) -> str:
    if rp * tp < 0:
        return "c"
    if rp == tp:
        return "boundary"
    return "a" if rp < tp else "b"


def classify_2d_case(
    model: ParametricModel,
    link: LinkFunction,
    r1_interval: tuple[float, float],
    n_grid: int = 201,
) -> CaseClassification:
    """Compare model-curve slope R' with contour slope T' over an r1 grid.

    Same sign with R' < T' everywhere is case a (infinite weight best);
    R' > T' is case b (zero weight best); opposite signs is case c
    (interior best); a sign change in R' - T' yields ``mixed`` with the
    crossing located by bisection.
    """
    if model.theta_dim != 1:
        raise DomainError(f"{model.name}: 2-D classification needs a 1-parameter model")
    lo, hi = float(r1_interval[0]), float(r1_interval[1])
    if not lo < hi:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    grid = np.linspace(lo, hi, n_grid)

    def slopes(r1: float) -> tuple[float, float]:
        theta = model.theta_from_r1(r1)
        jac = model.moment_jacobian([theta])
        rp = float(jac[1, 0] / jac[0, 0])
        tp = contour_slope(link, (r1, model_curve_value(model, r1)))
        return rp, tp

    pairs = [slopes(r1) for r1 in grid]
    diffs = np.array([rp - tp for rp, tp in pairs])
    cases = [_point_case(rp, tp) for rp, tp in pairs]

    boundaries = [float(grid[k]) for k in range(len(grid)) if diffs[k] == 0.0]
    for k in range(len(grid) - 1):
        if diffs[k] * diffs[k + 1] < 0:
            boundaries.append(
                float(brentq(lambda r1: slopes(r1)[0] - slopes(r1)[1], grid[k], grid[k + 1]))
            )
    boundaries.sort()

    distinct = {c for c in cases if c != "boundary"}
    if len(distinct) == 1 and not boundaries:
        case = distinct.pop()
    else:
        case = "mixed"
    return CaseClassification(
        case=case,
        interval=(lo, hi),
        n_grid=n_grid,
        boundaries=boundaries,
        diff_min=float(diffs.min()),
        diff_max=float(diffs.max()),
        per_point_cases=cases,
    )


def predict_best_weight(case: str) -> str:
    """a -> infinity, b -> zero, c -> interior."""
    table = {"a": "infinity", "b": "zero", "c": "interior"}
    if case not in table:
        raise MixedCase(f"no single best-weight prediction for case {case!r}")
    return table[case]


# ---------------------------------------------------------------------------
# Higher-dimensional checks
# ---------------------------------------------------------------------------


def check_md_slice_premise(
    model: ParametricModel,
    axis_pair: tuple[int, int],
    fixed_values,
    n_grid: int = 101,
    free_interval: tuple[float, float] | None = None,
) -> CheckResult:
    """Fixed-coordinate slices of the moment surface are strictly monotone curves.

    For each fixed value of the remaining coordinate the slice is traced by
    solving the constraint along a grid of the model's free parameter, then
    r_j is checked to be strictly monotone in r_i.
    """
    if model.moment_order != 3 or model.theta_dim != 2:
        return CheckResult("slice_monotonicity", "not_applicable",
                           {"reason": "needs a 3-moment, 2-parameter model"})
    i, j = axis_pair
    (fixed_coord,) = set(range(3)) - {i, j}

    slices = []
    skipped = []
    for value in fixed_values:
        try:
            free_idx, build = model.eliminate_for_moment(fixed_coord, float(value))
        except Exception as exc:
            skipped.append({"fixed_value": float(value), "reason": str(exc)})
            continue
        lo, hi = free_interval if free_interval is not None else _default_free_interval(model, free_idx)
        pts = []
        for x in np.linspace(lo, hi, n_grid):
            try:
                theta = build(float(x))
                r = model.moments(theta)
            except Exception:
                continue
            pts.append((float(r[i]), float(r[j])))
        if len(pts) < 3:
            skipped.append({"fixed_value": float(value), "reason": "slice empty on the grid"})
            continue
        pts.sort()
        ri = np.array([p[0] for p in pts])
        rj = np.array([p[1] for p in pts])
        if np.any(np.diff(ri) <= 0):
            # Distinct grid points collapsing in r_i would break functionality.
            keep = np.concatenate([[True], np.diff(ri) > 0])
            ri, rj = ri[keep], rj[keep]
        drj = np.diff(rj)
        monotone = bool(np.all(drj > 0) or np.all(drj < 0))
        slices.append({"fixed_value": float(value), "n_points": len(ri), "monotone": monotone})
        if not monotone:
            k = int(np.argmax((drj[:-1] > 0) & (drj[1:] < 0))) if len(drj) > 1 else 0
            return CheckResult(
                "slice_monotonicity",
                "fail",
                {"axis_pair": [i, j], "fixed_coordinate": fixed_coord, "slices": slices},
                witness={"fixed_value": float(value), "turn_near_r_i": float(ri[k])},
            )
    if not slices:
        raise SliceEmpty(f"{model.name}: every requested slice was empty; skipped = {skipped}")
    return CheckResult(
        "slice_monotonicity",
        "pass",
        {"axis_pair": [i, j], "fixed_coordinate": fixed_coord,
         "slices": slices, "skipped": skipped},
    )


def _default_free_interval(model: ParametricModel, free_idx: int) -> tuple[float, float]:
    lo, hi = model.domain[free_idx]
    a = (lo + 1e-3) if lo is not None else -5.0
    b = min(hi - 1e-3, a + 10.0) if hi is not None else a + 10.0
    return a, b


def check_linear_trajectory(curve: SweepCurve) -> CheckResult:
    """Total-least-squares line fit to the 3-D trajectory; reported diagnostic."""
    pts = curve.converged_points()
    if len(pts) < 4:
        raise TooFewPoints(f"need at least 4 converged points, got {len(pts)}")
    r = np.array([p.solution.r_star for p in pts])
    if r.shape[1] != 3:
        return CheckResult("trajectory_linearity", "not_applicable",
                           {"reason": "needs 3 moments"})
    center = r.mean(axis=0)
    centered = r - center
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    direction = vt[0]
    residuals = centered - np.outer(centered @ direction, direction)
    max_orth = float(np.linalg.norm(residuals, axis=1).max())
    diameter = 0.0
    for a in range(len(r)):
        for b in range(a + 1, len(r)):
            diameter = max(diameter, float(np.linalg.norm(r[a] - r[b])))
    ratio = max_orth / diameter if diameter > 0 else 0.0
    verdict = "pass" if ratio < LINEAR_RESIDUAL_PASS else "fail"
    return CheckResult(
        "trajectory_linearity",
        verdict,
        {"residual_ratio": ratio, "max_orthogonal_distance": max_orth, "diameter": diameter},
    )


# ---------------------------------------------------------------------------
# Log-normal identities
# ---------------------------------------------------------------------------


def lognormal_log_map(theta) -> tuple[np.ndarray, float]:
    """Log-moment coordinates (x, y, z) of the log-normal map and |3x - 3y + z|.

    x = u + v2/2, y = 2u + 2*v2, z = 3u + 4.5*v2; the image lies on the
    hyperplane 3x - 3y + z = 0.
    """
    u, v2 = float(theta[0]), float(theta[1])
    if v2 < 0:
        raise DomainError(f"v2 = {v2} must be nonnegative")
    xyz = np.array([u + 0.5 * v2, 2.0 * u + 2.0 * v2, 3.0 * u + 4.5 * v2])
    residual = abs(3.0 * xyz[0] - 3.0 * xyz[1] + xyz[2])
    return xyz, float(residual)


def lognormal_skew_approx(v2: float) -> tuple[float, float, float]:
    """Exact log-normal skewness, its exponential approximation, and the gap.

    exact = (e^{v2} + 2) * sqrt(e^{v2} - 1), approx = e^{1.5 * v2}.  The
    approximation is only meaningful for large v2: the relative gap shrinks
    as v2 grows but blows up as v2 -> 0 (exact -> 0 while approx -> 1).
    """
    if v2 <= 0:
        raise DomainError(f"v2 = {v2} must be positive")
    ev = math.exp(v2)
    exact = (ev + 2.0) * math.sqrt(ev - 1.0)
    approx = math.exp(1.5 * v2)
    return exact, approx, abs(exact - approx) / exact
