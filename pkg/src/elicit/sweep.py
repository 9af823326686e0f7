"""One-weight sweeps: the estimated target property as a function of c_i.

A sweep fixes all weights but one, walks the remaining weight over a
log-spaced grid augmented with the exact endpoints {0, +inf}, minimizes the
total loss at every grid value, and records the target-property value at
each constrained optimum.  The curve is then classified for monotonicity
and for which endpoint (or interior weight) best matches the plug-in truth.

Grid points are solved cold first (optionally in parallel, capped by the
ELICIT_THREADS environment variable), then refined by one sequential
warm-started pass so the output is identical regardless of schedule.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ElicitError, EndpointMissing, TooFewPoints
from .links import LinkFunction, link_value
from .losses import EmpiricalMoments, WeightVector, default_kinds
from .optimize import OptimizerConfig, Solution, minimize

DEFAULT_GRID_POINTS = 41
DEFAULT_GRID_LO = 1e-3
DEFAULT_GRID_HI = 1e3

CONSTANT_RTOL = 1e-9
MONOTONE_RANGE_FRACTION = 1e-3


def default_grid(num_points: int = DEFAULT_GRID_POINTS,
                 lo: float = DEFAULT_GRID_LO,
                 hi: float = DEFAULT_GRID_HI) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), num_points)


@dataclass(frozen=True)
class SweepSpec:
    model: object
    link: LinkFunction
    em: EmpiricalMoments
    index: int                      # swept weight, 0-based
    fixed_c: np.ndarray             # full length-M vector; entry at index ignored
    k: np.ndarray                   # base weights
    grid: np.ndarray = field(default_factory=default_grid)
    kinds: tuple = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        M = self.em.moment_order
        if not 0 <= self.index < M:
            raise ElicitError(f"sweep index {self.index} out of range for M = {M}")
        grid = np.asarray(self.grid, dtype=float)
        if len(grid) and (np.any(grid <= 0) or np.any(np.diff(grid) <= 0)):
            raise ElicitError("sweep grid must be strictly increasing and positive")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "fixed_c", np.asarray(self.fixed_c, dtype=float))
        object.__setattr__(self, "k", np.asarray(self.k, dtype=float))
        if self.kinds is None:
            object.__setattr__(self, "kinds", default_kinds(M))

    def weights_at(self, c_value: float) -> WeightVector:
        c = self.fixed_c.copy()
        c[self.index] = c_value
        return WeightVector(c=c, k=self.k)


@dataclass
class SweepPoint:
    c_value: float
    solution: Solution | None
    gamma: float
    is_endpoint: bool
    error: str | None = None

    @property
    def converged(self) -> bool:
        return self.solution is not None and self.solution.converged


@dataclass
class MonotonicityVerdict:
    direction: str                  # increasing | decreasing | constant | non_monotone
    max_violation: float
    gamma_range: float


@dataclass
class BestWeight:
    kind: str                       # zero | infinity | interior
    c_star: float
    achieved_gap: float


@dataclass
class SweepCurve:
    spec: SweepSpec
    points: list[SweepPoint]
    gamma_hat: float
    monotonicity: MonotonicityVerdict | None = None
    best: BestWeight | None = None
    usable: bool = True

    def converged_points(self, include_endpoints: bool = True) -> list[SweepPoint]:
        return [
            p
            for p in self.points
            if p.converged and (include_endpoints or not p.is_endpoint)
        ]

    @property
    def failure_rate(self) -> float:
        return sum(not p.converged for p in self.points) / len(self.points)


def _solve_point(spec: SweepSpec, c_value: float, extra_starts=()) -> SweepPoint:
    is_endpoint = c_value == 0.0 or math.isinf(c_value)
    try:
        sol = minimize(
            spec.model,
            spec.weights_at(c_value),
            spec.em,
            kinds=spec.kinds,
            config=spec.optimizer,
            extra_starts=extra_starts,
        )
        gamma = link_value(spec.link, sol.r_star)
    except ElicitError as exc:
        return SweepPoint(c_value, None, math.nan, is_endpoint, error=str(exc))
    return SweepPoint(c_value, sol, gamma, is_endpoint)


def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("ELICIT_THREADS", "1")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def run_sweep(spec: SweepSpec, warm_start: bool = True, threads: int | None = None) -> SweepCurve:
    """Evaluate the sweep; classify monotonicity and the best weight."""
    values = [0.0, *spec.grid.tolist(), math.inf]
    n_threads = _thread_count(threads)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            points = list(pool.map(lambda v: _solve_point(spec, v), values))
    else:
        points = [_solve_point(spec, v) for v in values]

    if warm_start:
        prev: Solution | None = None
        for idx, point in enumerate(points):
            if prev is not None:
                rerun = _solve_point(spec, point.c_value, extra_starts=[prev.theta_star])
                if rerun.converged and (
                    not point.converged or rerun.solution.loss <= point.solution.loss
                ):
                    points[idx] = rerun
                    point = rerun
            if point.converged:
                prev = point.solution

    gamma_hat = link_value(spec.link, spec.em.m_hat)
    curve = SweepCurve(spec=spec, points=points, gamma_hat=gamma_hat)
    curve.usable = curve.failure_rate <= 0.2
    try:
        curve.monotonicity = classify_monotonicity(curve)
    except TooFewPoints:
        curve.monotonicity = None
    try:
        curve.best = best_weight(curve, evaluate=lambda c: _solve_point(spec, c).gamma)
    except EndpointMissing:
        curve.best = None
    return curve


def classify_monotonicity(curve: SweepCurve) -> MonotonicityVerdict:
    """Direction of the curve up to a tolerance scaled by its gamma range."""
    gammas = np.array([p.gamma for p in curve.converged_points()])
    if len(gammas) < 3:
        raise TooFewPoints(f"need at least 3 converged points, got {len(gammas)}")
    g_range = float(gammas.max() - gammas.min())
    if g_range < CONSTANT_RTOL * (1.0 + abs(float(gammas.mean()))):
        return MonotonicityVerdict("constant", 0.0, g_range)
    tau = MONOTONE_RANGE_FRACTION * g_range
    diffs = np.diff(gammas)
    rises = diffs > tau
    falls = diffs < -tau
    if rises.any() and falls.any():
        violation = min(float(diffs.max()), float(-diffs.min()))
        return MonotonicityVerdict("non_monotone", violation, g_range)
    if rises.any():
        return MonotonicityVerdict("increasing", max(0.0, float(-diffs.min())), g_range)
    if falls.any():
        return MonotonicityVerdict("decreasing", max(0.0, float(diffs.max())), g_range)
    return MonotonicityVerdict("constant", float(np.abs(diffs).max()), g_range)


def _golden_section(fn, lo: float, hi: float, iters: int = 40) -> float:
    """Golden-section minimum of fn over [lo, hi] in log-space."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(math.exp(c)), fn(math.exp(d))
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(math.exp(d))
        if b - a < 1e-3:
            break
    return math.exp(0.5 * (a + b))


def best_weight(curve: SweepCurve, evaluate=None) -> BestWeight:
    """Endpoint-ordering rule for the best weight.

    When the plug-in truth lies outside the closed interval spanned by the
    two endpoint values, the monotone curve's best weight is the endpoint
    nearer the truth; when it lies strictly inside, the best weight is an
    interior value, located on the grid and optionally refined by
    golden-section through ``evaluate(c) -> gamma``.
    """
    by_value = {p.c_value: p for p in curve.points if p.is_endpoint and p.converged}
    zero = by_value.get(0.0)
    inf = by_value.get(math.inf)
    if zero is None or inf is None:
        raise EndpointMissing("both endpoints must be present and converged")

    t0, t_inf, t_hat = zero.gamma, inf.gamma, curve.gamma_hat
    scale = 1.0 + max(abs(t0), abs(t_inf), abs(t_hat))
    tol = 1e-12 * scale
    lo, hi = min(t0, t_inf), max(t0, t_inf)

    if abs(t_hat - t0) <= tol and abs(t_hat - t_inf) <= tol:
        return BestWeight("interior", float(curve.spec.grid[len(curve.spec.grid) // 2]), 0.0)
    if t_hat <= lo + tol or t_hat >= hi - tol:
        if abs(t_inf - t_hat) < abs(t0 - t_hat):
            return BestWeight("infinity", math.inf, abs(t_inf - t_hat))
        return BestWeight("zero", 0.0, abs(t0 - t_hat))

    interior = [p for p in curve.converged_points() if not p.is_endpoint]
    if not interior:
        raise EndpointMissing("no converged interior points to locate an interior best weight")
    gaps = [abs(p.gamma - t_hat) for p in interior]
    i_best = int(np.argmin(gaps))
    c_star = interior[i_best].c_value
    gap = gaps[i_best]
    if evaluate is not None:
        c_lo = interior[i_best - 1].c_value if i_best > 0 else c_star / 100.0
        c_hi = interior[i_best + 1].c_value if i_best + 1 < len(interior) else c_star * 100.0
        c_ref = _golden_section(lambda c: abs(evaluate(c) - t_hat), c_lo, c_hi)
        gap_ref = abs(evaluate(c_ref) - t_hat)
        if math.isfinite(gap_ref) and gap_ref < gap:
            c_star, gap = c_ref, gap_ref
    return BestWeight("interior", float(c_star), float(gap))
