"""Minimize the weighted total loss over a model's parameter domain.

Free coordinates are smoothly reparameterized (log above a lower bound,
logit inside an interval) so iterates stay strictly interior.  Two solvers
are provided: a Nelder-Mead simplex with relative stopping tolerances (the
default, run from a moment-matching start plus random multistarts) and a
plain gradient descent with backtracking line search, kept specifically to
reproduce its documented sensitivity to the starting point on
ill-conditioned problems.

An infinite weight on coordinate i is never summed into the objective; it
becomes the hard constraint r_i(theta) = m_hat_i, solved by inverting the
moment map (1-parameter models) or by eliminating one coordinate and
minimizing the remaining loss over the other (2-parameter models).

A brute-force meshgrid oracle provides an independent cross-check on the
iterative solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit

from .distmodels import ParametricModel, clamp_to_image
from .errors import DomainError, EmptyGrid, OutOfImage
from .losses import EmpiricalMoments, WeightVector, default_kinds, sub_loss_vector

CONSTRAINT_RTOL = 1e-9


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "nelder_mead"
    max_iters: int = 10000
    tol_loss: float = 1e-12
    tol_step: float = 1e-10
    multistart: int = 4
    init: str | tuple = "moment_match"
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("nelder_mead", "gradient_descent"):
            raise DomainError(f"unknown optimizer method {self.method!r}")
        if self.tol_loss <= 0 or self.tol_step <= 0:
            raise DomainError("tolerances must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if self.multistart < 0:
            raise DomainError("multistart count must be nonnegative")


@dataclass(frozen=True)
class Solution:
    theta_star: np.ndarray
    r_star: np.ndarray
    loss: float
    sub_losses: np.ndarray
    converged: bool
    n_iters: int
    start_used: np.ndarray
    clamped: bool = False


# ---------------------------------------------------------------------------
# Reparameterization: z (unconstrained) <-> theta (interior)
# ---------------------------------------------------------------------------

# Clip limits keep exp/expit strictly inside their open ranges in float64.
_LOG_CLIP = 700.0
_LOGIT_CLIP = 36.0


def _to_z(theta: np.ndarray, domain) -> np.ndarray:
    z = np.empty(len(theta))
    for j, (lo, hi) in enumerate(domain):
        x = theta[j]
        if lo is None and hi is None:
            z[j] = x
        elif hi is None:
            z[j] = math.log(x - lo)
        elif lo is None:
            z[j] = -math.log(hi - x)
        else:
            z[j] = logit((x - lo) / (hi - lo))
    return z


def _from_z(z: np.ndarray, domain) -> np.ndarray:
    theta = np.empty(len(z))
    for j, (lo, hi) in enumerate(domain):
        x = z[j]
        if lo is None and hi is None:
            theta[j] = x
        elif hi is None:
            theta[j] = lo + math.exp(min(max(x, -_LOG_CLIP), _LOG_CLIP))
        elif lo is None:
            theta[j] = hi - math.exp(min(max(-x, -_LOG_CLIP), _LOG_CLIP))
        else:
            theta[j] = lo + (hi - lo) * expit(min(max(x, -_LOGIT_CLIP), _LOGIT_CLIP))
    return theta


def _dtheta_dz(z: np.ndarray, domain) -> np.ndarray:
    d = np.empty(len(z))
    for j, (lo, hi) in enumerate(domain):
        x = z[j]
        if lo is None and hi is None:
            d[j] = 1.0
        elif hi is None:
            d[j] = math.exp(min(max(x, -_LOG_CLIP), _LOG_CLIP))
        elif lo is None:
            d[j] = math.exp(min(max(-x, -_LOG_CLIP), _LOG_CLIP))
        else:
            s = expit(min(max(x, -_LOGIT_CLIP), _LOGIT_CLIP))
            d[j] = (hi - lo) * s * (1.0 - s)
    return d


def interior_start(model: ParametricModel, theta) -> np.ndarray:
    """Pull a candidate start strictly inside the model domain."""
    theta = np.asarray(theta, dtype=float).reshape(model.theta_dim)
    out = theta.copy()
    for j, (lo, hi) in enumerate(model.domain):
        if lo is not None and hi is not None:
            pad = 1e-6 * (hi - lo)
            out[j] = min(max(out[j], lo + pad), hi - pad)
        elif lo is not None:
            out[j] = max(out[j], lo + 1e-6)
        elif hi is not None:
            out[j] = min(out[j], hi - 1e-6)
    return out


# ---------------------------------------------------------------------------
# Core solvers (operating on an unconstrained objective f(z))
# ---------------------------------------------------------------------------


def _nelder_mead(f, z0, max_iters, tol_loss, tol_step):
    """Standard simplex method; stops on relative loss spread and simplex size."""
    n = len(z0)
    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    step = np.where(np.abs(z0) > 1e-8, 0.1 * np.abs(z0), 0.1)
    simplex = [np.array(z0, dtype=float)]
    for j in range(n):
        v = simplex[0].copy()
        v[j] += step[j]
        simplex.append(v)
    simplex = np.array(simplex)
    values = np.array([f(v) for v in simplex])

    n_iters = 0
    converged = False
    for n_iters in range(1, max_iters + 1):
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        f_best, f_worst = values[0], values[-1]
        loss_ok = (f_worst - f_best) <= tol_loss * (1.0 + abs(f_best))
        size = np.max(np.abs(simplex[1:] - simplex[0]))
        step_ok = size <= tol_step * (1.0 + np.max(np.abs(simplex[0])))
        if loss_ok and step_ok:
            converged = True
            break

        centroid = simplex[:-1].mean(axis=0)
        reflected = centroid + alpha * (centroid - simplex[-1])
        f_r = f(reflected)
        if f_r < values[0]:
            expanded = centroid + gamma * (reflected - centroid)
            f_e = f(expanded)
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            if f_r < values[-1]:
                contracted = centroid + rho * (reflected - centroid)
            else:
                contracted = centroid + rho * (simplex[-1] - centroid)
            f_c = f(contracted)
            if f_c < min(f_r, values[-1]):
                simplex[-1], values[-1] = contracted, f_c
            else:
                for j in range(1, n + 1):
                    simplex[j] = simplex[0] + sigma * (simplex[j] - simplex[0])
                    values[j] = f(simplex[j])

    order = np.argsort(values, kind="stable")
    return simplex[order][0], float(values[order][0]), n_iters, converged


def _gradient_descent(f, grad, z0, max_iters, tol_loss, tol_step):
    """Steepest descent with Armijo backtracking; no safeguards by design."""
    z = np.array(z0, dtype=float)
    fz = f(z)
    n_iters = 0
    converged = False
    for n_iters in range(1, max_iters + 1):
        g = grad(z)
        gnorm2 = float(g @ g)
        if not np.isfinite(gnorm2) or gnorm2 == 0.0:
            converged = True
            break
        t = 1.0
        accepted = False
        for _ in range(60):
            z_new = z - t * g
            f_new = f(z_new)
            if np.isfinite(f_new) and f_new <= fz - 1e-4 * t * gnorm2:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = True  # no descent direction left at line-search resolution
            break
        step = np.max(np.abs(z_new - z))
        df = fz - f_new
        z, fz = z_new, f_new
        if df <= tol_loss * (1.0 + abs(fz)) and step <= tol_step * (1.0 + np.max(np.abs(z))):
            converged = True
            break
    return z, float(fz), n_iters, converged


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def moment_match_init(model: ParametricModel, em: EmpiricalMoments) -> np.ndarray:
    """An interior start matching the low-order sample moments where it can.

    One-parameter families invert the first moment (clamped into its image).
    The log-normal map is inverted in closed form; gamma2/beta2/loglogistic
    solve the first two moment equations, falling back to the domain center
    when the sample moments are infeasible for the family.
    """
    m = em.m_hat
    if model.theta_dim == 1:
        r1, _ = clamp_to_image(model, float(m[0]))
        return interior_start(model, [model.theta_from_r1(r1)])

    name = model.name
    try:
        if name == "lognormal":
            if m[0] <= 0 or m[1] <= 0:
                return model.domain_center()
            v2 = math.log(m[1]) - 2.0 * math.log(m[0])
            v2 = max(v2, 1e-6)
            u = 2.0 * math.log(m[0]) - 0.5 * math.log(m[1])
            # Keep u consistent with the clamped v2.
            u = math.log(m[0]) - 0.5 * v2
            return np.array([u, v2])
        if name == "gamma2":
            var = m[1] - m[0] ** 2
            if m[0] <= 0 or var <= 0:
                return model.domain_center()
            a = m[0] ** 2 / var
            b = var / m[0]
            return interior_start(model, [a, b])
        if name == "beta2":
            var = m[1] - m[0] ** 2
            if not 0 < m[0] < 1 or var <= 0 or var >= m[0] * (1 - m[0]):
                return model.domain_center()
            common = m[0] * (1 - m[0]) / var - 1.0
            return interior_start(model, [m[0] * common, (1 - m[0]) * common])
        if name == "loglogistic":
            # m2/m1^2 = tan(c)/c with c = pi/b; solvable on (1, tan(c_max)/c_max).
            ratio = m[1] / m[0] ** 2 if m[0] > 0 else 0.0
            b_lo = model.domain[1][0] + 1e-6
            c_max = math.pi / b_lo
            if not 1.0 < ratio < math.tan(c_max) / c_max:
                return model.domain_center()
            b = brentq(
                lambda b: math.tan(math.pi / b) / (math.pi / b) - ratio,
                b_lo,
                1e8,
                xtol=1e-12,
            )
            c = math.pi / b
            a = m[0] * math.sin(c) / c
            return interior_start(model, [a, b])
    except (ValueError, OverflowError):
        return model.domain_center()
    return model.domain_center()


def _multistart_offsets(config: OptimizerConfig, dim: int) -> np.ndarray:
    if config.multistart == 0:
        return np.empty((0, dim))
    rng = np.random.Generator(np.random.Philox(key=(int(config.seed) << 64) | 0x6D73))
    return rng.uniform(-2.0, 2.0, size=(config.multistart, dim))


def _resolve_init(model, weights, em, kinds, config) -> np.ndarray:
    if isinstance(config.init, str):
        if config.init == "moment_match":
            return moment_match_init(model, em)
        if config.init == "meshgrid_min":
            sol = meshgrid_oracle(
                model, weights, em, kinds, box=default_box(model, em), width=0.1
            )
            return interior_start(model, sol.theta_star)
        raise DomainError(f"unknown init setting {config.init!r}")
    return interior_start(model, np.asarray(config.init, dtype=float))


# ---------------------------------------------------------------------------
# minimize
# ---------------------------------------------------------------------------


def _finite_objective(model, weights, em, kinds, skip=()):
    """Objectives (theta space and z space) for the active finite-weight terms."""
    eff = weights.effective
    active = [
        i
        for i in range(len(eff))
        if i not in skip and np.isfinite(eff[i]) and eff[i] > 0.0
    ]
    m, v = em.m_hat, em.v_hat
    domain = model.domain

    def f_theta(theta):
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                r = model.moments(theta)
            except DomainError:
                return math.inf
            out = 0.0
            for i in active:
                out += eff[i] * kinds[i].value(r[i], m[i], v[i])
        return out if np.isfinite(out) else math.inf

    def f(z):
        return f_theta(_from_z(z, domain))

    def grad(z):
        theta = _from_z(z, domain)
        with np.errstate(over="ignore", invalid="ignore"):
            r = model.moments(theta)
            jac = model.moment_jacobian(theta)
            dl_dr = np.zeros(len(r))
            for i in active:
                dl_dr[i] = eff[i] * kinds[i].derivative(r[i], m[i])
            g = (dl_dr @ jac) * _dtheta_dz(z, domain)
        return g

    return f, f_theta, grad, active


def _run_solver(f, grad, z0, config):
    if config.method == "gradient_descent":
        return _gradient_descent(f, grad, z0, config.max_iters, config.tol_loss, config.tol_step)
    return _nelder_mead(f, z0, config.max_iters, config.tol_loss, config.tol_step)


def _best_of_starts(model, f, f_theta, grad, starts, config):
    """Run the solver from every start; pick (loss, lexicographic theta).

    Each raw start is itself a candidate, evaluated without the z round
    trip, so a start sitting exactly on the minimizer is returned bit-exact.
    """
    best = None
    total_iters = 0
    for start in starts:
        z0 = _to_z(start, model.domain)
        z, fz, iters, conv = _run_solver(f, grad, z0, config)
        total_iters += iters
        theta = _from_z(z, model.domain)
        for cand_theta, cand_f in ((theta, fz), (np.asarray(start), f_theta(start))):
            key = (cand_f, tuple(cand_theta))
            if best is None or key < best[0]:
                best = (key, cand_theta, cand_f, conv, start)
    _, theta, fz, conv, start_used = best
    return theta, fz, total_iters, conv, start_used


def _solve_constrained_1p(model, i, target):
    """theta with r_i(theta) = target for a 1-parameter model, clamping to the image."""
    clamped = False
    if i == 0:
        r1, clamped = clamp_to_image(model, target)
        return model.theta_from_r1(r1), clamped

    lo, hi = model.r1_image()

    def resid(theta):
        return model.moments([theta])[i] - target

    t_lo = interior_start(model, [model.theta_from_r1(lo + 1e-9 if math.isfinite(lo) else 1e-9)])[0]
    # Expand the upper bracket geometrically; moments are monotone in theta.
    if math.isfinite(hi):
        t_hi = model.theta_from_r1(hi - 1e-9 * max(1.0, abs(hi)))
    else:
        t_hi = max(1.0, 2.0 * abs(t_lo))
        for _ in range(200):
            if resid(t_hi) > 0:
                break
            t_hi *= 2.0
    r_lo, r_hi = resid(t_lo), resid(t_hi)
    if r_lo >= 0:
        return t_lo, True
    if r_hi <= 0:
        return t_hi, True
    theta = brentq(resid, t_lo, t_hi, xtol=1e-15, rtol=8.9e-16)
    return float(theta), clamped


def minimize(
    model: ParametricModel,
    weights: WeightVector,
    em: EmpiricalMoments,
    kinds=None,
    config: OptimizerConfig | None = None,
    extra_starts=(),
) -> Solution:
    """Best Solution over the configured starts (plus any extra warm starts)."""
    config = config or OptimizerConfig()
    kinds = default_kinds(em.moment_order) if kinds is None else kinds
    if len(weights.c) != em.moment_order:
        raise DomainError("weight vector length must match the moment order")

    inf_idx = weights.infinite_index
    if inf_idx is not None:
        return _minimize_constrained(model, inf_idx, weights, em, kinds, config, extra_starts)

    f, f_theta, grad, active = _finite_objective(model, weights, em, kinds)
    if not active:
        raise DomainError("no active sub-loss: all finite weights are zero")

    init = _resolve_init(model, weights, em, kinds, config)
    starts = [init]
    for off in _multistart_offsets(config, model.theta_dim):
        starts.append(_from_z(_to_z(init, model.domain) + off, model.domain))
    for s in extra_starts:
        starts.append(interior_start(model, s))

    theta, fz, iters, conv, start_used = _best_of_starts(model, f, f_theta, grad, starts, config)
    r_star = model.moments(theta)
    return Solution(
        theta_star=np.asarray(theta),
        r_star=r_star,
        loss=float(fz),
        sub_losses=sub_loss_vector(kinds, r_star, em),
        converged=conv,
        n_iters=iters,
        start_used=np.asarray(start_used),
    )


def _minimize_constrained(model, inf_idx, weights, em, kinds, config, extra_starts):
    target = float(em.m_hat[inf_idx])

    if model.theta_dim == 1:
        theta_c, clamped = _solve_constrained_1p(model, inf_idx, target)
        theta = np.array([theta_c])
        r_star = model.moments(theta)
        eff = weights.effective
        loss = 0.0
        for j in range(em.moment_order):
            if j == inf_idx or eff[j] == 0.0:
                continue
            loss += eff[j] * kinds[j].value(r_star[j], em.m_hat[j], em.v_hat[j])
        return Solution(
            theta_star=theta,
            r_star=r_star,
            loss=float(loss),
            sub_losses=sub_loss_vector(kinds, r_star, em),
            converged=True,
            n_iters=0,
            start_used=theta,
            clamped=clamped,
        )

    # Two-parameter models: eliminate one coordinate through the constraint
    # and minimize the remaining weighted loss over the free coordinate.
    free_idx, build = model.eliminate_for_moment(inf_idx, target)
    eff = weights.effective
    active = [
        j
        for j in range(em.moment_order)
        if j != inf_idx and np.isfinite(eff[j]) and eff[j] > 0.0
    ]
    free_domain = (model.domain[free_idx],)
    m, v = em.m_hat, em.v_hat

    def theta_of(x):
        try:
            theta = build(float(x))
        except (OutOfImage, ValueError, OverflowError):
            return None
        for j, (lo, hi) in enumerate(model.domain):
            if lo is not None and theta[j] <= lo:
                return None
            if hi is not None and theta[j] >= hi:
                return None
        return theta

    def f_x(x):
        theta = theta_of(x)
        if theta is None:
            return math.inf
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                r = model.moments(theta)
            except DomainError:
                return math.inf
            out = 0.0
            for j in active:
                out += eff[j] * kinds[j].value(r[j], m[j], v[j])
        return out if np.isfinite(out) else math.inf

    def f(z):
        return f_x(_from_z(z, free_domain)[0])

    def grad(z):  # finite difference; the constrained path is 1-D and cheap
        h = 1e-6 * (1.0 + abs(float(z[0])))
        return np.array([(f(z + h) - f(z - h)) / (2.0 * h)])

    init_full = _resolve_init(model, weights, em, kinds, replace(config, init="moment_match")
                              if config.init == "meshgrid_min" else config)
    starts = [np.array([init_full[free_idx]])]
    for off in _multistart_offsets(config, 1):
        starts.append(_from_z(_to_z(starts[0], free_domain) + off, free_domain))
    for s in extra_starts:
        s = np.asarray(s, dtype=float)
        if s.size == model.theta_dim:
            starts.append(np.array([s[free_idx]]))

    best = None
    total_iters = 0
    for start in starts:
        z0 = _to_z(start, free_domain)
        z, fz, iters, conv = _run_solver(f, grad, z0, config)
        total_iters += iters
        x0 = float(start[0])
        candidates = [(_from_z(z, free_domain)[0], fz), (x0, f_x(x0))]
        for x, fx in candidates:
            theta = theta_of(x)
            if theta is None:
                continue
            key = (fx, tuple(theta))
            if best is None or key < best[0]:
                best = (key, theta, fx, conv, start)
    if best is None:
        raise OutOfImage(
            f"{model.name}: constraint r_{inf_idx + 1} = {target} admits no interior solution"
        )
    _, theta, fz, conv, start_used = best
    r_star = model.moments(theta)
    resid = abs(r_star[inf_idx] - target)
    if resid > CONSTRAINT_RTOL * (1.0 + abs(target)):
        conv = False
    return Solution(
        theta_star=np.asarray(theta),
        r_star=r_star,
        loss=float(fz),
        sub_losses=sub_loss_vector(kinds, r_star, em),
        converged=conv,
        n_iters=total_iters,
        start_used=np.array([float(start_used[0])]),
    )


# ---------------------------------------------------------------------------
# Brute-force meshgrid oracle
# ---------------------------------------------------------------------------


def default_box(model: ParametricModel, em: EmpiricalMoments, half_width: float = 3.0):
    """Moment-matching start +/- half_width per coordinate, clipped to the domain."""
    center = moment_match_init(model, em)
    box = []
    for j, (lo, hi) in enumerate(model.domain):
        a = center[j] - half_width
        b = center[j] + half_width
        if lo is not None:
            a = max(a, lo + 1e-6)
        if hi is not None:
            b = min(b, hi - 1e-6)
        box.append((a, b))
    return box


def meshgrid_oracle(
    model: ParametricModel,
    weights: WeightVector,
    em: EmpiricalMoments,
    kinds=None,
    box=None,
    width: float = 0.1,
) -> Solution:
    """Exhaustive grid minimizer; ties broken by lexicographically smallest theta."""
    if width <= 0:
        raise DomainError("grid width must be positive")
    if weights.infinite_index is not None:
        raise DomainError("meshgrid oracle needs finite weights")
    kinds = default_kinds(em.moment_order) if kinds is None else kinds
    box = default_box(model, em) if box is None else box
    if len(box) != model.theta_dim:
        raise DomainError("box must give one (lo, hi) pair per parameter")

    axes = []
    for j, (lo, hi) in enumerate(box):
        if lo > hi:
            raise EmptyGrid(f"box coordinate {j}: lo = {lo} > hi = {hi}")
        if lo < hi and width > (hi - lo):
            raise EmptyGrid(
                f"box coordinate {j}: width {width} exceeds the box span {hi - lo}"
            )
        n_steps = int(math.floor((hi - lo) / width + 1e-12)) if hi > lo else 0
        axes.append(lo + width * np.arange(n_steps + 1))

    mesh = np.meshgrid(*axes, indexing="ij")
    thetas = np.column_stack([m.ravel() for m in mesh])
    with np.errstate(over="ignore", invalid="ignore"):
        r_matrix = model.moments_grid(thetas)
        eff = weights.effective
        losses = np.zeros(len(thetas))
        for i in range(em.moment_order):
            if eff[i] == 0.0:
                continue
            losses += eff[i] * kinds[i].value(r_matrix[:, i], em.m_hat[i], em.v_hat[i])
    losses = np.where(np.isfinite(losses), losses, math.inf)

    keys = tuple(thetas[:, j] for j in reversed(range(thetas.shape[1]))) + (losses,)
    idx = int(np.lexsort(keys)[0])
    theta = thetas[idx]
    r_star = r_matrix[idx]
    return Solution(
        theta_star=theta,
        r_star=r_star,
        loss=float(losses[idx]),
        sub_losses=sub_loss_vector(kinds, r_star, em),
        converged=True,
        n_iters=len(thetas),
        start_used=theta,
    )
