"""Accuracy-rewarding sub-losses and their positive-weighted total.

The expected squared loss against a sample reduces to its sufficient
statistics: E[(r_i - X^i)^2] = (r_i - mean(X^i))^2 + var(X^i).  The
variance term is constant in r_i, so every sub-loss here is written as a
function of (r_i, m_hat_i, v_hat_i).  Analytic moment vectors are the
special case v_hat = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    EmptySample,
    InfiniteWeightInSum,
    ZeroMomentBase,
)

ZERO_MOMENT_EPS = 1e-12


@dataclass(frozen=True)
class EmpiricalMoments:
    """Sample means and variances of X^i for i = 1..M."""

    m_hat: np.ndarray
    v_hat: np.ndarray
    n: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.m_hat, dtype=float)
        v = np.asarray(self.v_hat, dtype=float)
        if m.ndim != 1 or m.shape != v.shape:
            raise DomainError("m_hat and v_hat must be 1-D arrays of equal length")
        if np.any(v < 0):
            raise DomainError("v_hat entries must be nonnegative")
        object.__setattr__(self, "m_hat", m)
        object.__setattr__(self, "v_hat", v)

    @property
    def moment_order(self) -> int:
        return len(self.m_hat)


def empirical_moments(samples, M: int, provenance: dict | None = None) -> EmpiricalMoments:
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise EmptySample("cannot take moments of an empty sample")
    if M < 2:
        raise DomainError("moment order M must be at least 2")
    powers = np.stack([samples**i for i in range(1, M + 1)])
    return EmpiricalMoments(
        m_hat=powers.mean(axis=1),
        v_hat=powers.var(axis=1),
        n=int(samples.size),
        provenance=provenance or {},
    )


def analytic_moments(model, theta, perturb=None) -> EmpiricalMoments:
    """Exact model moments as an EmpiricalMoments with v_hat = 0.

    ``perturb`` optionally shifts the moment vector off the model image.
    """
    m = model.moments(theta)
    if perturb is not None:
        m = m + np.asarray(perturb, dtype=float).reshape(m.shape)
    prov = {
        "analytic": {
            "name": model.name,
            "fixed_params": list(model.fixed_params),
            "params": [float(t) for t in np.atleast_1d(theta)],
        }
    }
    if perturb is not None:
        prov["analytic"]["perturb"] = list(np.asarray(perturb, dtype=float))
    return EmpiricalMoments(m_hat=m, v_hat=np.zeros_like(m), n=0, provenance=prov)


# ---------------------------------------------------------------------------
# Sub-loss kinds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SquaredLoss:
    kind = "squared"

    def value(self, r, m, v):
        d = r - m
        return d * d + v

    def derivative(self, r, m):
        return 2.0 * (r - m)


@dataclass(frozen=True)
class AsymmetricSquaredLoss:
    """a-weighted square below the truth, b-weighted above; still minimized at it."""

    a: float
    b: float
    kind = "asymmetric_squared"

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise DomainError("asymmetric_squared: a and b must be positive")

    def value(self, r, m, v):
        d = r - m
        w = np.where(d < 0, self.a, self.b)
        return w * d * d + v

    def derivative(self, r, m):
        d = r - m
        return 2.0 * (self.a if d < 0 else self.b) * d


LossKind = SquaredLoss | AsymmetricSquaredLoss


def default_kinds(M: int) -> tuple[LossKind, ...]:
    return tuple(SquaredLoss() for _ in range(M))


def sub_loss(kind: LossKind, i: int, r_i: float, em: EmpiricalMoments) -> float:
    return float(kind.value(r_i, em.m_hat[i], em.v_hat[i]))


def sub_loss_vector(kinds, r, em: EmpiricalMoments) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.array([kinds[i].value(r[i], em.m_hat[i], em.v_hat[i]) for i in range(len(r))])


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightVector:
    """Extended-nonnegative weights c plus strictly positive base weights k.

    Effective weights are elementwise c / k.  At most one entry of c may be
    infinite (the optimizer turns it into an equality constraint); an
    all-zero c is rejected.
    """

    c: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        k = np.asarray(self.k, dtype=float)
        if c.ndim != 1 or c.shape != k.shape:
            raise DomainError("c and k must be 1-D arrays of equal length")
        if np.any(c < 0) or np.any(np.isnan(c)):
            raise DomainError("weights must lie in [0, +inf]")
        if np.all(c == 0):
            raise DomainError("all-zero weight vector rejected: the total loss would vanish")
        if np.count_nonzero(np.isinf(c)) > 1:
            raise DomainError("at most one weight may be infinite")
        if np.any(k <= 0) or np.any(~np.isfinite(k)):
            raise DomainError("base weights k must be finite and strictly positive")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "k", k)

    @classmethod
    def of(cls, c, k=None) -> "WeightVector":
        c = np.asarray(c, dtype=float)
        return cls(c=c, k=np.ones_like(c) if k is None else np.asarray(k, dtype=float))

    @property
    def effective(self) -> np.ndarray:
        return self.c / self.k

    @property
    def infinite_index(self) -> int | None:
        idx = np.flatnonzero(np.isinf(self.c))
        return int(idx[0]) if idx.size else None

    def with_entry(self, i: int, value: float) -> "WeightVector":
        c = self.c.copy()
        c[i] = value
        return WeightVector(c=c, k=self.k)


def total_loss(weights: WeightVector, r, em: EmpiricalMoments, kinds=None) -> float:
    """Sum of effective-weighted sub-losses; zero-weight terms contribute exactly 0."""
    if weights.infinite_index is not None:
        raise InfiniteWeightInSum(
            "total_loss is undefined with an infinite weight; "
            "the optimizer treats it as an equality constraint"
        )
    r = np.asarray(r, dtype=float)
    kinds = default_kinds(len(r)) if kinds is None else kinds
    eff = weights.effective
    out = 0.0
    for i in range(len(r)):
        if eff[i] == 0.0:
            continue
        out += eff[i] * kinds[i].value(r[i], em.m_hat[i], em.v_hat[i])
    return float(out)


def total_loss_grid(weights: WeightVector, r_matrix, em: EmpiricalMoments, kinds=None) -> np.ndarray:
    """Vectorized total loss over an (n, M) moment matrix (finite weights only)."""
    if weights.infinite_index is not None:
        raise InfiniteWeightInSum("grid evaluation needs finite weights")
    r_matrix = np.asarray(r_matrix, dtype=float)
    kinds = default_kinds(r_matrix.shape[1]) if kinds is None else kinds
    eff = weights.effective
    out = np.zeros(r_matrix.shape[0])
    for i in range(r_matrix.shape[1]):
        if eff[i] == 0.0:
            continue
        out += eff[i] * kinds[i].value(r_matrix[:, i], em.m_hat[i], em.v_hat[i])
    return out


def renormalize_base(em: EmpiricalMoments) -> np.ndarray:
    """Base weights k_i = m_hat_i^2, balancing sub-loss magnitudes."""
    if np.any(np.abs(em.m_hat) < ZERO_MOMENT_EPS):
        j = int(np.argmin(np.abs(em.m_hat)))
        raise ZeroMomentBase(f"m_hat[{j}] = {em.m_hat[j]} too small to square into a base weight")
    return em.m_hat**2


def resolve_base_weights(setting: str, em: EmpiricalMoments) -> np.ndarray:
    if setting == "ones":
        return np.ones(em.moment_order)
    if setting == "rhat_squared":
        return renormalize_base(em)
    raise DomainError(f"unknown base_weights setting {setting!r}")
