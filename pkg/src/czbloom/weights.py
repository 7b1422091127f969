"""Muckenhoupt and Bloom weights, weighted norms, and oscillation functionals.

All ball suprema are exact: they enumerate the distinct balls of the space
(per-center radius classes), never a sample.  Characteristics are cached
per exponent on the `WeightProfile`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .space import Ball, SpaceModel

__all__ = [
    "WeightProfile",
    "BloomTuple",
    "ap_characteristic",
    "app_characteristic",
    "bloom_tuple",
    "weighted_lp_norm",
    "bmo_fractional_norm",
    "bmo_sparse_norm",
    "oscillation",
    "mean",
    "bloom_comparison_report",
    "BloomComparisonReport",
]


def _as_weight(w) -> np.ndarray:
    arr = w.values if isinstance(w, WeightProfile) else np.asarray(w, dtype=float)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise DomainError("weights must be strictly positive and finite")
    return arr


@dataclass
class WeightProfile:
    """A positive weight with cached characteristics.

    `ap_cache[p]` holds [w]_{A_p}; `app_cache[p]` holds the strong
    characteristic [w]_{A_{p,p}} = [w^p]_{A_p}^{1/p}.  Caches are write-once
    per exponent.
    """

    values: np.ndarray
    ap_cache: dict = field(default_factory=dict)
    app_cache: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = _as_weight(self.values)


def mean(f, space: SpaceModel, members: np.ndarray) -> complex | float:
    """mu-average of f over a point set."""
    m = space.mu[members]
    return (np.asarray(f)[members] * m).sum() / m.sum()


def oscillation(b, space: SpaceModel, members) -> float:
    """Mean oscillation (1/mu(P)) * integral over P of |b - <b>_P|."""
    members = np.asarray(members, dtype=int)
    if members.size == 0 or space.mu[members].sum() <= 0:
        raise DomainError("oscillation needs a set of positive mass")
    m = space.mu[members]
    bv = np.asarray(b)[members]
    avg = (bv * m).sum() / m.sum()
    return float((np.abs(bv - avg) * m).sum() / m.sum())


def ap_characteristic(w, space: SpaceModel, p: float) -> float:
    """[w]_{A_p}: exact sup over all distinct balls.

    The per-ball quantity is <w>_B * <w^{-1/(p-1)}>_B^{p-1}; always >= 1 by
    Hoelder.
    """
    if not (1.0 < p < np.inf):
        raise DomainError("A_p characteristic needs p in (1, inf)")
    wv = _as_weight(w)
    best = 1.0
    inv = wv ** (-1.0 / (p - 1.0))
    for b in space.distinct_balls:
        m = space.mu[b.members]
        tot = m.sum()
        val = (wv[b.members] * m).sum() * ((inv[b.members] * m).sum()) ** (p - 1.0) / tot ** p
        best = max(best, float(val))
    if isinstance(w, WeightProfile):
        w.ap_cache.setdefault(p, best)
    return best


def app_characteristic(lam, space: SpaceModel, p: float) -> float:
    """[lam]_{A_{p,p}} = [lam^p]_{A_p}^{1/p}."""
    lv = _as_weight(lam)
    val = ap_characteristic(lv ** p, space, p) ** (1.0 / p)
    if isinstance(lam, WeightProfile):
        lam.app_cache.setdefault(p, val)
    return val


@dataclass(frozen=True)
class BloomTuple:
    """The derived two-weight data for a pair of exponents 1 < p <= q < inf.

    nu = (lam1/lam2)^(1/(1/p+1/q')), alpha set by alpha/Q = 1/p - 1/q, and
    s = 2/(1+alpha/Q) is the exponent class nu lands in.
    """

    p: float
    q: float
    p_conj: float
    q_conj: float
    alpha: float
    Q: float
    s: float
    nu: np.ndarray

    @property
    def alpha_over_q(self) -> float:
        return self.alpha / self.Q


def bloom_tuple(lam1, lam2, p: float, q: float, Q: float) -> BloomTuple:
    """Assemble the Bloom weight and exponents from a weight pair."""
    if not (1.0 < p <= q < np.inf):
        raise DomainError("exponents must satisfy 1 < p <= q < inf")
    if Q <= 0:
        raise DomainError("doubling order Q must be positive")
    l1 = _as_weight(lam1)
    l2 = _as_weight(lam2)
    p_conj = p / (p - 1.0)
    q_conj = q / (q - 1.0)
    aq = 1.0 / p - 1.0 / q           # alpha / Q
    beta = 1.0 / (1.0 / p + 1.0 / q_conj)
    nu = (l1 / l2) ** beta
    s = 1.0 + (1.0 / p_conj + 1.0 / q) / (1.0 / p + 1.0 / q_conj)
    return BloomTuple(p=p, q=q, p_conj=p_conj, q_conj=q_conj,
                      alpha=aq * Q, Q=Q, s=s, nu=nu)


def weighted_lp_norm(f, w, space: SpaceModel, p: float) -> float:
    """(sum |f_i w_i|^p mu_i)^(1/p)."""
    if p < 1.0:
        raise DomainError("p must be >= 1")
    wv = _as_weight(w)
    fv = np.abs(np.asarray(f))
    return float(((fv * wv) ** p * space.mu).sum() ** (1.0 / p))


def bmo_fractional_norm(b, w, space: SpaceModel, alpha: float, Q: float
                        ) -> tuple[float, Ball | None]:
    """sup over balls of w(B)^(-alpha/Q) * (1/w(B)) * int_B |b - <b>_B| dmu.

    Returns (norm, maximising ball); the ball is None only on a space with
    no balls (impossible for n >= 1).  b may be complex.
    """
    wv = _as_weight(w)
    bv = np.asarray(b)
    aq = alpha / Q
    best, witness = 0.0, None
    for ballobj in space.distinct_balls:
        idx = ballobj.members
        m = space.mu[idx]
        wB = (wv[idx] * m).sum()
        avg = (bv[idx] * m).sum() / m.sum()
        osc = (np.abs(bv[idx] - avg) * m).sum()
        val = float(wB ** (-aq) * osc / wB)
        if val > best:
            best, witness = val, ballobj
    return best, witness


def bmo_sparse_norm(b, lam1, lam2, space: SpaceModel, p: float, q: float,
                    family) -> float:
    """sup over family cubes of the two-weight normalised oscillation.

    The normaliser is lam1^p(Q)^(1/p) * lam2^(-q')(Q)^(1/q').
    """
    l1 = _as_weight(lam1)
    l2 = _as_weight(lam2)
    bv = np.asarray(b)
    q_conj = q / (q - 1.0)
    best = 0.0
    for members in family:
        idx = np.asarray(members, dtype=int)
        m = space.mu[idx]
        avg = (bv[idx] * m).sum() / m.sum()
        osc = (np.abs(bv[idx] - avg) * m).sum()
        norm1 = ((l1[idx] ** p) * m).sum() ** (1.0 / p)
        norm2 = ((l2[idx] ** (-q_conj)) * m).sum() ** (1.0 / q_conj)
        best = max(best, float(osc / (norm1 * norm2)))
    return best


@dataclass
class BloomComparisonReport:
    """Per-ball two-sided comparison of the weight pair against nu.

    ratio(B) = lam1^p(B)^(1/p) lam2^(-q')(B)^(1/q') / nu(B)^(1+alpha/Q)
    must lie in [1, [lam1]_{A_{p,p}} [lam2]_{A_{q,q}}]; violating balls are
    listed rather than raised, and the nu in A_s membership check rides
    along.
    """

    p: float
    q: float
    s: float
    app_lam1: float
    aqq_lam2: float
    nu_as: float
    min_ratio: float
    max_ratio: float
    violations: list
    nu_as_bound_ok: bool
    tol: float

    @property
    def passed(self) -> bool:
        return not self.violations and self.nu_as_bound_ok

    def to_dict(self) -> dict:
        return {
            "p": self.p, "q": self.q, "s": self.s,
            "app_lam1": self.app_lam1, "aqq_lam2": self.aqq_lam2,
            "nu_as": self.nu_as, "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio, "violations": self.violations,
            "nu_as_bound_ok": self.nu_as_bound_ok, "tol": self.tol,
            "passed": self.passed,
        }


def bloom_comparison_report(lam1, lam2, space: SpaceModel, p: float, q: float,
                            Q: float, tol: float = 1e-9) -> BloomComparisonReport:
    """Check the two-sided per-ball comparison and the A_s membership bound.

    For every distinct ball the ratio above is tested against
    [1 - tol, [lam1][lam2] + tol], and [nu]_{A_s}^(1/p+1/q') is tested
    against [lam1][lam2] + tol.
    """
    tup = bloom_tuple(lam1, lam2, p, q, Q)
    l1 = _as_weight(lam1)
    l2 = _as_weight(lam2)
    a1 = app_characteristic(l1, space, p)
    a2 = app_characteristic(l2, space, q)
    upper = a1 * a2
    expo = 1.0 / p + 1.0 / tup.q_conj      # equals 1 + alpha/Q
    min_ratio, max_ratio = np.inf, -np.inf
    violations = []
    for b in space.distinct_balls:
        idx = b.members
        m = space.mu[idx]
        n1 = ((l1[idx] ** p) * m).sum() ** (1.0 / p)
        n2 = ((l2[idx] ** (-tup.q_conj)) * m).sum() ** (1.0 / tup.q_conj)
        nuB = (tup.nu[idx] * m).sum()
        ratio = float(n1 * n2 / nuB ** expo)
        min_ratio = min(min_ratio, ratio)
        max_ratio = max(max_ratio, ratio)
        if not (1.0 - tol <= ratio <= upper + tol):
            violations.append({"center": b.center, "radius": b.radius,
                               "ratio": ratio})
    nu_as = ap_characteristic(tup.nu, space, tup.s)
    nu_ok = nu_as ** expo <= upper + tol
    return BloomComparisonReport(p=p, q=q, s=tup.s, app_lam1=a1, aqq_lam2=a2,
                                 nu_as=nu_as, min_ratio=min_ratio,
                                 max_ratio=max_ratio, violations=violations,
                                 nu_as_bound_ok=nu_ok, tol=tol)
