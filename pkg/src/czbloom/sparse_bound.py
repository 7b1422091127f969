"""Sparse operators and the commutator upper-bound verification pipeline.

The pointwise domination machinery builds several independently seeded
dyadic systems, closes the cubes meeting supp(f) under oscillation stopping
times, and measures the smallest constant dominating |[b,T]f| by the paired
sparse sums at every point.  The norm-level pipeline then compares the
commutator's weighted (p, q) ratio against the Bloom-weighted oscillation
norm of the symbol and evaluates the fractional sparse-form bound with the
stated characteristic powers, reporting its empirical sharpness.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import (
    DyadicSystem,
    SparseFamily,
    all_cubes_family,
    augment_sparse_family,
    build_adjacent_systems,
    build_dyadic_system,
    default_delta,
    root_family,
)
from .errors import CZBloomError, DomainError
from .operator import OperatorMatrix, commutator_apply, commutator_matrix, operator_norm
from .space import SpaceModel
from .weights import bloom_tuple, bmo_fractional_norm, weighted_lp_norm

__all__ = [
    "sparse_apply",
    "sparse_commutator_pair",
    "fractional_sparse_apply",
    "dominate_commutator",
    "DominationWitness",
    "verify_upper_bound",
    "UpperBoundReport",
    "standard_test_functions",
]


def _cube_stats(space: SpaceModel, members: np.ndarray, f: np.ndarray):
    m = space.mu[members]
    tot = m.sum()
    return m, tot, (f[members] * m).sum() / tot


def sparse_apply(family: SparseFamily, f) -> np.ndarray:
    """Sum over cubes of <f>_Q * chi_Q."""
    space = family.system.space
    f = np.asarray(f)
    out = np.zeros(space.n, dtype=complex if np.iscomplexobj(f) else float)
    for ref in family.cubes:
        members = family.members(ref)
        _, _, avg = _cube_stats(space, members, f)
        out[members] += avg
    return out


def sparse_commutator_pair(b, family: SparseFamily, f) -> tuple[np.ndarray, np.ndarray]:
    """The two commutator-shaped sparse sums, applied to |f|.

    First:  sum over Q of |b(x) - <b>_Q| <|f|>_Q chi_Q(x)
    Second: sum over Q of < |b - <b>_Q| |f| >_Q chi_Q(x)
    """
    space = family.system.space
    b = np.asarray(b)
    absf = np.abs(np.asarray(f))
    first = np.zeros(space.n)
    second = np.zeros(space.n)
    for ref in family.cubes:
        members = family.members(ref)
        m = space.mu[members]
        tot = m.sum()
        avg_b = (b[members] * m).sum() / tot
        avg_f = (absf[members] * m).sum() / tot
        first[members] += np.abs(b[members] - avg_b) * avg_f
        second[members] += (np.abs(b[members] - avg_b) * absf[members] * m).sum() / tot
    return first, second


def fractional_sparse_apply(lam1, lam2, p: float, q: float,
                            family: SparseFamily, f) -> np.ndarray:
    """Two-weight fractional sparse sum
    sum over P of lam1^p(P)^(1/p) lam2^(-q')(P)^(1/q') / mu(P) * <f>_P chi_P."""
    space = family.system.space
    l1 = np.asarray(lam1, float)
    l2 = np.asarray(lam2, float)
    q_conj = q / (q - 1.0)
    f = np.asarray(f)
    out = np.zeros(space.n, dtype=complex if np.iscomplexobj(f) else float)
    for ref in family.cubes:
        members = family.members(ref)
        m = space.mu[members]
        tot = m.sum()
        coef = (((l1[members] ** p) * m).sum() ** (1.0 / p)
                * ((l2[members] ** (-q_conj)) * m).sum() ** (1.0 / q_conj) / tot)
        out[members] += coef * (f[members] * m).sum() / tot
    return out


@dataclass
class DominationWitness:
    systems: list
    families: list                 # augmented sparse families, one per system
    C_dom: float
    pointwise_ratio: np.ndarray    # |[b,T]f| / rhs per point (0 where both vanish)
    failed_points: list            # points where rhs vanishes but lhs does not
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def passed(self) -> bool:
        return not self.failed_points and np.isfinite(self.C_dom)

    def to_dict(self) -> dict:
        return {"C_dom": self.C_dom, "passed": self.passed,
                "failed_points": self.failed_points,
                "n_systems": len(self.systems),
                "family_sizes": [len(f.cubes) for f in self.families],
                "pointwise_ratio": self.pointwise_ratio.tolist()}


def _support_family(system: DyadicSystem, support: np.ndarray) -> SparseFamily:
    """All cubes meeting the support, with trivial witnesses (eta = 1).

    The root is always present, which guarantees the domination's right side
    is positive wherever the left side is.
    """
    cubes = [ref for ref, cube in system.all_cubes()
             if np.intersect1d(cube.members, support).size > 0]
    wit = {ref: system.cube(ref).members for ref in cubes}
    return SparseFamily(system=system, eta=1.0, cubes=cubes, witnesses=wit)


def dominate_commutator(b, op: OperatorMatrix, f, count: int = 3, seeds=None,
                        delta: float | None = None) -> DominationWitness:
    """Measure the smallest pointwise domination constant for |[b,T]f|.

    Builds `count` adjacent dyadic systems, takes the cubes meeting supp(f)
    closed under oscillation stopping times, and returns the smallest C with
    |[b,T]f(x)| <= C * sum over systems of (first + second sparse sums) at
    every point.
    """
    space = op.space
    b = np.asarray(b)
    f = np.asarray(f)
    if delta is None:
        delta = default_delta(space.profile.A0)
    systems = build_adjacent_systems(space, delta, count=count, seeds=seeds)
    support = np.flatnonzero(np.abs(f) > 0)

    lhs = np.abs(commutator_apply(b, op, f))
    rhs = np.zeros(space.n)
    families = []
    for system in systems:
        base = (_support_family(system, support) if support.size
                else root_family(system))
        fam, _ = augment_sparse_family(b, base)
        families.append(fam)
        first, second = sparse_commutator_pair(b, fam, f)
        rhs += first + second

    scale = float(lhs.max()) if lhs.size else 0.0
    ratio = np.zeros(space.n)
    failed = []
    for x in range(space.n):
        if rhs[x] > 0:
            ratio[x] = lhs[x] / rhs[x]
        elif lhs[x] > 1e-13 * max(scale, 1.0):
            failed.append(int(x))
            ratio[x] = np.inf
    c_dom = float(ratio.max()) if space.n else 0.0
    return DominationWitness(systems=systems, families=families, C_dom=c_dom,
                             pointwise_ratio=ratio, failed_points=failed,
                             lhs=lhs, rhs=rhs)


def standard_test_functions(op: OperatorMatrix, b, p: float, q: float,
                            lam1, lam2, seed: int = 0,
                            system: DyadicSystem | None = None,
                            n_points: int = 3, n_random: int = 3) -> list:
    """The seeded test-function corpus: point masses, cube indicators,
    random sign vectors, and the ascent witness of the commutator."""
    space = op.space
    rng = np.random.default_rng(seed)
    n = space.n
    fs = []
    for idx in rng.choice(n, size=min(n_points, n), replace=False):
        e = np.zeros(n)
        e[idx] = 1.0
        fs.append(e)
    if system is not None:
        refs = [ref for ref, _ in system.all_cubes()]
        for i in rng.choice(len(refs), size=min(3, len(refs)), replace=False):
            z = np.zeros(n)
            z[system.cube(refs[i]).members] = 1.0
            fs.append(z)
    for _ in range(n_random):
        fs.append(rng.choice([-1.0, 1.0], size=n))
    cm = commutator_matrix(np.asarray(b), op)
    est = operator_norm(cm, p=p, lam1=lam1, q=q, lam2=lam2,
                        method="multistart-ascent", seed=seed,
                        starts=8, iterations=150)
    if est.witness is not None:
        fs.append(est.witness)
    return fs


@dataclass
class UpperBoundReport:
    bmo_norm: float
    app_lam1: float
    aqq_lam2: float
    rows: list = field(default_factory=list)
    max_ratio: float = 0.0
    intermediate_bound: float = 0.0
    max_intermediate_sharpness: float = 0.0
    intermediate_ok: bool = True
    constant_symbol: bool = False
    family_size: int = 0

    def to_dict(self) -> dict:
        return {"bmo_norm": self.bmo_norm, "app_lam1": self.app_lam1,
                "aqq_lam2": self.aqq_lam2, "rows": self.rows,
                "max_ratio": self.max_ratio,
                "intermediate_bound": self.intermediate_bound,
                "max_intermediate_sharpness": self.max_intermediate_sharpness,
                "intermediate_ok": self.intermediate_ok,
                "constant_symbol": self.constant_symbol,
                "family_size": self.family_size}


def verify_upper_bound(b, op: OperatorMatrix, p: float, q: float, lam1, lam2,
                       test_functions=None, seed: int = 0,
                       delta: float | None = None) -> UpperBoundReport:
    """Measure the commutator-to-oscillation norm ratio over a test corpus.

    For each test function f the row records
    R(f) = ||[b,T]f||_{q,lam2} / (||b||_{BMO} ||f||_{p,lam1}) against the
    Bloom-weighted oscillation norm of b, plus the fractional sparse-form
    value ||A(|f|; S~)||_{q,lam2} against the bound with characteristic
    powers p' and q.  A constant symbol short-circuits: the commutator must
    vanish, and all ratios are skipped.
    """
    space = op.space
    b = np.asarray(b)
    l1 = np.asarray(lam1, float)
    l2 = np.asarray(lam2, float)
    profile = space.profile
    tup = bloom_tuple(l1, l2, p, q, profile.Q if profile.Q > 0 else 1.0)
    bmo, _ = bmo_fractional_norm(b, tup.nu, space, tup.alpha, tup.Q)

    from .weights import app_characteristic
    a1 = app_characteristic(l1, space, p)
    a2 = app_characteristic(l2, space, q)

    if delta is None:
        delta = default_delta(profile.A0)
    system = build_dyadic_system(space, delta, seed=seed)
    family, _ = augment_sparse_family(b, root_family(system))

    if test_functions is None:
        test_functions = standard_test_functions(op, b, p, q, l1, l2,
                                                 seed=seed, system=system)

    report = UpperBoundReport(bmo_norm=bmo, app_lam1=a1, aqq_lam2=a2,
                              family_size=len(family.cubes))
    p_conj = p / (p - 1.0)
    report.intermediate_bound = a1 ** p_conj * a2 ** q

    if bmo == 0.0:
        report.constant_symbol = True
        for f in test_functions:
            out = commutator_apply(b, op, f)
            norm_out = np.abs(out).max()
            scale = np.abs(b).max() * (np.abs(np.asarray(f)).max() + 1.0) + 1.0
            if norm_out > 1e-10 * scale:
                raise CZBloomError(
                    "constant symbol produced a nonzero commutator: operator bug")
        return report

    for f in test_functions:
        f = np.asarray(f)
        fnorm = weighted_lp_norm(f, l1, space, p)
        if fnorm == 0.0:
            continue
        cnorm = weighted_lp_norm(commutator_apply(b, op, f), l2, space, q)
        ratio = cnorm / (bmo * fnorm)
        a_val = fractional_sparse_apply(l1, l2, p, q, family, np.abs(f))
        lhs = weighted_lp_norm(a_val, l2, space, q)
        sharp = lhs / (report.intermediate_bound * fnorm)
        report.rows.append({"ratio": float(ratio), "cnorm": float(cnorm),
                            "fnorm": float(fnorm),
                            "sparse_lhs": float(lhs),
                            "sparse_sharpness": float(sharp)})
        report.max_ratio = max(report.max_ratio, float(ratio))
        report.max_intermediate_sharpness = max(
            report.max_intermediate_sharpness, float(sharp))
    report.intermediate_ok = report.max_intermediate_sharpness <= 1.0 + 1e-9
    return report
