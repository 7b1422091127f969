"""Dyadic cube systems and sparse families on a finite space.

Construction is a single seeded farthest-point traversal: the insertion radii
of that order are nonincreasing, so every generation's net is a prefix of the
same order, which makes the nets nested and maximally separated at their
scale for free.  Cube membership is defined bottom-up from singleton leaves
through nearest-coarser-center parent links, so the partition and nesting
axioms hold by construction; the ball-sandwich and branching constants are
then measured a posteriori.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, DomainError
from .space import SpaceModel
from .weights import oscillation

__all__ = [
    "DyadicCube",
    "DyadicSystem",
    "SparseFamily",
    "AxiomReport",
    "SparseReport",
    "default_delta",
    "build_dyadic_system",
    "build_adjacent_systems",
    "verify_dyadic_axioms",
    "verify_sparse",
    "augment_sparse_family",
    "system_to_dict",
    "system_to_json",
]


@dataclass
class DyadicCube:
    k: int                      # generation (scale delta^k)
    center: int                 # center point index
    members: np.ndarray         # sorted point indices
    parent: tuple | None        # (gen_idx, cube_idx) in the system
    children: list = field(default_factory=list)

    @property
    def key(self) -> tuple:
        return (self.k, int(self.center))


@dataclass
class DyadicSystem:
    space: SpaceModel
    delta: float
    seed: int
    k_values: list              # generation scales, coarse to fine
    generations: list           # list of lists of DyadicCube
    fps_order: np.ndarray
    fps_radii: np.ndarray

    def cube(self, ref: tuple) -> DyadicCube:
        return self.generations[ref[0]][ref[1]]

    def all_cubes(self):
        for gi, gen in enumerate(self.generations):
            for ci, cube in enumerate(gen):
                yield (gi, ci), cube

    @property
    def n_cubes(self) -> int:
        return sum(len(g) for g in self.generations)

    def leaves(self):
        return self.generations[-1]

    def scale(self, gen_idx: int) -> float:
        return self.delta ** self.k_values[gen_idx]


@dataclass
class SparseFamily:
    """An eta-sparse subfamily of a dyadic system with explicit witnesses."""

    system: DyadicSystem
    eta: float
    cubes: list                 # list of (gen_idx, cube_idx)
    witnesses: dict             # ref -> np.ndarray of witness point indices

    def members(self, ref: tuple) -> np.ndarray:
        return self.system.cube(ref).members


@dataclass
class AxiomReport:
    passed: bool
    violations: list
    a_dy: float
    A_dy: float
    M: int
    C_mu0: float
    n_generations: int
    n_cubes: int

    def to_dict(self) -> dict:
        return {"passed": self.passed, "violations": self.violations,
                "a_dy": self.a_dy, "A_dy": self.A_dy, "M": self.M,
                "C_mu0": self.C_mu0, "n_generations": self.n_generations,
                "n_cubes": self.n_cubes}


@dataclass
class SparseReport:
    passed: bool
    worst_ratio: float
    max_overlap: int
    violations: list

    def to_dict(self) -> dict:
        return {"passed": self.passed, "worst_ratio": self.worst_ratio,
                "max_overlap": self.max_overlap, "violations": self.violations}


def default_delta(a0: float) -> float:
    """1/4 on metric spaces, 1/(8*A0^2) otherwise."""
    return 0.25 if a0 <= 1.0 else 1.0 / (8.0 * a0 * a0)


def _fps_order(space: SpaceModel, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Farthest-point traversal of all points from a seeded start.

    Returns (order, radii); radii[j] is the distance from order[j] to the
    previous prefix (inf for the start) and is nonincreasing.
    """
    n = space.n
    rng = np.random.default_rng(seed)
    start = int(rng.integers(n))
    order = np.empty(n, dtype=int)
    radii = np.empty(n)
    order[0], radii[0] = start, np.inf
    mind = space.dist[start].copy()
    selected = np.zeros(n, dtype=bool)
    selected[start] = True
    for j in range(1, n):
        masked = np.where(selected, -np.inf, mind)
        nxt = int(np.argmax(masked))     # first occurrence = smallest id tie-break
        order[j], radii[j] = nxt, masked[nxt]
        selected[nxt] = True
        mind = np.minimum(mind, space.dist[nxt])
    return order, radii


def _generation_range(space: SpaceModel, delta: float) -> list[int]:
    diam = space.diameter
    dmin = float(np.min(space.dist[space.dist > 0])) if space.n > 1 else 1.0
    if space.n == 1 or diam == 0.0:
        return [0]
    ln = math.log(delta)
    k_c = math.ceil(math.log(diam) / ln) - 1
    while delta ** k_c <= diam:
        k_c -= 1
    k_f = math.ceil(math.log(dmin) / ln)
    while delta ** k_f > dmin:
        k_f += 1
    return list(range(k_c, k_f + 1))


def build_dyadic_system(space: SpaceModel, delta: float, seed: int = 0) -> DyadicSystem:
    """Construct a dyadic system with scale ratio delta, deterministically.

    The coarsest generation is the single root (its scale exceeds the
    diameter); the finest has singleton cubes (its scale is at most the
    minimal positive distance).  Raises `ConstructionError` naming the
    violated axiom if the built system fails verification.
    """
    if not (0.0 < delta < 1.0):
        raise DomainError("delta must lie in (0, 1)")
    order, radii = _fps_order(space, seed)
    k_values = _generation_range(space, delta)
    d = space.dist

    # nets are prefixes: all points whose insertion radius is >= delta^k
    nets = []
    for k in k_values:
        cut = int(np.searchsorted(-radii, -(delta ** k), side="right"))
        nets.append(order[:max(cut, 1)])

    generations: list[list[DyadicCube]] = []
    # finest generation: singleton leaves, one per point (net == all points)
    for gi in range(len(k_values)):
        generations.append([])
    fin = len(k_values) - 1
    leaf_of_center = {}
    for ci, c in enumerate(sorted(int(x) for x in nets[fin])):
        generations[fin].append(DyadicCube(k=k_values[fin], center=c,
                                           members=np.array([c]), parent=None))
        leaf_of_center[c] = ci
    if len(generations[fin]) != space.n:
        raise ConstructionError("finest-generation", "finest net is not all points")

    # walk up: gen gi cubes indexed by net center; children assigned by
    # nearest coarser net center with smallest-id tie-break
    for gi in range(fin - 1, -1, -1):
        centers = np.array(sorted(int(x) for x in nets[gi]))
        cube_of_center = {int(c): i for i, c in enumerate(centers)}
        buckets: list[list] = [[] for _ in centers]
        for ci, child in enumerate(generations[gi + 1]):
            dd = d[child.center, centers]
            best = dd.min()
            cands = centers[dd == best]
            pc = int(cands.min())
            buckets[cube_of_center[pc]].append(ci)
        for i, c in enumerate(centers):
            kids = buckets[i]
            members = np.unique(np.concatenate(
                [generations[gi + 1][ci].members for ci in kids])) if kids else np.array([], int)
            cube = DyadicCube(k=k_values[gi], center=int(c), members=members,
                              parent=None, children=[(gi + 1, ci) for ci in kids])
            generations[gi].append(cube)
        for i in range(len(centers)):
            for (_, ci) in generations[gi][i].children:
                generations[gi + 1][ci].parent = (gi, i)

    system = DyadicSystem(space=space, delta=delta, seed=seed,
                          k_values=k_values, generations=generations,
                          fps_order=order, fps_radii=radii)
    report = verify_dyadic_axioms(system)
    if not report.passed:
        raise ConstructionError(report.violations[0]["axiom"],
                                f"seed={seed}, delta={delta}")
    return system


def build_adjacent_systems(space: SpaceModel, delta: float, count: int = 3,
                           seeds=None) -> list[DyadicSystem]:
    """`count` independently seeded systems playing the adjacent-grid role."""
    if count < 1:
        raise DomainError("count must be >= 1")
    if seeds is None:
        seeds = list(range(count))
    if len(seeds) != count:
        raise DomainError("seeds length must equal count")
    return [build_dyadic_system(space, delta, seed=s) for s in seeds]


def verify_dyadic_axioms(system: DyadicSystem) -> AxiomReport:
    """Check every structural axiom and measure the system's constants.

    Checks: per-generation partition, pairwise subset-or-disjoint nesting,
    unique coarser ancestor, ball sandwich (measured a_dy > 0, A_dy < inf),
    bounded branching (measured M), and the parent/child measure ratio
    C_mu0.  Violations are reported with witnesses, never raised.
    """
    space = system.space
    n = space.n
    violations = []

    for gi, gen in enumerate(system.generations):
        counts = np.zeros(n, dtype=int)
        for cube in gen:
            counts[cube.members] += 1
        if np.any(counts != 1):
            bad = int(np.flatnonzero(counts != 1)[0])
            violations.append({"axiom": "partition", "generation": system.k_values[gi],
                               "point": bad, "count": int(counts[bad])})

    refs = [ref for ref, _ in system.all_cubes()]
    masks = np.zeros((len(refs), n), dtype=bool)
    gen_of = np.empty(len(refs), dtype=int)
    for i, ref in enumerate(refs):
        masks[i, system.cube(ref).members] = True
        gen_of[i] = ref[0]
    sizes = masks.sum(axis=1)
    inter = masks.astype(np.int32) @ masks.astype(np.int32).T
    for i in range(len(refs)):
        for j in range(len(refs)):
            if gen_of[i] < gen_of[j]:     # i coarser, j finer
                if inter[i, j] not in (0, sizes[j]):
                    violations.append({"axiom": "nesting",
                                       "coarse": refs[i], "fine": refs[j]})
    # unique coarser ancestor
    for j in range(len(refs)):
        for gi in range(gen_of[j]):
            hosts = [i for i in range(len(refs))
                     if gen_of[i] == gi and inter[i, j] == sizes[j]]
            if len(hosts) != 1:
                violations.append({"axiom": "containment", "cube": refs[j],
                                   "coarser_generation": system.k_values[gi],
                                   "hosts": len(hosts)})

    a_dy, A_dy, M, c_mu0 = np.inf, 0.0, 0, 1.0
    for ref, cube in system.all_cubes():
        scale = system.scale(ref[0])
        dists = space.dist[cube.center, cube.members]
        A_dy = max(A_dy, float(dists.max()) / scale)
        outside = np.setdiff1d(np.arange(n), cube.members, assume_unique=False)
        if outside.size:
            a_dy = min(a_dy, float(space.dist[cube.center, outside].min()) / scale)
        M = max(M, len(cube.children))
        mu_q = float(space.mu[cube.members].sum())
        for ch in cube.children:
            mu_c = float(space.mu[system.cube(ch).members].sum())
            if mu_c > mu_q * (1 + 1e-12):
                violations.append({"axiom": "measure-monotone", "cube": ref})
            c_mu0 = max(c_mu0, mu_q / mu_c)
    A_dy *= 1.0 + 1e-9    # strict-ball containment needs a hair beyond the sup
    if not (a_dy > 0):
        violations.append({"axiom": "ball-sandwich", "detail": "a_dy not positive"})
    for ref, cube in system.all_cubes():
        scale = system.scale(ref[0])
        inner = space.ball_members(cube.center, a_dy * scale) if np.isfinite(a_dy) else cube.members
        if not np.all(np.isin(inner, cube.members)):
            violations.append({"axiom": "ball-sandwich", "cube": ref, "side": "inner"})
        outer = space.ball_members(cube.center, A_dy * scale)
        if not np.all(np.isin(cube.members, outer)):
            violations.append({"axiom": "ball-sandwich", "cube": ref, "side": "outer"})

    return AxiomReport(passed=not violations, violations=violations,
                       a_dy=float(a_dy), A_dy=float(A_dy), M=int(M),
                       C_mu0=float(c_mu0),
                       n_generations=len(system.generations),
                       n_cubes=system.n_cubes)


def verify_sparse(family: SparseFamily) -> tuple[bool, SparseReport]:
    """Check the witness-measure condition and measure the witness overlap."""
    space = family.system.space
    n = space.n
    violations = []
    worst = np.inf
    overlap = np.zeros(n, dtype=int)
    for ref in family.cubes:
        members = family.members(ref)
        wit = family.witnesses.get(ref)
        if wit is None:
            violations.append({"condition": "witness-missing", "cube": ref})
            continue
        if wit.size and not np.all(np.isin(wit, members)):
            violations.append({"condition": "witness-outside-cube", "cube": ref})
        mu_e = float(space.mu[wit].sum()) if wit.size else 0.0
        ratio = mu_e / float(space.mu[members].sum())
        worst = min(worst, ratio)
        if ratio < family.eta * (1 - 1e-12):
            violations.append({"condition": "measure", "cube": ref, "ratio": ratio})
        overlap[wit] += 1
    report = SparseReport(passed=not violations, worst_ratio=float(worst),
                          max_overlap=int(overlap.max()) if n else 0,
                          violations=violations)
    return report.passed, report


def _stopping_children(system: DyadicSystem, ref: tuple, b: np.ndarray) -> list:
    """Maximal strict descendants P of Q whose mean deviation from <b>_Q
    exceeds twice the mean oscillation of b over Q."""
    space = system.space
    cube = system.cube(ref)
    m = space.mu[cube.members]
    avg = (np.asarray(b)[cube.members] * m).sum() / m.sum()
    omega = float((np.abs(np.asarray(b)[cube.members] - avg) * m).sum() / m.sum())
    if omega <= 0.0:
        return []
    out = []
    stack = list(cube.children)
    while stack:
        pref = stack.pop()
        p = system.cube(pref)
        mp = space.mu[p.members]
        dev = float((np.abs(np.asarray(b)[p.members] - avg) * mp).sum() / mp.sum())
        if dev > 2.0 * omega:
            out.append(pref)
        else:
            stack.extend(p.children)
    return out


def augment_sparse_family(b, family: SparseFamily) -> tuple[SparseFamily, float]:
    """Close a sparse family under oscillation stopping times.

    Returns the enlarged family (sparseness parameter eta/(2*(eta+1)), with
    witnesses E_Q = Q minus its stopping children) together with the
    smallest constant C for which

        |b(x) - <b>_Q| <= C * sum over P in S~, P within Q, x in P of
                          Omega(b, P) * chi_P(x)

    holds at every point of every cube of the output family.
    """
    system = family.system
    space = system.space
    b = np.asarray(b)

    members_of = {}
    stopping_of = {}
    queue = list(family.cubes)
    selected = []
    seen = set()
    while queue:
        ref = queue.pop(0)
        if ref in seen:
            continue
        seen.add(ref)
        selected.append(ref)
        members_of[ref] = system.cube(ref).members
        stops = _stopping_children(system, ref, b)
        stopping_of[ref] = stops
        queue.extend(stops)
    selected.sort(key=lambda r: (r[0], r[1]))

    witnesses = {}
    for ref in selected:
        stop_pts = (np.unique(np.concatenate(
            [members_of.setdefault(s, system.cube(s).members) for s in stopping_of[ref]]))
            if stopping_of[ref] else np.array([], int))
        witnesses[ref] = np.setdiff1d(members_of[ref], stop_pts)

    eta_new = family.eta / (2.0 * (family.eta + 1.0))
    out = SparseFamily(system=system, eta=eta_new, cubes=selected,
                       witnesses=witnesses)

    omega = {ref: oscillation(b, space, members_of[ref]) for ref in selected}
    mask = {ref: np.isin(np.arange(space.n), members_of[ref]) for ref in selected}
    constant = 0.0
    for ref in selected:
        mem = members_of[ref]
        m = space.mu[mem]
        avg = (b[mem] * m).sum() / m.sum()
        lhs = np.abs(b[mem] - avg)
        rhs = np.zeros(space.n)
        for pref in selected:
            if mask[ref][members_of[pref]].all():      # P within Q
                rhs[members_of[pref]] += omega[pref]
        rhs = rhs[mem]
        nz = rhs > 0
        if np.any(lhs[~nz] > 1e-14 * max(1.0, float(np.abs(b).max()))):
            constant = np.inf
        if np.any(nz):
            constant = max(constant, float((lhs[nz] / rhs[nz]).max()))
    return out, constant


def all_cubes_family(system: DyadicSystem, eta: float = 1.0) -> SparseFamily:
    """The full cube family with the trivial witnesses E_Q = Q.

    On a finite space this is eta-sparse for any eta <= 1: the witnesses
    have full measure and their overlap is the generation count.
    """
    cubes = [ref for ref, _ in system.all_cubes()]
    wit = {ref: system.cube(ref).members for ref in cubes}
    return SparseFamily(system=system, eta=eta, cubes=cubes, witnesses=wit)


def root_family(system: DyadicSystem) -> SparseFamily:
    """The singleton family containing only the root cube."""
    ref = (0, 0)
    return SparseFamily(system=system, eta=1.0, cubes=[ref],
                        witnesses={ref: system.cube(ref).members})


def system_to_dict(system: DyadicSystem) -> dict:
    gens = []
    for gi, gen in enumerate(system.generations):
        cubes = []
        for cube in gen:
            cubes.append({"center": int(cube.center),
                          "members": [int(x) for x in cube.members],
                          "parent": list(cube.parent) if cube.parent else None})
        gens.append({"k": int(system.k_values[gi]), "cubes": cubes})
    return {"delta": system.delta, "seed": system.seed, "generations": gens}


def system_to_json(system: DyadicSystem) -> str:
    return json.dumps(system_to_dict(system), sort_keys=True, indent=1)
