"""Finite discretised doubling spaces: point clouds with a quasi-metric and mass.

Everything downstream (dyadic systems, weight characteristics, kernel
certificates) runs on a `SpaceModel`: point ids, strictly positive per-point
masses, and a symmetric distance table.  All suprema over radii are exact,
taken over per-center radius classes (the realized distances from that center
plus one radius beyond the diameter), which enumerates every distinct ball
including the whole-space ball.

Balls use the strict convention B(x, r) = {y : d(x, y) < r} throughout; no
closed-ball variant exists anywhere in the package.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError, SpaceValidationError

__all__ = [
    "SpaceModel",
    "SpaceProfile",
    "Ball",
    "quasi_triangle_constant",
    "doubling_profile",
    "ball",
    "volume",
    "set_distance",
    "load_space",
    "space_from_metric",
    "space_from_coords",
]


@dataclass(frozen=True)
class Ball:
    """A strict metric ball: members = {y : d(center, y) < radius}."""

    center: int
    radius: float
    members: np.ndarray        # sorted point indices
    measure: float

    def __contains__(self, idx: int) -> bool:
        return bool(np.isin(idx, self.members))

    def key(self) -> tuple:
        return tuple(int(i) for i in self.members)


@dataclass(frozen=True)
class SpaceProfile:
    """Structural constants of a space.

    A0      quasi-triangle constant (>= 1)
    C_mu    smallest doubling constant over all centers and radius classes
    Q       doubling order log2(C_mu)
    N_geo   greedy half-radius covering number
    degenerate  True when fewer than 3 points exist (no triple to measure A0)
    """

    A0: float
    C_mu: float
    Q: float
    N_geo: int
    degenerate: bool = False


@dataclass(frozen=True)
class SpaceModel:
    """Finite weighted point cloud with a symmetric quasi-metric.

    Arrays are treated as immutable after construction; validation raises
    `SpaceValidationError` naming the violated axiom.
    """

    mu: np.ndarray                      # (n,) positive masses
    dist: np.ndarray                    # (n, n) symmetric, zero diagonal
    point_ids: tuple = ()
    coords: np.ndarray | None = None    # optional embedding for kernel families

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        d = np.asarray(self.dist, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "dist", d)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or mu.shape != (d.shape[0],):
            raise SpaceValidationError("shape", f"mu {mu.shape}, dist {d.shape}")
        if not self.point_ids:
            object.__setattr__(self, "point_ids", tuple(range(d.shape[0])))
        if len(self.point_ids) != d.shape[0]:
            raise SpaceValidationError("shape", "point_ids length mismatch")
        if np.any(mu <= 0) or not np.all(np.isfinite(mu)):
            raise SpaceValidationError("positive-measure")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise SpaceValidationError("positive-off-diagonal", "negative or non-finite distance")
        if np.any(np.diag(d) != 0):
            raise SpaceValidationError("zero-diagonal")
        if not np.array_equal(d, d.T):
            raise SpaceValidationError("symmetry")
        n = d.shape[0]
        if n > 1:
            off = d + np.diag(np.full(n, np.inf))
            if np.any(off <= 0):
                raise SpaceValidationError(
                    "positive-off-diagonal", "distinct points at distance 0")
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.ndim == 1:
                c = c[:, None]
            if c.shape[0] != n:
                raise SpaceValidationError("shape", "coords length mismatch")
            object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.mu.sum())

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max())

    @cached_property
    def _row_order(self) -> np.ndarray:
        # per-center argsort of the distance row, used for ball volumes
        return np.argsort(self.dist, axis=1, kind="stable")

    @cached_property
    def _row_sorted(self) -> np.ndarray:
        return np.take_along_axis(self.dist, self._row_order, axis=1)

    @cached_property
    def _row_cummass(self) -> np.ndarray:
        # prefix masses in distance order: _row_cummass[x, j] = mass of the
        # j nearest points to x (in the sorted row order)
        m = self.mu[self._row_order]
        return np.cumsum(m, axis=1)

    def ball_measure(self, x: int, r: float) -> float:
        """Mass of the strict ball B(x, r); O(log n)."""
        if r <= 0:
            return 0.0
        j = int(np.searchsorted(self._row_sorted[x], r, side="left"))
        return float(self._row_cummass[x, j - 1]) if j > 0 else 0.0

    def ball_members(self, x: int, r: float) -> np.ndarray:
        return np.flatnonzero(self.dist[x] < r)

    def radius_classes(self, x: int) -> np.ndarray:
        """Representative radii enumerating every distinct ball centred at x.

        The realized distances t_1 < ... < t_m from x, plus 2*t_m for the
        whole-space ball.  B(x, t_k) = {d <= t_{k-1}} under the strict
        convention, so these m+1 radii hit each distinct member set once.
        """
        ds = np.unique(self.dist[x])
        ds = ds[ds > 0]
        if ds.size == 0:
            return np.array([1.0])
        return np.append(ds, 2.0 * ds[-1])

    @cached_property
    def profile(self) -> "SpaceProfile":
        return doubling_profile(self)

    @cached_property
    def distinct_balls(self) -> list[Ball]:
        """All distinct balls of the space, deduplicated by member set.

        The retained representative of each member set is the realization
        with the smallest radius (ties broken by center id).
        """
        seen: dict[tuple, Ball] = {}
        for x in range(self.n):
            for r in self.radius_classes(x):
                members = self.ball_members(x, r)
                key = tuple(int(i) for i in members)
                b = Ball(center=x, radius=float(r), members=members,
                         measure=float(self.mu[members].sum()))
                old = seen.get(key)
                if old is None or b.radius < old.radius:
                    seen[key] = b
        return sorted(seen.values(), key=lambda b: (b.members.size, b.key()))


def quasi_triangle_constant(space: SpaceModel) -> tuple[float, bool]:
    """Smallest A0 >= 1 with d(i,j) <= A0*(d(i,k) + d(k,j)) over all triples.

    Returns (A0, degenerate); degenerate is True when the space has fewer
    than 3 points so no triple constrains the constant.
    """
    n = space.n
    if n < 3:
        return 1.0, True
    d = space.dist
    best = 1.0
    # max over (i,j) of d(i,j) / min_k (d(i,k) + d(k,j)); including k in
    # {i, j} only adds ratio 1, which the clamp covers anyway
    for k in range(n):
        denom = d[:, k][:, None] + d[k, :][None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(denom > 0, d / denom, 1.0)
        best = max(best, float(ratio.max()))
    return best, False


def _greedy_half_cover(space: SpaceModel, x: int, r: float) -> int:
    """Number of balls of radius r/2 a greedy cover of B(x, r) needs."""
    members = space.ball_members(x, r)
    uncovered = np.zeros(space.n, dtype=bool)
    uncovered[members] = True
    count = 0
    while uncovered.any():
        y = int(np.flatnonzero(uncovered)[0])
        uncovered[space.dist[y] < r / 2.0] = False
        uncovered[y] = False   # covers itself even at tiny radius
        count += 1
    return count


def doubling_profile(space: SpaceModel) -> SpaceProfile:
    """Measure A0, the exact doubling constant C_mu, Q = log2(C_mu), N_geo.

    C_mu is the max of mu(B(x,2r))/mu(B(x,r)) over centers and realized
    radii; because the denominator ball is constant between consecutive
    realized distances while the numerator is nondecreasing in r, this max
    equals the supremum over all real r > 0.
    """
    a0, degenerate = quasi_triangle_constant(space)
    c_mu = 1.0
    n_geo = 1
    for x in range(space.n):
        ds = np.unique(space.dist[x])
        ds = ds[ds > 0]
        for r in ds:
            num = space.ball_measure(x, 2.0 * r)
            den = space.ball_measure(x, float(r))
            if den > 0:
                c_mu = max(c_mu, num / den)
        for r in space.radius_classes(x):
            n_geo = max(n_geo, _greedy_half_cover(space, x, float(r)))
    return SpaceProfile(A0=a0, C_mu=c_mu, Q=float(np.log2(c_mu)),
                        N_geo=n_geo, degenerate=degenerate)


def ball(space: SpaceModel, x: int, r: float) -> Ball:
    """The strict ball B(x, r) with its mass."""
    if r <= 0:
        raise DomainError("ball radius must be positive")
    members = space.ball_members(x, r)
    return Ball(center=x, radius=float(r), members=members,
                measure=float(space.mu[members].sum()))


def volume(space: SpaceModel, x: int, y: int) -> float:
    """mu(B(x, d(x,y))) for x != y, strict-ball convention."""
    if x == y:
        raise DomainError("volume is undefined on the diagonal")
    return space.ball_measure(x, float(space.dist[x, y]))


def volume_matrix(space: SpaceModel) -> np.ndarray:
    """V[x, y] = mu(B(x, d(x,y))) for all pairs; diagonal set to NaN."""
    n = space.n
    v = np.empty((n, n))
    for x in range(n):
        idx = np.searchsorted(space._row_sorted[x], space.dist[x], side="left")
        row = np.where(idx > 0, space._row_cummass[x, np.maximum(idx - 1, 0)], 0.0)
        v[x] = row
    np.fill_diagonal(v, np.nan)
    return v


def set_distance(space: SpaceModel, a: Sequence[int], b: Sequence[int]) -> float:
    """min over pairs of d; raises on empty input sets."""
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    if a.size == 0 or b.size == 0:
        raise DomainError("set_distance requires nonempty sets")
    return float(space.dist[np.ix_(a, b)].min())


# ---------------------------------------------------------------------------
# Space file format
# ---------------------------------------------------------------------------

def space_from_metric(metric, measure, point_ids=None, coords=None) -> SpaceModel:
    return SpaceModel(mu=np.asarray(measure, dtype=float),
                      dist=np.asarray(metric, dtype=float),
                      point_ids=tuple(point_ids) if point_ids else (),
                      coords=None if coords is None else np.asarray(coords, float))


def space_from_coords(coords, measure, metric_type="euclidean",
                      epsilon=0.0, point_ids=None) -> SpaceModel:
    """Build a space from an embedded cloud.

    metric_type "euclidean" gives the usual distance; "snowflake" applies
    d -> d^(1+epsilon), which makes the quasi-triangle constant exceed 1.
    """
    c = np.asarray(coords, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=2))
    if metric_type == "snowflake":
        if epsilon <= 0:
            raise SpaceValidationError("metric", "snowflake needs epsilon > 0")
        d = d ** (1.0 + epsilon)
    elif metric_type != "euclidean":
        raise SpaceValidationError("metric", f"unknown metric type {metric_type!r}")
    d = 0.5 * (d + d.T)   # kill rounding asymmetry
    np.fill_diagonal(d, 0.0)
    return SpaceModel(mu=np.asarray(measure, dtype=float), dist=d,
                      point_ids=tuple(point_ids) if point_ids else (), coords=c)


def load_space(path_or_dict) -> SpaceModel:
    """Load a space document (JSON file path or already-parsed dict).

    Required fields: `points`, `measure`, and either `metric_matrix` or
    `coords` with `metric: {type, epsilon}`.  Validation failures raise
    `SpaceValidationError` naming the violated axiom.
    """
    if isinstance(path_or_dict, dict):
        doc = path_or_dict
    else:
        with open(path_or_dict) as fh:
            doc = json.load(fh)
    for fieldname in ("points", "measure"):
        if fieldname not in doc:
            raise SpaceValidationError("schema", f"missing field {fieldname!r}")
    ids = list(doc["points"])
    measure = doc["measure"]
    if "metric_matrix" in doc:
        return space_from_metric(doc["metric_matrix"], measure, point_ids=ids,
                                 coords=doc.get("coords"))
    if "coords" in doc:
        metric = doc.get("metric", {"type": "euclidean"})
        return space_from_coords(doc["coords"], measure,
                                 metric_type=metric.get("type", "euclidean"),
                                 epsilon=float(metric.get("epsilon", 0.0)),
                                 point_ids=ids)
    raise SpaceValidationError("schema", "need metric_matrix or coords")


def space_to_dict(space: SpaceModel) -> dict:
    doc = {
        "points": list(space.point_ids),
        "measure": space.mu.tolist(),
        "metric_matrix": space.dist.tolist(),
    }
    if space.coords is not None:
        doc["coords"] = space.coords.tolist()
    return doc
