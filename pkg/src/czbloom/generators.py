"""Deterministic space, weight, and symbol generators for experiments."""
from __future__ import annotations

import numpy as np

from .errors import DomainError
from .space import SpaceModel, space_from_coords, space_from_metric

__all__ = ["generate_space", "generate_weight", "generate_symbol", "grid4"]


def generate_space(kind: str, size: int, seed: int = 0, **params) -> SpaceModel:
    """Build one of the named space families, reproducibly by seed.

    kinds: grid-1d, grid-2d, random-cloud, snowflake (1-d grid with the
    metric raised to 1+epsilon), tree (balanced binary tree, path metric),
    clustered (a few tight clusters far apart).  `mass` may be "uniform"
    (default) or "random" for log-uniform masses.
    """
    if size < 2:
        raise DomainError("generate_space needs size >= 2")
    rng = np.random.default_rng(seed)
    mass = params.get("mass", "uniform")
    mu = (np.exp(rng.uniform(np.log(0.25), np.log(4.0), size=size))
          if mass == "random" else np.ones(size))

    if kind == "grid-1d":
        coords = np.arange(size, dtype=float)
        return space_from_coords(coords, mu)
    if kind == "grid-2d":
        side = int(np.ceil(np.sqrt(size)))
        pts = np.array([(i, j) for i in range(side) for j in range(side)],
                       dtype=float)[:size]
        return space_from_coords(pts, mu)
    if kind == "random-cloud":
        dim = int(params.get("dim", 2))
        coords = rng.uniform(0.0, 10.0, size=(size, dim))
        return space_from_coords(coords, mu)
    if kind == "snowflake":
        eps = float(params.get("epsilon", 0.5))
        coords = np.arange(size, dtype=float)
        return space_from_coords(coords, mu, metric_type="snowflake", epsilon=eps)
    if kind == "tree":
        # balanced binary tree on `size` nodes, unit edge lengths
        d = np.zeros((size, size))
        for i in range(size):
            for j in range(i + 1, size):
                a, b, hops = i + 1, j + 1, 0
                while a != b:
                    if a > b:
                        a //= 2
                    else:
                        b //= 2
                    hops += 1
                d[i, j] = d[j, i] = hops
        return space_from_metric(d, mu)
    if kind == "clustered":
        k = int(params.get("clusters", 4))
        centers = rng.uniform(0.0, 1000.0, size=(k, 2))
        pts = centers[rng.integers(k, size=size)] + rng.uniform(-0.5, 0.5, size=(size, 2))
        return space_from_coords(pts, mu)
    if kind == "geometric-1d":
        # geometrically spaced line: every ball sees points at much larger
        # distances, so annulus searches rarely run out of room
        phi = float(params.get("ratio", 1.35))
        coords = phi ** np.arange(size, dtype=float)
        return space_from_coords(coords, mu)
    raise DomainError(f"unknown space kind {kind!r}")


def generate_weight(n: int, seed: int, sigma: float = 0.5) -> np.ndarray:
    """Log-uniform positive weight vector; sigma controls the spread."""
    rng = np.random.default_rng(seed)
    return np.exp(rng.normal(0.0, sigma, size=n))


def generate_symbol(n: int, seed: int, complex_valued: bool = False,
                    scale: float = 1.0) -> np.ndarray:
    """Random multiplier function, real by default."""
    rng = np.random.default_rng(seed)
    b = rng.normal(0.0, scale, size=n)
    if complex_valued:
        b = b + 1j * rng.normal(0.0, scale, size=n)
    return b


def grid4(mu=None) -> SpaceModel:
    """The 4-point unit grid used throughout the worked examples."""
    m = np.ones(4) if mu is None else np.asarray(mu, float)
    return space_from_coords(np.arange(4.0), m)
