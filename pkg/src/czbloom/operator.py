"""Discrete singular integral operators, commutators, and norm estimation.

An `OperatorMatrix` stores diag-zeroed kernel values; applying it computes
(Tf)(x) = sum over y != x of K(x,y) f(y) mu(y).  The transpose identity
<Tf, g> = <f, T*g> with the bilinear pairing <u, v> = sum u v mu is exact up
to rounding by construction.

Weighted (p, q) operator norms come in three flavours:

  svd-exact         p = q = 2 only: largest singular value of the
                    diagonally reweighted matrix (exact)
  brute-oracle      n <= 6: dense angular-grid sphere search plus ascent
                    polish; returns a bracket [best found, crude certified]
  multistart-ascent seeded projected gradient ascent; lower bound only
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, DomainError
from .kernels import KernelSpec, kernel_matrix
from .space import SpaceModel
from .weights import weighted_lp_norm

__all__ = [
    "OperatorMatrix",
    "NormEstimate",
    "operator_from_kernel",
    "commutator_matrix",
    "apply",
    "adjoint_apply",
    "commutator_apply",
    "pairing",
    "operator_norm",
]


@dataclass
class OperatorMatrix:
    """Kernel values with a zeroed diagonal plus the ambient space."""

    kernel_values: np.ndarray
    space: SpaceModel
    spec: KernelSpec | None = None

    @property
    def entries(self) -> np.ndarray:
        """M[x, y] = K(x, y) mu(y); the matrix whose matvec is T."""
        return self.kernel_values * self.space.mu[None, :]

    @property
    def adjoint(self) -> "OperatorMatrix":
        return OperatorMatrix(kernel_values=self.kernel_values.T.copy(),
                              space=self.space, spec=None)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.kernel_values)


def operator_from_kernel(spec: KernelSpec, space: SpaceModel) -> OperatorMatrix:
    k = kernel_matrix(spec, space).copy()
    np.fill_diagonal(k, 0.0)
    return OperatorMatrix(kernel_values=k, space=space, spec=spec)


def commutator_matrix(b, op: OperatorMatrix) -> OperatorMatrix:
    """[b, T] as an operator: kernel (b(x) - b(y)) K(x, y)."""
    b = np.asarray(b)
    k = (b[:, None] - b[None, :]) * op.kernel_values
    return OperatorMatrix(kernel_values=k, space=op.space, spec=None)


def apply(op: OperatorMatrix, f) -> np.ndarray:
    return op.entries @ np.asarray(f)


def adjoint_apply(op: OperatorMatrix, g) -> np.ndarray:
    """(T*g)(y) = sum over x of K(x, y) g(x) mu(x)."""
    return op.adjoint.entries @ np.asarray(g)


def commutator_apply(b, op: OperatorMatrix, f) -> np.ndarray:
    b = np.asarray(b)
    f = np.asarray(f)
    return b * apply(op, f) - apply(op, b * f)


def pairing(u, v, space: SpaceModel):
    """Bilinear pairing <u, v> = sum u_i v_i mu_i (no conjugation)."""
    return (np.asarray(u) * np.asarray(v) * space.mu).sum()


@dataclass
class NormEstimate:
    lower: float
    upper: float | None
    method: str
    p: float
    q: float
    witness: np.ndarray | None = None
    hyperparams: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "method": self.method,
                "p": self.p, "q": self.q,
                "witness": None if self.witness is None else
                [[float(np.real(z)), float(np.imag(z))] for z in self.witness],
                "hyperparams": self.hyperparams}


def _objective(mat: np.ndarray, f: np.ndarray, space: SpaceModel,
               q: float, lam2: np.ndarray) -> float:
    g = mat @ f
    return float(((np.abs(g) * lam2) ** q * space.mu).sum() ** (1.0 / q))


def _normalize(f: np.ndarray, space: SpaceModel, p: float, lam1: np.ndarray):
    nrm = ((np.abs(f) * lam1) ** p * space.mu).sum() ** (1.0 / p)
    if nrm == 0:
        return None
    return f / nrm


def _dual_gradient(mat_h: np.ndarray, g: np.ndarray, space: SpaceModel,
                   q: float, lam2: np.ndarray) -> np.ndarray:
    """M^H applied to the subgradient of ||.||_{q,lam2} at g (unnormalised)."""
    absg = np.abs(g)
    if np.iscomplexobj(g):
        w = space.mu * lam2 ** q * np.where(absg > 0, absg ** (q - 2), 0.0) * g
    else:
        w = space.mu * lam2 ** q * np.where(absg > 0, absg ** (q - 1), 0.0) * np.sign(g)
    return mat_h @ w


def _ascend(mat: np.ndarray, f0: np.ndarray, space: SpaceModel, p: float,
            lam1: np.ndarray, q: float, lam2: np.ndarray,
            iterations: int) -> tuple[float, np.ndarray]:
    """Maximise ||Mf||_{q,lam2} on the lam1-p unit sphere from a given start.

    Each iteration first tries the nonlinear power-type fixed point
    f <- dual_p(M^H dual_q(M f)) (for p = q = 2 this is exact power
    iteration); when that fails to improve, it falls back to a projected
    gradient step with halving on non-improvement.
    """
    f = _normalize(f0.astype(complex if np.iscomplexobj(mat) else float),
                   space, p, lam1)
    if f is None:
        return 0.0, f0
    best = _objective(mat, f, space, q, lam2)
    step = 0.5
    mh = mat.conj().T
    stall = 0
    for _ in range(iterations):
        g = mat @ f
        u = _dual_gradient(mh, g, space, q, lam2)
        if not np.isfinite(np.abs(u)).all() or np.abs(u).max() == 0:
            break
        improved = False
        if p > 1.0:
            # inverse duality map of the lam1-weighted p-norm
            absu = np.abs(u)
            mag = (absu / (space.mu * lam1 ** p)) ** (1.0 / (p - 1.0))
            phase = np.where(absu > 0, u / np.where(absu > 0, absu, 1.0), 0.0)
            cand = _normalize(phase * mag, space, p, lam1)
            if cand is not None:
                val = _objective(mat, cand, space, q, lam2)
                if val > best:
                    f, best, improved = cand, val, True
        if not improved:
            gn = np.abs(u).max()
            cand = _normalize(f + step * u / gn, space, p, lam1)
            if cand is not None:
                val = _objective(mat, cand, space, q, lam2)
                if val > best * (1 + 1e-16):
                    f, best, improved = cand, val, True
                    step = min(step * 1.2, 2.0)
            if not improved:
                step *= 0.5
                if step < 1e-14:
                    break
        stall = 0 if improved else stall + 1
        if stall > 60:
            break
    return best, f


def _sphere_grid(n: int, target: int) -> np.ndarray:
    """Spherical-coordinate grid of directions in R^n."""
    if n == 1:
        return np.array([[1.0]])
    m = max(4, int(round(target ** (1.0 / (n - 1)))))
    axes = [np.linspace(0.0, np.pi, m, endpoint=False) for _ in range(n - 2)]
    axes.append(np.linspace(0.0, 2.0 * np.pi, 2 * m, endpoint=False))
    grids = np.meshgrid(*axes, indexing="ij")
    thetas = np.stack([g.ravel() for g in grids], axis=1)
    count = thetas.shape[0]
    out = np.ones((count, n))
    sin_prod = np.ones(count)
    for j in range(n - 1):
        out[:, j] = sin_prod * np.cos(thetas[:, j])
        sin_prod = sin_prod * np.sin(thetas[:, j])
    out[:, n - 1] = sin_prod
    return out


def _crude_upper(mat: np.ndarray, space: SpaceModel, p: float,
                 lam1: np.ndarray, q: float, lam2: np.ndarray) -> float:
    """Certified but loose: any unit f has |f| <= (lam1^p mu)^(-1/p) pointwise."""
    env = (lam1 ** p * space.mu) ** (-1.0 / p)
    g = np.abs(mat) @ env
    return float(((g * lam2) ** q * space.mu).sum() ** (1.0 / q))


def operator_norm(op: OperatorMatrix, p: float = 2.0, lam1=None,
                  q: float = 2.0, lam2=None, method: str = "svd-exact",
                  seed: int = 0, starts: int = 64, iterations: int = 500,
                  grid_target: int = 200_000) -> NormEstimate:
    """Estimate the L^p_{lam1} -> L^q_{lam2} norm of the operator.

    Raises `CapabilityError` for unsupported method/shape combinations
    (svd-exact needs p = q = 2; brute-oracle needs n <= 6 and a real
    matrix).  multistart-ascent reports a lower bound with upper = None.
    """
    space = op.space
    n = space.n
    lam1 = np.ones(n) if lam1 is None else np.asarray(lam1, float)
    lam2 = np.ones(n) if lam2 is None else np.asarray(lam2, float)
    if not (1.0 <= p < np.inf and 1.0 <= q < np.inf):
        raise DomainError("exponents must lie in [1, inf)")
    mat = op.entries

    if method == "svd-exact":
        if p != 2.0 or q != 2.0:
            raise CapabilityError("svd-exact requires p = q = 2")
        d1 = lam1 * np.sqrt(space.mu)
        d2 = lam2 * np.sqrt(space.mu)
        a = d2[:, None] * mat / d1[None, :]
        u, s, vh = np.linalg.svd(a)
        witness = vh[0].conj() / d1
        wit = _normalize(witness, space, 2.0, lam1)
        return NormEstimate(lower=float(s[0]), upper=float(s[0]),
                            method=method, p=p, q=q, witness=wit,
                            hyperparams={})

    if method == "brute-oracle":
        if n > 6:
            raise CapabilityError("brute-oracle supports n <= 6")
        if op.is_complex:
            raise CapabilityError("brute-oracle supports real operators only")
        dirs = _sphere_grid(n, grid_target)
        norms = ((np.abs(dirs) * lam1) ** p @ space.mu) ** (1.0 / p)
        ok = norms > 0
        f_grid = dirs[ok] / norms[ok][:, None]
        g = f_grid @ mat.T
        vals = ((np.abs(g) * lam2) ** q @ space.mu) ** (1.0 / q)
        top = np.argsort(-vals)[:20]
        best, wit = 0.0, f_grid[top[0]] if top.size else np.zeros(n)
        for i in top:
            v, f = _ascend(mat, f_grid[i], space, p, lam1, q, lam2, 3000)
            if v > best:
                best, wit = v, f
        upper = _crude_upper(mat, space, p, lam1, q, lam2)
        return NormEstimate(lower=float(best), upper=float(upper),
                            method=method, p=p, q=q, witness=wit,
                            hyperparams={"grid_target": grid_target, "polish_iters": 3000})

    if method == "multistart-ascent":
        rng = np.random.default_rng(seed)
        best, wit = 0.0, None
        for s_idx in range(starts):
            f0 = rng.normal(size=n)
            if op.is_complex:
                f0 = f0 + 1j * rng.normal(size=n)
            v, f = _ascend(mat, f0, space, p, lam1, q, lam2, iterations)
            if v > best:
                best, wit = v, f
        return NormEstimate(lower=float(best), upper=None, method=method,
                            p=p, q=q, witness=wit,
                            hyperparams={"seed": seed, "starts": starts,
                                         "iterations": iterations})

    raise CapabilityError(f"unknown norm estimation method {method!r}")
