"""Off-diagonal kernels with size/smoothness/non-degeneracy certificates.

Builtin families (K undefined on the diagonal; the operator module zeroes it):

  power-sign    K(x,y) = sign/V(x,y), sign from a coordinate orientation
                (or constant +1 with orientation="constant")
  riesz-like    K(x,y) = ((x-y)/|x-y|)_j / V(x,y) on embedded clouds
  hilbert-grid  K(x,y) = 1/(c_x - c_y) for 1-d coordinates c
  perturbed     base family times (1 + amplitude * u(x,y)), u seeded in [-1,1]
  adjoint       transpose of a base spec

Certificates are measured, never assumed: the smoothness modulus is the
isotonic upper envelope of all admissible difference quotients, and the
non-degeneracy constants come from exhaustive annulus searches per radius
class.  The envelope's subadditivity defect is recorded, not enforced.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .space import SpaceModel, SpaceProfile, volume_matrix

__all__ = [
    "KernelSpec",
    "KernelCertificate",
    "kernel_matrix",
    "evaluate",
    "certify",
    "adjoint",
    "verify_adjoint_size_bound",
    "BUILTIN_FAMILIES",
]

BUILTIN_FAMILIES = ("power-sign", "riesz-like", "hilbert-grid", "perturbed", "adjoint")


@dataclass(frozen=True)
class KernelSpec:
    family: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        params = dict(self.params)
        if isinstance(params.get("base"), KernelSpec):
            params["base"] = params["base"].to_dict()
        return {"family": self.family, "params": params}

    @staticmethod
    def from_dict(doc: dict) -> "KernelSpec":
        params = dict(doc.get("params", {}))
        if isinstance(params.get("base"), dict):
            params["base"] = KernelSpec.from_dict(params["base"])
        return KernelSpec(family=doc["family"], params=params)


def kernel_matrix(spec: KernelSpec, space: SpaceModel) -> np.ndarray:
    """Dense kernel table; the diagonal is NaN (undefined, never read)."""
    n = space.n
    if spec.family == "adjoint":
        return kernel_matrix(spec.params["base"], space).T.copy()
    if spec.family == "perturbed":
        base = kernel_matrix(spec.params["base"], space)
        amp = float(spec.params.get("amplitude", 0.1))
        rng = np.random.default_rng(int(spec.params.get("seed", 0)))
        u = rng.uniform(-1.0, 1.0, size=(n, n))
        return base * (1.0 + amp * u)

    v = volume_matrix(space)
    if spec.family == "power-sign":
        orientation = spec.params.get("orientation", "coordinate")
        if orientation == "constant":
            sign = np.ones((n, n))
        else:
            if space.coords is None:
                raise DomainError("power-sign with coordinate orientation needs coords")
            axis = int(spec.params.get("axis", 0))
            diff = space.coords[:, axis][:, None] - space.coords[:, axis][None, :]
            sign = np.where(diff >= 0, 1.0, -1.0)
        k = sign / v
    elif spec.family == "riesz-like":
        if space.coords is None:
            raise DomainError("riesz-like needs coords")
        j = int(spec.params.get("component", 0))
        diff = space.coords[:, None, :] - space.coords[None, :, :]
        norms = np.sqrt((diff ** 2).sum(axis=2))
        with np.errstate(divide="ignore", invalid="ignore"):
            k = diff[:, :, j] / norms / v
    elif spec.family == "hilbert-grid":
        if space.coords is None or space.coords.shape[1] != 1:
            raise DomainError("hilbert-grid needs 1-d coords")
        c = space.coords[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            k = 1.0 / (c[:, None] - c[None, :])
    else:
        raise DomainError(f"unknown kernel family {spec.family!r}")
    np.fill_diagonal(k, np.nan)
    return k


def evaluate(spec: KernelSpec, space: SpaceModel, x: int, y: int) -> float:
    """K(x, y) for x != y."""
    if x == y:
        raise DomainError("kernel is undefined on the diagonal")
    return float(kernel_matrix(spec, space)[x, y])


def adjoint(spec: KernelSpec) -> KernelSpec:
    """The transposed kernel as a new spec; involutive up to unwrapping."""
    if spec.family == "adjoint":
        return spec.params["base"]
    return KernelSpec(family="adjoint", params={"base": spec})


@dataclass
class KernelCertificate:
    c_K: float
    envelope_t: np.ndarray       # admissible scale fractions, increasing
    envelope_v: np.ndarray       # isotonic upper envelope values
    dini_value: float            # trapezoid of envelope(t)/t on [cutoff, 1]
    dini_cutoff: float           # smallest sampled t
    omega_smallest: float        # envelope value at the smallest sampled t
    subadditivity_defect: float
    nondeg_y: tuple              # (c0, C_bar) for the exists-y orientation
    nondeg_x: tuple              # (c0, C_bar) for the exists-x orientation
    weak_type_c: float

    def omega(self, t: float) -> float:
        """Envelope evaluated as a nondecreasing step function."""
        idx = int(np.searchsorted(self.envelope_t, t, side="right")) - 1
        return float(self.envelope_v[idx]) if idx >= 0 else 0.0

    def to_dict(self) -> dict:
        return {"c_K": self.c_K,
                "envelope": [[float(a), float(b)] for a, b in
                             zip(self.envelope_t, self.envelope_v)],
                "dini_value": self.dini_value, "dini_cutoff": self.dini_cutoff,
                "omega_smallest": self.omega_smallest,
                "subadditivity_defect": self.subadditivity_defect,
                "nondeg_y": list(self.nondeg_y), "nondeg_x": list(self.nondeg_x),
                "weak_type_c": self.weak_type_c}


def _modulus_envelope(k: np.ndarray, v: np.ndarray, d: np.ndarray, a0: float):
    """Upper envelope of V(x,y)*(|K(x,y)-K(x',y)| + |K(y,x)-K(y,x')|) against
    t = d(x,x')/d(x,y) over triples with d(x,x') < (2 A0)^{-1} d(x,y)."""
    n = k.shape[0]
    cut = 1.0 / (2.0 * a0)
    ts, vs = [], []
    for xp in range(n):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = d[:, xp][:, None] / d
        mask = np.isfinite(t) & (t > 0) & (t < cut)
        np.fill_diagonal(mask, False)
        if not mask.any():
            continue
        # first term |K(x,y)-K(x',y)|, second |K(y,x)-K(y,x')| laid out as [x,y]
        val = (np.abs(k - k[xp, :][None, :])
               + np.abs(k.T - k[:, xp][None, :])) * v
        ts.append(t[mask])
        vs.append(val[mask])
    if not ts:
        return np.array([1.0]), np.array([0.0])
    t_all = np.concatenate(ts)
    v_all = np.concatenate(vs)
    order = np.argsort(t_all, kind="stable")
    t_sorted = t_all[order]
    v_run = np.maximum.accumulate(v_all[order])
    # keep only breakpoints where the running max moves (plus the last point)
    keep = np.ones(t_sorted.size, dtype=bool)
    keep[1:] = (v_run[1:] > v_run[:-1]) | (np.diff(t_sorted) > 0)
    t_br, v_br = t_sorted[keep], v_run[keep]
    # collapse duplicate t to their max
    uniq_t, idx = np.unique(t_br, return_index=True)
    out_v = np.maximum.reduceat(v_br, idx)
    out_v = np.maximum.accumulate(out_v)
    return uniq_t, out_v


def _dini(env_t: np.ndarray, env_v: np.ndarray) -> float:
    """Trapezoid of envelope(t)/t from the smallest sampled t up to 1,
    extending the envelope as a constant beyond its last sample."""
    t = env_t
    v = env_v
    if t[-1] < 1.0:
        t = np.append(t, 1.0)
        v = np.append(v, v[-1])
    integrand = v / t
    return float(np.trapezoid(integrand, t))


def _subadditivity_defect(env_t: np.ndarray, env_v: np.ndarray) -> float:
    """max(0, sup omega(t1+t2) - omega(t1) - omega(t2)) over a sampled grid."""
    if env_t.size > 80:
        sel = np.unique(np.linspace(0, env_t.size - 1, 80).astype(int))
        t, v = env_t[sel], env_v[sel]
    else:
        t, v = env_t, env_v

    def omega(x):
        idx = np.searchsorted(t, x, side="right") - 1
        return np.where(idx >= 0, v[np.maximum(idx, 0)], 0.0)

    ts = t[:, None] + t[None, :]
    inside = ts <= t[-1]
    if not inside.any():
        return 0.0
    defect = omega(ts[inside]) - (v[:, None] + v[None, :])[inside]
    return float(max(0.0, defect.max()))


def _nondegeneracy(k_abs: np.ndarray, space: SpaceModel) -> tuple[float, float]:
    """Annulus search for the exists-y orientation: for every x and each
    realized radius class r, the best candidate beyond r maximising
    |K(x,y)| * mu(B(x,r)).  Returns the certified (c0, C_bar)."""
    d = space.dist
    worst_score = np.inf
    worst_stretch = 1.0
    for x in range(space.n):
        radii = np.unique(d[x])
        radii = radii[radii > 0]
        for r in radii:
            cand = np.flatnonzero(d[x] >= r)
            cand = cand[cand != x]
            if cand.size == 0:
                continue
            mb = space.ball_measure(x, float(r))
            scores = k_abs[x, cand] * mb
            best = int(np.argmax(scores))
            worst_score = min(worst_score, float(scores[best]))
            worst_stretch = max(worst_stretch, float(d[x, cand[best]] / r))
    if not np.isfinite(worst_score) or worst_score <= 0:
        return np.inf, worst_stretch * (1 + 1e-9)
    return 1.0 / worst_score, worst_stretch * (1 + 1e-9)


def _weak_type_constant(k_abs: np.ndarray, space: SpaceModel) -> float:
    """Exact sup over x and levels t of t * mu({y != x : |K(x,y)| >= t})."""
    best = 0.0
    n = space.n
    for x in range(n):
        vals = np.delete(k_abs[x], x)
        mus = np.delete(space.mu, x)
        order = np.argsort(-vals, kind="stable")
        lv = vals[order]
        cm = np.cumsum(mus[order])
        pos = lv > 0
        if pos.any():
            best = max(best, float((lv[pos] * cm[pos]).max()))
    return best


def certify(spec: KernelSpec, space: SpaceModel,
            profile: SpaceProfile | None = None) -> KernelCertificate:
    """Measure every certificate constant of a kernel on a space.

    c_K is the exact max of |K| * V over pairs; the modulus envelope, Dini
    value, both non-degeneracy orientations, and the weak-type constant are
    all exhaustive over the finite space.
    """
    from .space import doubling_profile
    if profile is None:
        profile = doubling_profile(space)
    k = kernel_matrix(spec, space)
    v = volume_matrix(space)
    k_abs = np.abs(k)
    off = ~np.eye(space.n, dtype=bool)
    c_k = float(np.nanmax((k_abs * v)[off])) if space.n > 1 else 0.0

    env_t, env_v = _modulus_envelope(k, v, space.dist, profile.A0)
    nd_y = _nondegeneracy(k_abs, space)
    nd_x = _nondegeneracy(k_abs.T, space)
    k_abs0 = np.where(np.isnan(k_abs), 0.0, k_abs)
    return KernelCertificate(
        c_K=c_k,
        envelope_t=env_t, envelope_v=env_v,
        dini_value=_dini(env_t, env_v),
        dini_cutoff=float(env_t[0]),
        omega_smallest=float(env_v[0]),
        subadditivity_defect=_subadditivity_defect(env_t, env_v),
        nondeg_y=nd_y, nondeg_x=nd_x,
        weak_type_c=_weak_type_constant(k_abs0, space),
    )


def verify_adjoint_size_bound(spec: KernelSpec, space: SpaceModel,
                              profile: SpaceProfile | None = None) -> dict:
    """Check c_{K*} <= C_mu (2 A0)^Q c_K with the measured space constants."""
    from .space import doubling_profile
    if profile is None:
        profile = doubling_profile(space)
    c_base = certify(spec, space, profile).c_K
    c_adj = certify(adjoint(spec), space, profile).c_K
    bound = profile.C_mu * (2.0 * profile.A0) ** profile.Q * c_base
    return {"c_K": c_base, "c_K_adjoint": c_adj, "bound": bound,
            "ok": bool(c_adj <= bound * (1 + 1e-12))}
