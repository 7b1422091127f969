import numpy as np
import pytest

from czbloom.errors import DomainError
from czbloom.generators import generate_space, grid4
from czbloom.kernels import (
    KernelSpec,
    adjoint,
    certify,
    evaluate,
    kernel_matrix,
    verify_adjoint_size_bound,
)
from czbloom.space import doubling_profile, volume, volume_matrix

HILBERT = KernelSpec("hilbert-grid")
POWER = KernelSpec("power-sign")
POWER_CONST = KernelSpec("power-sign", {"orientation": "constant"})


def test_evaluate_hilbert_grid4():
    s = grid4()
    assert evaluate(HILBERT, s, 0, 1) == pytest.approx(-1.0)
    assert evaluate(HILBERT, s, 3, 1) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        evaluate(HILBERT, s, 2, 2)


def test_evaluate_power_sign_uses_volume():
    s = grid4()
    val = evaluate(POWER, s, 0, 3)
    assert abs(val) == pytest.approx(1.0 / volume(s, 0, 3))
    assert evaluate(POWER, s, 3, 0) == pytest.approx(1.0 / volume(s, 3, 0))
    assert evaluate(POWER, s, 0, 3) == pytest.approx(-1.0 / 3.0)


def test_hilbert_antisymmetry():
    s = grid4()
    k = kernel_matrix(HILBERT, s)
    for x in range(4):
        for y in range(4):
            if x != y:
                assert k[x, y] == pytest.approx(-k[y, x])


def test_certify_power_sign_constant_ck():
    s = generate_space("random-cloud", 12, seed=1, mass="random")
    cert = certify(POWER_CONST, s)
    assert cert.c_K == pytest.approx(1.0)


def test_certify_hilbert_ck_matches_pairs():
    s = grid4()
    cert = certify(HILBERT, s)
    v = volume_matrix(s)
    want = max(v[x, y] / abs(x - y) for x in range(4) for y in range(4) if x != y)
    assert cert.c_K == pytest.approx(want)


def test_size_bound_holds_with_certified_ck():
    s = generate_space("grid-1d", 20, seed=0, mass="random")
    cert = certify(HILBERT, s)
    k = np.abs(kernel_matrix(HILBERT, s))
    v = volume_matrix(s)
    for x in range(s.n):
        for y in range(s.n):
            if x != y:
                assert k[x, y] <= cert.c_K / v[x, y] * (1 + 1e-12)


def test_weak_type_tail():
    s = generate_space("grid-1d", 16, seed=2, mass="random")
    cert = certify(HILBERT, s)
    k = np.abs(kernel_matrix(HILBERT, s))
    for x in range(s.n):
        levels = np.unique(k[x][np.arange(s.n) != x])
        for t in levels[levels > 0]:
            mass = s.mu[(k[x] >= t) & (np.arange(s.n) != x)].sum()
            assert t * mass <= cert.weak_type_c * (1 + 1e-12)


def test_envelope_nondecreasing_and_small_at_origin():
    s = generate_space("grid-1d", 24, seed=0)
    cert = certify(HILBERT, s)
    assert np.all(np.diff(cert.envelope_v) >= 0)
    assert np.all(np.diff(cert.envelope_t) > 0)
    assert cert.omega_smallest <= 0.5 * cert.envelope_v[-1] + 1e-12
    assert cert.dini_value > 0
    assert 0 < cert.dini_cutoff < 1
    assert cert.subadditivity_defect >= 0


def test_nondegeneracy_power_sign():
    s = generate_space("grid-1d", 16, seed=0)
    cert = certify(POWER_CONST, s)
    c0, cbar = cert.nondeg_y
    assert np.isfinite(c0) and c0 >= 1.0 - 1e-12 and cbar > 1.0
    # re-check the defining property at every (x, radius class)
    k = np.abs(kernel_matrix(POWER_CONST, s))
    for x in range(s.n):
        for r in np.unique(s.dist[x]):
            if r <= 0:
                continue
            ann = [y for y in range(s.n)
                   if y != x and r <= s.dist[x, y] < cbar * r]
            assert ann, (x, r)
            best = max(k[x, y] for y in ann)
            assert best >= 1.0 / (c0 * s.ball_measure(x, r)) * (1 - 1e-12)


def test_nondeg_orientation_duality():
    s = generate_space("random-cloud", 10, seed=5)
    spec = KernelSpec("riesz-like", {"component": 0})
    cert = certify(spec, s)
    cert_adj = certify(adjoint(spec), s)
    assert cert.nondeg_x == cert_adj.nondeg_y
    assert cert.nondeg_y == cert_adj.nondeg_x


def test_adjoint_involution_and_negation():
    s = grid4()
    spec2 = adjoint(adjoint(HILBERT))
    assert np.allclose(np.nan_to_num(kernel_matrix(spec2, s)),
                       np.nan_to_num(kernel_matrix(HILBERT, s)))
    k = kernel_matrix(HILBERT, s)
    ka = kernel_matrix(adjoint(HILBERT), s)
    off = ~np.eye(4, dtype=bool)
    assert np.allclose(ka[off], -k[off])


@pytest.mark.parametrize("seed", range(4))
def test_adjoint_size_bound_riesz(seed):
    s = generate_space("random-cloud", 10, seed=seed, mass="random")
    res = verify_adjoint_size_bound(KernelSpec("riesz-like"), s)
    assert res["ok"], res


def test_perturbed_deterministic_and_bounded():
    s = grid4()
    spec = KernelSpec("perturbed", {"base": HILBERT, "amplitude": 0.3, "seed": 9})
    k1 = kernel_matrix(spec, s)
    k2 = kernel_matrix(spec, s)
    assert np.allclose(np.nan_to_num(k1), np.nan_to_num(k2))
    base = kernel_matrix(HILBERT, s)
    off = ~np.eye(4, dtype=bool)
    assert np.all(np.abs(k1[off] - base[off]) <= 0.3 * np.abs(base[off]) + 1e-15)


def test_spec_serialisation_roundtrip():
    spec = KernelSpec("perturbed", {"base": HILBERT, "amplitude": 0.2, "seed": 3})
    doc = spec.to_dict()
    back = KernelSpec.from_dict(doc)
    s = grid4()
    assert np.allclose(np.nan_to_num(kernel_matrix(back, s)),
                       np.nan_to_num(kernel_matrix(spec, s)))
