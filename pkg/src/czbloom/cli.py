"""Command-line interface and experiment orchestration.

Subcommands: space profile, dyadic build|verify, weights char|bmo|s2,
kernel certify, op norm, verify upper|lower, awf decompose,
median decompose, run <config>.

Exit codes: 0 ok, 1 invariant violation, 2 config error, 3 capability
exhaustion.  Reports are JSON on stdout or --out; wall-clock times live
under the "timing" key so reports are byte-identical modulo timing.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .dyadic import (
    all_cubes_family,
    augment_sparse_family,
    build_adjacent_systems,
    build_dyadic_system,
    default_delta,
    system_to_dict,
    verify_dyadic_axioms,
    verify_sparse,
)
from .errors import CapabilityError, CZBloomError, DomainError, SpaceValidationError
from .generators import generate_space, generate_symbol, generate_weight
from .kernels import KernelSpec, certify, kernel_matrix, verify_adjoint_size_bound
from .lower_bound import (
    awf_double,
    bound_oscillation,
    find_companion_ball,
    find_sign_constant_companion,
    lower_bound_bmo,
    median_decomposition,
    median_value,
)
from .operator import commutator_matrix, operator_from_kernel, operator_norm
from .space import SpaceModel, ball, doubling_profile, load_space
from .sparse_bound import dominate_commutator, standard_test_functions, verify_upper_bound
from .weights import (
    ap_characteristic,
    app_characteristic,
    bloom_comparison_report,
    bmo_fractional_norm,
)

SUITES = ("dyadic", "kernel-cert", "lemma-s2", "upper", "lower-awf", "lower-median")


# ---------------------------------------------------------------------------
# Input parsing helpers
# ---------------------------------------------------------------------------

def _parse_space(value: str) -> SpaceModel:
    if value.startswith("gen:"):
        parts = value.split(":")[1:]
        kind = parts[0]
        size = int(parts[1]) if len(parts) > 1 else 16
        seed = int(parts[2]) if len(parts) > 2 else 0
        mass = parts[3] if len(parts) > 3 else "uniform"
        return generate_space(kind, size, seed=seed, mass=mass)
    return load_space(value)


def _parse_kernel(value: str) -> KernelSpec:
    if value.endswith(".json"):
        with open(value) as fh:
            return KernelSpec.from_dict(json.load(fh))
    if ":" in value:
        family, rest = value.split(":", 1)
        return KernelSpec(family, json.loads(rest))
    return KernelSpec(value)


def _parse_vector(value: str, n: int, kind: str = "symbol") -> np.ndarray:
    if value == "ones":
        return np.ones(n)
    if value.startswith("gen:"):
        parts = value.split(":")[1:]
        seed = int(parts[0]) if parts and parts[0] else 0
        if kind == "weight":
            sigma = float(parts[1]) if len(parts) > 1 else 0.5
            return generate_weight(n, seed=seed, sigma=sigma)
        complex_valued = len(parts) > 1 and parts[1] == "complex"
        return generate_symbol(n, seed=seed, complex_valued=complex_valued)
    with open(value) as fh:
        data = json.load(fh)
    arr = np.asarray(data)
    if arr.ndim == 2 and arr.shape[1] == 2:
        arr = arr[:, 0] + 1j * arr[:, 1]
    if arr.shape != (n,):
        raise DomainError(f"vector length {arr.shape} does not match space size {n}")
    return arr


def _emit(doc: dict, out: str | None) -> None:
    def clean(x):
        if isinstance(x, dict):
            return {str(k): clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, np.ndarray):
            return clean(x.tolist())
        if isinstance(x, complex):
            return [x.real, x.imag]
        if isinstance(x, (np.floating, np.integer)):
            return x.item()
        if isinstance(x, float) and not np.isfinite(x):
            return str(x)
        return x

    text = json.dumps(clean(doc), indent=1, sort_keys=True, allow_nan=False,
                      default=str)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# Experiment configuration and orchestration
# ---------------------------------------------------------------------------

def _config_space(cfg: dict) -> SpaceModel:
    sc = cfg.get("space")
    if not isinstance(sc, dict):
        raise DomainError("config field 'space' must be an object")
    if "file" in sc:
        return load_space(sc["file"])
    if "generator" in sc:
        params = {k: v for k, v in sc.items()
                  if k not in ("generator", "size", "seed")}
        return generate_space(sc["generator"], int(sc.get("size", 16)),
                              seed=int(sc.get("seed", 0)), **params)
    raise DomainError("config field 'space' needs 'file' or 'generator'")


def _config_vector(doc, n: int, kind: str, default_seed: int) -> np.ndarray:
    if doc is None:
        return (np.ones(n) if kind == "weight"
                else generate_symbol(n, seed=default_seed))
    if isinstance(doc, list):
        arr = np.asarray(doc)
        if arr.ndim == 2 and arr.shape[1] == 2:
            arr = arr[:, 0] + 1j * arr[:, 1]
        return arr
    if isinstance(doc, dict) and "generator" in doc:
        g = doc["generator"]
        if kind == "weight":
            return generate_weight(n, seed=int(g.get("seed", default_seed)),
                                   sigma=float(g.get("sigma", 0.5)))
        return generate_symbol(n, seed=int(g.get("seed", default_seed)),
                               complex_valued=bool(g.get("complex", False)))
    raise DomainError(f"invalid {kind} specification in config")


def run_config(cfg: dict) -> dict:
    """Execute the selected suites in dependency order and assemble a report."""
    exponents = cfg.get("exponents", {"p": 2.0, "q": 2.0})
    p = float(exponents.get("p", 2.0))
    q = float(exponents.get("q", 2.0))
    if not (1.0 < p <= q):
        raise DomainError("config field 'exponents': need 1 < p <= q")
    suites = cfg.get("suites", ["lemma-s2"])
    unknown = [s for s in suites if s not in SUITES]
    if unknown:
        raise DomainError(f"config field 'suites': unknown suites {unknown}")
    seed = int(cfg.get("seed", 0))
    tol = float(cfg.get("tolerance", 1e-9))

    space = _config_space(cfg)
    n = space.n
    kspec = KernelSpec.from_dict(cfg.get("kernel", {"family": "hilbert-grid"}))
    weights_cfg = cfg.get("weights", {})
    lam1 = _config_vector(weights_cfg.get("lambda1"), n, "weight", seed + 1)
    lam2 = _config_vector(weights_cfg.get("lambda2"), n, "weight", seed + 2)
    b = _config_vector(cfg.get("symbol"), n, "symbol", seed + 3)

    profile = space.profile
    delta = float(cfg["delta"]) if cfg.get("delta") else default_delta(profile.A0)

    report = {"version": __version__, "config": cfg, "timing": {},
              "profile": {"A0": profile.A0, "C_mu": profile.C_mu,
                          "Q": profile.Q, "N_geo": profile.N_geo},
              "suites": {}, "violations": [], "skips": []}

    op = operator_from_kernel(kspec, space)
    cert = certify(kspec, space, profile)

    for suite in suites:
        t0 = time.perf_counter()
        try:
            if suite == "dyadic":
                systems = build_adjacent_systems(space, delta, count=3,
                                                 seeds=[seed, seed + 1, seed + 2])
                axioms = [verify_dyadic_axioms(sy).to_dict() for sy in systems]
                real_b = np.real(b) if np.iscomplexobj(b) else b
                fam, const = augment_sparse_family(
                    real_b, all_cubes_family(systems[0]))
                ok, sparse_rep = verify_sparse(fam)
                out = {"axioms": axioms, "augmented_eta": fam.eta,
                       "augment_constant": const,
                       "sparse": sparse_rep.to_dict()}
                if not all(a["passed"] for a in axioms) or not ok:
                    report["violations"].append({"suite": suite})
            elif suite == "kernel-cert":
                adj = verify_adjoint_size_bound(kspec, space, profile)
                out = {"certificate": cert.to_dict(), "adjoint_size": adj}
                if not adj["ok"]:
                    report["violations"].append(
                        {"suite": suite, "check": "adjoint-size"})
            elif suite == "lemma-s2":
                rep = bloom_comparison_report(lam1, lam2, space, p, q,
                                              Q=max(profile.Q, 1e-9), tol=tol)
                out = rep.to_dict()
                if not rep.passed:
                    report["violations"].append(
                        {"suite": suite, "violations": rep.violations[:5]})
            elif suite == "upper":
                rep = verify_upper_bound(b, op, p, q, lam1, lam2, seed=seed,
                                         delta=delta)
                corpus = standard_test_functions(op, b, p, q, lam1, lam2,
                                                 seed=seed)
                doms = []
                for f in corpus[:4]:
                    wit = dominate_commutator(b, op, f, count=3,
                                              seeds=[seed, seed + 1, seed + 2],
                                              delta=delta)
                    doms.append({"C_dom": wit.C_dom, "passed": wit.passed})
                    if not wit.passed:
                        report["violations"].append(
                            {"suite": suite, "check": "domination",
                             "points": wit.failed_points})
                out = rep.to_dict()
                out["dominations"] = doms
            elif suite in ("lower-awf", "lower-median"):
                method = "awf" if suite == "lower-awf" else "median"
                if method == "median" and np.iscomplexobj(b):
                    raise CapabilityError("median route needs a real symbol")
                if p != 2.0 or q != 2.0:
                    raise CapabilityError(
                        "certified theta requires p = q = 2 (svd-exact)")
                theta = operator_norm(commutator_matrix(b, op), p=2.0,
                                      lam1=lam1, q=2.0, lam2=lam2,
                                      method="svd-exact").lower
                if theta <= 0:
                    raise CapabilityError("commutator norm vanishes; no theta")
                rep = lower_bound_bmo(b, op, cert, p, q, lam1, lam2, theta,
                                      method=method)
                out = rep.to_dict()
                out["rows"] = out["rows"][:50]
            else:  # pragma: no cover
                continue
        except CapabilityError as exc:
            report["skips"].append({"suite": suite, "reason": str(exc)})
            out = {"skipped": str(exc)}
        report["suites"][suite] = out
        report["timing"][suite] = time.perf_counter() - t0
    return report


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_space_profile(args) -> int:
    space = _parse_space(args.space)
    prof = doubling_profile(space)
    _emit({"n": space.n, "A0": prof.A0, "C_mu": prof.C_mu, "Q": prof.Q,
           "N_geo": prof.N_geo, "degenerate": prof.degenerate,
           "diameter": space.diameter, "total_mass": space.total_mass},
          args.out)
    return 0


def _cmd_dyadic(args) -> int:
    space = _parse_space(args.space)
    delta = args.delta or default_delta(space.profile.A0)
    system = build_dyadic_system(space, delta, seed=args.seed)
    report = verify_dyadic_axioms(system)
    doc = report.to_dict()
    if args.action == "build":
        doc["system"] = system_to_dict(system)
    _emit(doc, args.out)
    return 0 if report.passed else 1


def _cmd_weights(args) -> int:
    space = _parse_space(args.space)
    n = space.n
    if args.action == "char":
        w = _parse_vector(args.weights, n, "weight")
        _emit({"p": args.p, "ap": ap_characteristic(np.real(w), space, args.p),
               "app": app_characteristic(np.real(w), space, args.p)}, args.out)
        return 0
    if args.action == "bmo":
        w = np.real(_parse_vector(args.weights, n, "weight"))
        b = _parse_vector(args.b, n)
        q_order = args.Q or max(space.profile.Q, 1e-9)
        norm, witness = bmo_fractional_norm(b, w, space, args.alpha, q_order)
        _emit({"norm": norm, "alpha": args.alpha, "Q": q_order,
               "witness": None if witness is None else
               {"center": witness.center, "radius": witness.radius}}, args.out)
        return 0
    # two-sided comparison suite
    l1 = np.real(_parse_vector(args.lambda1, n, "weight"))
    l2 = np.real(_parse_vector(args.lambda2, n, "weight"))
    rep = bloom_comparison_report(l1, l2, space, args.p, args.q,
                                  Q=max(space.profile.Q, 1e-9), tol=args.tol)
    _emit(rep.to_dict(), args.out)
    return 0 if rep.passed else 1


def _cmd_kernel_certify(args) -> int:
    space = _parse_space(args.space)
    spec = _parse_kernel(args.kernel)
    cert = certify(spec, space)
    doc = cert.to_dict()
    doc["adjoint_size"] = verify_adjoint_size_bound(spec, space)
    _emit(doc, args.out)
    return 0 if doc["adjoint_size"]["ok"] else 1


def _cmd_op_norm(args) -> int:
    space = _parse_space(args.space)
    op = operator_from_kernel(_parse_kernel(args.kernel), space)
    if args.b:
        op = commutator_matrix(_parse_vector(args.b, space.n), op)
    l1 = np.real(_parse_vector(args.lambda1, space.n, "weight"))
    l2 = np.real(_parse_vector(args.lambda2, space.n, "weight"))
    est = operator_norm(op, p=args.p, lam1=l1, q=args.q, lam2=l2,
                        method=args.method, seed=args.seed)
    _emit(est.to_dict(), args.out)
    return 0


def _cmd_verify(args) -> int:
    space = _parse_space(args.space)
    op = operator_from_kernel(_parse_kernel(args.kernel), space)
    n = space.n
    b = _parse_vector(args.b, n)
    l1 = np.real(_parse_vector(args.lambda1, n, "weight"))
    l2 = np.real(_parse_vector(args.lambda2, n, "weight"))
    if args.action == "upper":
        rep = verify_upper_bound(b, op, args.p, args.q, l1, l2, seed=args.seed)
        _emit(rep.to_dict(), args.out)
        return 0
    cert = certify(op.spec, space)
    theta = operator_norm(commutator_matrix(b, op), lam1=l1, lam2=l2,
                          method="svd-exact").lower
    if args.p != 2.0 or args.q != 2.0:
        raise CapabilityError("verify lower requires p = q = 2 for the svd theta")
    rep = lower_bound_bmo(b, op, cert, args.p, args.q, l1, l2, theta,
                          method=args.method)
    _emit(rep.to_dict(), args.out)
    return 0


def _cmd_awf_decompose(args) -> int:
    space = _parse_space(args.space)
    spec = _parse_kernel(args.kernel)
    op = operator_from_kernel(spec, space)
    cert = certify(spec, space)
    b = _parse_vector(args.b, space.n)
    base = ball(space, args.center, args.radius)
    rep = bound_oscillation(b, op, cert, base, orientation=args.orientation)
    doc = rep.to_dict()
    if rep.awf is not None:
        doc["factor_scale"] = rep.awf.factor_scale
        doc["error_scale"] = rep.awf.error_scale
        doc["residual"] = rep.awf.residual
        doc["threshold"] = rep.awf.threshold
        doc["threshold_satisfied"] = rep.awf.threshold_satisfied
    _emit(doc, args.out)
    return 0


def _cmd_median_decompose(args) -> int:
    space = _parse_space(args.space)
    b = np.real(_parse_vector(args.b, space.n))
    base = ball(space, args.center, args.radius)
    if args.companion_center is not None:
        comp = ball(space, args.companion_center, args.radius)
    else:
        op = operator_from_kernel(_parse_kernel(args.kernel), space)
        found = find_sign_constant_companion(op, base)
        if found is None:
            raise CapabilityError("no sign-constant companion ball found")
        comp = found[0]
    dec = median_decomposition(b, space, base, comp)
    _emit({"median": dec.median,
           "companion_center": int(comp.center),
           "E1": dec.e_sets[0].tolist(), "E2": dec.e_sets[1].tolist(),
           "F1": dec.f_sets[0].tolist(), "F2": dec.f_sets[1].tolist()},
          args.out)
    return 0


def _cmd_run(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    if args.seed is not None:
        cfg["seed"] = args.seed
    report = run_config(cfg)
    _emit(report, args.out or cfg.get("out"))
    return 1 if report["violations"] else 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

def _add_common(sp, space=True, kernel=False, weights=False, symbol=False,
                exponents=False):
    if space:
        sp.add_argument("--space", required=True,
                        help="space JSON file or gen:<kind>:<size>[:seed[:mass]]")
    if kernel:
        sp.add_argument("--kernel", default="hilbert-grid",
                        help="kernel family, family:params-json, or spec file")
    if weights:
        sp.add_argument("--lambda1", default="ones")
        sp.add_argument("--lambda2", default="ones")
    if symbol:
        sp.add_argument("--b", required=True,
                        help="symbol vector file or gen:<seed>[:complex]")
    if exponents:
        sp.add_argument("--p", type=float, default=2.0)
        sp.add_argument("--q", type=float, default=2.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="czbloom",
        description="Two-weight commutator bound verification on finite doubling spaces")
    sub = parser.add_subparsers(dest="command", required=True)

    p_space = sub.add_parser("space").add_subparsers(dest="action", required=True)
    sp = p_space.add_parser("profile")
    _add_common(sp)
    sp.set_defaults(func=_cmd_space_profile)

    p_dy = sub.add_parser("dyadic").add_subparsers(dest="action", required=True)
    for action in ("build", "verify"):
        sp = p_dy.add_parser(action)
        _add_common(sp)
        sp.add_argument("--delta", type=float, default=None)
        sp.set_defaults(func=_cmd_dyadic)

    p_w = sub.add_parser("weights").add_subparsers(dest="action", required=True)
    sp = p_w.add_parser("char")
    _add_common(sp)
    sp.add_argument("--weights", required=True)
    sp.add_argument("--p", type=float, default=2.0)
    sp.set_defaults(func=_cmd_weights)
    sp = p_w.add_parser("bmo")
    _add_common(sp)
    sp.add_argument("--weights", default="ones")
    sp.add_argument("--b", required=True)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--Q", type=float, default=None)
    sp.set_defaults(func=_cmd_weights)
    sp = p_w.add_parser("s2")
    _add_common(sp, weights=True, exponents=True)
    sp.set_defaults(func=_cmd_weights)

    p_k = sub.add_parser("kernel").add_subparsers(dest="action", required=True)
    sp = p_k.add_parser("certify")
    _add_common(sp, kernel=True)
    sp.set_defaults(func=_cmd_kernel_certify)

    p_op = sub.add_parser("op").add_subparsers(dest="action", required=True)
    sp = p_op.add_parser("norm")
    _add_common(sp, kernel=True, weights=True, exponents=True)
    sp.add_argument("--b", default=None, help="optional symbol: estimate [b,T] instead of T")
    sp.add_argument("--method", default="svd-exact",
                    choices=["svd-exact", "brute-oracle", "multistart-ascent"])
    sp.set_defaults(func=_cmd_op_norm)

    p_v = sub.add_parser("verify").add_subparsers(dest="action", required=True)
    sp = p_v.add_parser("upper")
    _add_common(sp, kernel=True, weights=True, symbol=True, exponents=True)
    sp.set_defaults(func=_cmd_verify)
    sp = p_v.add_parser("lower")
    _add_common(sp, kernel=True, weights=True, symbol=True, exponents=True)
    sp.add_argument("--method", default="awf", choices=["median", "awf"])
    sp.set_defaults(func=_cmd_verify)

    p_awf = sub.add_parser("awf").add_subparsers(dest="action", required=True)
    sp = p_awf.add_parser("decompose")
    _add_common(sp, kernel=True, symbol=True)
    sp.add_argument("--center", type=int, required=True)
    sp.add_argument("--radius", type=float, required=True)
    sp.add_argument("--orientation", default="opp", choices=["opp", "std"])
    sp.set_defaults(func=_cmd_awf_decompose)

    p_med = sub.add_parser("median").add_subparsers(dest="action", required=True)
    sp = p_med.add_parser("decompose")
    _add_common(sp, kernel=True, symbol=True)
    sp.add_argument("--center", type=int, required=True)
    sp.add_argument("--radius", type=float, required=True)
    sp.add_argument("--companion-center", type=int, default=None)
    sp.set_defaults(func=_cmd_median_decompose)

    sp = sub.add_parser("run")
    sp.add_argument("config")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpaceValidationError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapabilityError as exc:
        print(f"capability exhausted: {exc}", file=sys.stderr)
        return 3
    except CZBloomError as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
