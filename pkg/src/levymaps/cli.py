"""Batch command-line frontend.

One verb per invocation; all randomness flows from --seed (default 42),
echoed in every report.  Exit codes: 0 success, 1 domain error, 2 parse or
usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import __version__
from .classify import classify_distribution, nested_level, verify_log_moment_identity
from .errors import DomainError, LevyMapsError, QuadratureError, SchemaError
from .kernels import builtin_kernel, kernel_from_spec
from .measures import (
    Direction,
    cumulant_eval,
    log_moment,
    triplet_from_dict,
    triplet_to_dict,
)
from .montecarlo import SimConfig, compare_cf, sample_integral
from .stable import (
    StableLaw,
    bernstein_invert,
    gamma_extract,
    make_stable,
    stable_fixed_point_check,
)
from .transforms import (
    iterate_map,
    map_cumulant,
    map_triplet,
    mapped_cumulant_fn,
)
from .measures import h_function, normalize_polar


def _load_triplet(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read distribution file {path}: {exc}") from exc
    return triplet_from_dict(spec)


def _kernel_from_args(args) -> object:
    if args.kernel_p:
        if args.t0 is None:
            raise SchemaError("--kernel-p requires --t0")
        return kernel_from_spec({"p": args.kernel_p, "t0": args.t0})
    if not args.kernel:
        raise SchemaError("specify --kernel NAME or --kernel-p EXPR --t0 X")
    name = args.kernel.strip()
    if "(" in name and name.endswith(")"):
        base, argstr = name[:-1].split("(", 1)
        params = [float(v) for v in argstr.split(",") if v.strip()]
        spec = {"name": base}
        if base.strip().lower() == "phi_beta_alpha":
            spec["beta"], spec["alpha"] = params
        elif params:
            spec["alpha"] = params[0]
        return kernel_from_spec(spec)
    return kernel_from_spec({"name": name})


def _emit(payload: dict, out_path: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_radial_csv(tr, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["direction_index", "u", "density"])
        if tr.nu is None:
            return
        for i, ray in enumerate(tr.nu.rays):
            rm = ray.radial
            if hasattr(rm, "r"):
                for u, v in zip(rm.r, rm.values):
                    writer.writerow([i, repr(float(u)), repr(float(v))])


def _cmd_classify(args) -> int:
    tr = _load_triplet(args.input)
    if tr.nu is None:
        raise DomainError("distribution has no Lévy measure; nothing to classify")
    verdict = classify_distribution(tr.nu, order=args.order)
    level, report = nested_level(tr.nu, M=min(args.order, 8) - 1 if args.order > 1 else 0)
    payload = {
        "seed": args.seed,
        "classes": verdict.to_dict(),
        "nested_level_witness": level,
        "h_grid": report.grid_used,
    }
    _emit(payload, args.out)
    return 0


def _cmd_map(args, iterate_only: bool = False) -> int:
    tr = _load_triplet(args.input)
    kernel = _kernel_from_args(args)
    m = args.iterations
    if iterate_only and m < 1:
        raise SchemaError("iterate requires --iterations >= 1")
    mapped = iterate_map(kernel, tr, max(m, 1)) if m >= 1 else map_triplet(kernel, tr)
    payload = triplet_to_dict(mapped)
    payload["seed"] = args.seed
    _emit(payload, args.out)
    if args.radial_csv:
        _write_radial_csv(mapped, args.radial_csv)
    return 0


def _cmd_bernstein(args) -> int:
    tr = _load_triplet(args.input)
    if tr.nu is None:
        raise DomainError("distribution has no Lévy measure; nothing to invert")
    nu = normalize_polar(tr.nu)
    u = np.linspace(args.u_min, args.u_max, args.u_points)
    rows_fit, rows_gamma = [], []
    summary = []
    for i, ray in enumerate(nu.rays):
        h = np.array([h_function(ray.radial, float(ui)) for ui in u])
        fit = bernstein_invert(u, h, node_count=args.nodes)
        gamma = gamma_extract(fit)
        rows_fit += [[i, repr(float(v)), repr(float(m))] for v, m in zip(fit.nodes, fit.masses)]
        rows_gamma += [[i, repr(float(a)), repr(float(m))] for a, m in zip(gamma.nodes, gamma.masses)]
        summary.append(
            {
                "direction_index": i,
                "residual": fit.residual,
                "support_report": fit.support_report,
                "gamma_total_mass": gamma.total_mass,
                "normalization_constant": gamma.finiteness_functional(),
            }
        )
    prefix = args.out_prefix
    for name, rows, header in (
        ("fit", rows_fit, ["direction_index", "rate", "mass"]),
        ("gamma", rows_gamma, ["direction_index", "alpha", "mass"]),
    ):
        with open(f"{prefix}_{name}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    _emit({"seed": args.seed, "directions": summary}, args.out)
    return 0


def _cmd_simulate(args) -> int:
    tr = _load_triplet(args.input)
    kernel = _kernel_from_args(args)
    cfg = SimConfig(
        n_samples=args.samples,
        n_steps=args.steps,
        jump_cutoff=args.cutoff,
        seed=args.seed,
    )
    samples = sample_integral(kernel, tr, cfg)
    if args.samples_out:
        if args.binary:
            samples.astype("<f8").tofile(args.samples_out)
        else:
            np.savetxt(args.samples_out, samples, delimiter=",")
    zs = [np.full(tr.dim, s / math.sqrt(tr.dim)) for s in (0.5, 1.0, 2.0)]
    zs += [-z for z in zs]
    report = compare_cf(samples, mapped_cumulant_fn(kernel, tr), zs)
    _emit(
        {
            "seed": args.seed,
            "kernel": kernel.name,
            "n_samples": report.n_samples,
            "max_deviation": report.max_deviation,
            "mc_radius": report.mc_radius,
            "within_radius": report.within_radius,
        },
        args.out,
    )
    return 0


def _identity_psi(tr, args):
    psi = builtin_kernel("psi")
    phi, ups = builtin_kernel("phi"), builtin_kernel("upsilon")
    zs = [np.full(tr.dim, s / math.sqrt(tr.dim)) for s in (0.5, 1.0, 2.0)]
    worst = 0.0
    for z in zs:
        a = map_cumulant(psi, tr, z)
        b = map_cumulant(ups, mapped_cumulant_fn(phi, tr), z)
        c = map_cumulant(phi, mapped_cumulant_fn(ups, tr), z)
        worst = max(worst, abs(a - b), abs(a - c), abs(b - c))
    return {"identity": "psi", "max_deviation": worst}


def _identity_commutativity(tr, args):
    from .transforms import verify_commutativity

    names = (args.kernels or "u,upsilon").split(",")
    k0, k1 = (builtin_kernel(n.strip()) for n in names[:2])
    zs = [np.full(tr.dim, s / math.sqrt(tr.dim)) for s in (0.5, 1.0, 2.0)]
    rep = verify_commutativity(k0, k1, tr, zs)
    return {
        "identity": "commutativity",
        "kernels": rep.kernels,
        "max_deviation": rep.max_deviation,
    }


def _identity_log_moment(tr, args):
    if tr.nu is None:
        raise DomainError("log-moment identity needs a Lévy measure")
    lhs, rhs, diff = verify_log_moment_identity(tr.nu, args.m)
    return {"identity": "log-moment", "m": args.m, "lhs": lhs, "rhs": rhs, "max_deviation": diff}


def _identity_fixed_point(tr, args):
    kernel = builtin_kernel((args.kernels or "upsilon").split(",")[0].strip())
    if tr.nu is None:
        raise DomainError("fixed-point check needs a stable Lévy measure")
    spherical = tuple((ray.direction, ray.weight) for ray in tr.nu.rays)
    alpha = args.alpha
    law = StableLaw(alpha, spherical, np.zeros(tr.dim), scale=args.scale)
    rep = stable_fixed_point_check(kernel, alpha, law)
    return {
        "identity": "fixed-point",
        "kernel": rep.kernel,
        "alpha": rep.alpha,
        "kappa": rep.kappa,
        "max_deviation": max(rep.max_real_residual, rep.max_nonlinearity),
        "passed": rep.passed,
    }


_IDENTITIES = {
    "psi": _identity_psi,
    "commutativity": _identity_commutativity,
    "log-moment": _identity_log_moment,
    "fixed-point": _identity_fixed_point,
}


def _cmd_verify(args) -> int:
    tr = _load_triplet(args.input)
    payload = _IDENTITIES[args.identity](tr, args)
    payload["seed"] = args.seed
    _emit(payload, args.out)
    return 0


def _cmd_stable(args) -> int:
    dirs = []
    for token in args.direction:
        coords = tuple(float(v) for v in token.split(","))
        dirs.append(Direction(coords))
    weights = [float(w) for w in (args.weight or ["1.0"] * len(dirs))]
    if len(weights) != len(dirs):
        raise SchemaError("--weight count must match --direction count")
    tau = np.array([float(v) for v in args.tau.split(",")]) if args.tau else np.zeros(dirs[0].dim)
    tr = make_stable(args.alpha, tuple(zip(dirs, weights)), tau, scale=args.scale)
    payload = triplet_to_dict(tr)
    payload["seed"] = args.seed
    _emit(payload, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levymaps",
        description="Transforms, class tests and simulation for infinitely "
        "divisible laws given by polar Lévy triplets.",
    )
    parser.add_argument("--version", action="version", version=f"levymaps {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, with_kernel=False):
        p.add_argument("input", help="distribution JSON file")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        if with_kernel:
            p.add_argument("--kernel", help="builtin kernel name, e.g. upsilon or psi_alpha(-0.5)")
            p.add_argument("--kernel-p", help="weight expression in u for a custom kernel")
            p.add_argument("--t0", type=float, help="domain endpoint for --kernel-p")

    p = sub.add_parser("classify", help="class membership verdicts")
    common(p)
    p.add_argument("--order", type=int, default=6)
    p.set_defaults(func=_cmd_classify)

    for verb, iterate_only in (("map", False), ("iterate", True)):
        p = sub.add_parser(verb, help="apply a mapping kernel to the triplet")
        common(p, with_kernel=True)
        p.add_argument("--iterations", type=int, default=1 if iterate_only else 0)
        p.add_argument("--radial-csv", help="also write the mapped radial densities as CSV")
        p.set_defaults(func=lambda a, _io=iterate_only: _cmd_map(a, iterate_only=_io))

    p = sub.add_parser("bernstein", help="exponential-mixture inversion of the tilted tail")
    common(p)
    p.add_argument("--nodes", type=int, default=128)
    p.add_argument("--u-min", type=float, default=-4.0)
    p.add_argument("--u-max", type=float, default=4.0)
    p.add_argument("--u-points", type=int, default=161)
    p.add_argument("--out-prefix", default="bernstein")
    p.set_defaults(func=_cmd_bernstein)

    p = sub.add_parser("simulate", help="sample the weighted integral and compare CFs")
    common(p, with_kernel=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--steps", type=int, default=512)
    p.add_argument("--cutoff", type=float, default=1e-3)
    p.add_argument("--samples-out", help="write samples (CSV, or raw doubles with --binary)")
    p.add_argument("--binary", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="numerical identity checks")
    common(p)
    p.add_argument("--identity", choices=sorted(_IDENTITIES), required=True)
    p.add_argument("--kernels", help="comma-separated kernel names where applicable")
    p.add_argument("--m", type=int, default=0, help="moment order for the log-moment identity")
    p.add_argument("--alpha", type=float, default=1.0, help="index for the fixed-point check")
    p.add_argument("--scale", type=float, default=1.0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("stable", help="build a stable-law triplet")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--direction", action="append", required=True, help="comma-separated coordinates")
    p.add_argument("--weight", action="append")
    p.add_argument("--tau", help="comma-separated shift vector")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_stable)
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (SchemaError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except LevyMapsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
