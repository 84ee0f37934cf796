"""Command-line entry point: ``pwcert <command> SPEC [options]``.

Exit status: 0 on success, 2 when the result is inconclusive (or a repair
finds no admissible cut positions), 1 on any error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .certifier import Certificate, basin_labels, certify, grid_points
from .genericity import ExtensionError, RepairFailed, repair
from .geometry import as_rational
from .io import (
    RunConfig,
    SpecError,
    atomic_write,
    dumps,
    emit_certificate,
    emit_repair_bundle,
    load_map_spec,
    perturbation_document,
)
from .orbits import BranchPolicy, OnSeparationLine, iterate_orbit, orbit_csv
from .pwmap import InvalidMap, OutsideDomain, PiecewiseMap, is_epsilon_perturbation, validate_map

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2

log = logging.getLogger("pwcert")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_rational(text: str) -> Fraction:
    try:
        v = as_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _point(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def parse_grid(text: str) -> tuple[list[float], list[float], list[int]]:
    """``lo:hi:n`` per axis, comma separated."""
    lo, hi, counts = [], [], []
    for part in text.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise argparse.ArgumentTypeError(f"grid axis {part!r} is not lo:hi:n")
        lo.append(float(bits[0]))
        hi.append(float(bits[1]))
        n = int(bits[2])
        if n < 1:
            raise argparse.ArgumentTypeError("grid counts must be positive")
        counts.append(n)
    return lo, hi, counts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pwcert", description="Certify finite periodicity of piecewise contractions.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, budgets=True):
        sp.add_argument("spec", help="map spec (JSON) or repair bundle")
        sp.add_argument("--out", help="output file (written atomically); default stdout")
        if budgets:
            sp.add_argument("--k-max", type=_positive_int, default=64)
            sp.add_argument("--atom-budget", type=_positive_int, default=10**6)
            sp.add_argument("--fp-tol", type=float)
            sp.add_argument("--resolution", type=_positive_rational)

    common(sub.add_parser("validate", help="check a map spec"), budgets=False)
    common(sub.add_parser("certify", help="emit a certificate or an inconclusive report"))

    sim = sub.add_parser("simulate", help="orbit CSV")
    common(sim, budgets=False)
    sim.add_argument("--x0", type=_point, action="append", help="start point 'x,y,...' (repeatable)")
    sim.add_argument("--starts", type=_positive_int, default=1, help="random starts when no --x0 is given")
    sim.add_argument("--steps", type=_positive_int, default=100)
    sim.add_argument("--branch-policy", default="lowest_id", choices=["all", "lowest_id", "error_on_S"])
    sim.add_argument("--branch-cap", type=_positive_int, default=64)
    sim.add_argument("--seed", type=int, default=0)

    bas = sub.add_parser("basin", help="cycle label per grid point, CSV")
    common(bas)
    bas.add_argument("--grid", type=parse_grid, help="lo:hi:n per axis; default B with 101 points per axis")
    bas.add_argument("--branch-cap", type=_positive_int, default=64)

    rep = sub.add_parser("repair", help="move the separation line to obtain a certifiable perturbation")
    common(rep)
    rep.add_argument("--epsilon", type=_positive_rational, required=True)

    diff = sub.add_parser("diff", help="perturbation report between two specs")
    diff.add_argument("spec")
    diff.add_argument("other")
    diff.add_argument("--epsilon", type=_positive_rational, required=True)
    diff.add_argument("--out")
    return p


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _config(args) -> RunConfig:
    return RunConfig(
        k_max=getattr(args, "k_max", 64),
        atom_budget=getattr(args, "atom_budget", 10**6),
        fp_tol=getattr(args, "fp_tol", None),
        resolution=getattr(args, "resolution", None),
        branch_policy=getattr(args, "branch_policy", "lowest_id"),
        out=args.out,
        seed=getattr(args, "seed", 0),
    )


def _certify(F: PiecewiseMap, cfg: RunConfig):
    return certify(F, k_max=cfg.k_max, atom_budget=cfg.atom_budget, fp_tol=cfg.fp_tol, resolution=cfg.resolution)


def cmd_validate(F: PiecewiseMap, args, cfg: RunConfig) -> int:
    rep = validate_map(F)
    doc = {
        "ok": rep.ok,
        "pieces": F.m,
        "dimension": F.dim,
        "lambda": F.rate_bound,
        "violations": [{"kind": v.kind, "message": v.message} for v in rep.violations],
    }
    _emit(dumps(doc), cfg.out)
    return EXIT_OK if rep.ok else EXIT_ERROR


def cmd_certify(F: PiecewiseMap, args, cfg: RunConfig) -> int:
    result = _certify(F, cfg)
    _emit(emit_certificate(result, F), cfg.out)
    return EXIT_OK if isinstance(result, Certificate) else EXIT_INCONCLUSIVE


def cmd_simulate(F: PiecewiseMap, args, cfg: RunConfig) -> int:
    if args.x0:
        starts = [np.array(x) for x in args.x0]
    else:
        rng = np.random.default_rng(cfg.seed)
        lo, hi = F.ambient.to_float()
        starts = list(rng.uniform(lo, hi, size=(args.starts, F.dim)))
    policy = BranchPolicy(cfg.branch_policy, args.branch_cap)
    branches, labels = [], []
    for s, x in enumerate(starts):
        out = iterate_orbit(F, x, args.steps, policy)
        branches.extend(out)
        labels.extend([s] * len(out))
    _emit(orbit_csv(branches, labels), cfg.out)
    return EXIT_OK


def cmd_basin(F: PiecewiseMap, args, cfg: RunConfig) -> int:
    C = _certify(F, cfg)
    if not isinstance(C, Certificate):
        log.error("certification inconclusive: %s", C.budget_exhausted)
        return EXIT_INCONCLUSIVE
    if args.grid is None:
        lo, hi = F.ambient.to_float()
        lo, hi, counts = list(lo), list(hi), [101] * F.dim
    else:
        lo, hi, counts = args.grid
        if len(lo) != F.dim:
            raise ValueError(f"grid has {len(lo)} axes, map has dimension {F.dim}")
    X = grid_points(lo, hi, counts)
    labels = basin_labels(F, C, X, cap=args.branch_cap)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{a}" for a in range(F.dim)] + ["label"])
    for x, lab in zip(X, labels):
        w.writerow([repr(float(v)) for v in x] + [int(lab)])
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def cmd_repair(F: PiecewiseMap, args, cfg: RunConfig) -> int:
    try:
        result = repair(F, args.epsilon, k_max=cfg.k_max, atom_budget=cfg.atom_budget, resolution=cfg.resolution)
    except (RepairFailed, ExtensionError) as exc:
        log.error("repair failed: %s", exc)
        return EXIT_INCONCLUSIVE
    _emit(emit_repair_bundle(result, F), cfg.out)
    return EXIT_OK


def cmd_diff(F: PiecewiseMap, args, cfg: RunConfig) -> int:
    G = load_map_spec(args.other).map
    report = is_epsilon_perturbation(F, G, args.epsilon)
    _emit(dumps(perturbation_document(report)), cfg.out)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "basin": cmd_basin,
    "repair": cmd_repair,
    "diff": cmd_diff,
}


def run_command(command: str, spec_path: str, args: argparse.Namespace) -> int:
    if command not in COMMANDS:
        log.error("unknown command %r", command)
        return EXIT_ERROR
    try:
        cfg = _config(args)
        F = load_map_spec(spec_path).map
        return COMMANDS[command](F, args, cfg)
    except SpecError as exc:
        log.error("%s", exc)
    except InvalidMap as exc:
        log.error("invalid map: %s", exc)
    except (OutsideDomain, OnSeparationLine, ValueError, OSError) as exc:
        log.error("%s", exc)
    return EXIT_ERROR


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="pwcert: %(message)s")
    return run_command(args.command, args.spec, args)


if __name__ == "__main__":
    sys.exit(main())
