"""Command-line entry point: ``featprog <subcommand> ...``.

Exit codes: 0 ok, 2 usage/parse, 3 data, 4 capacity, 5 failed validation check.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import spin
from .dsl import FeatureProgram, parse_program
from .engine import export_features, generate
from .errors import CapacityError, FeatprogError
from .evaluation import DEFAULT_LAMBDA, format_report, make_synthetic, run_comparison
from .handcrafted import score_resemblance
from .programs import RESEMBLANCE, default_program, identity_program, resemblance_program
from .series import panel_to_csv, read_panel_csv

log = logging.getLogger("featprog")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CAPACITY, EXIT_CHECK = 0, 2, 3, 4, 5
BUILTIN = ("default", "identity")


class UsageError(FeatprogError):
    exit_code = EXIT_USAGE


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p.read_text(encoding="utf-8")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def _program(choice: str) -> FeatureProgram:
    if choice == "default":
        return default_program()
    if choice == "identity":
        return identity_program()
    return parse_program(_read(choice))


def _seed(args, fallback=None) -> int:
    seed = args.seed if args.seed is not None else fallback
    if seed is None:
        raise UsageError("--seed is required for stochastic subcommands")
    return int(seed)


# -- subcommands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    panel_text = _read(args.input)
    program = _program(args.program)
    panel = read_panel_csv(panel_text)
    matrix, report = generate(panel, program, threads=args.threads)
    _write(args.output, export_features(matrix, drop_warmup_rows=args.drop_warmup))
    if args.report:
        _write(args.report, report.to_json() + "\n")
    else:
        sys.stderr.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_program(args) -> int:
    if args.name == "default":
        prog = default_program()
    elif args.name == "identity":
        prog = identity_program()
    else:
        prog = resemblance_program(args.name, args.dtau)
    _write(args.output, prog.to_json() + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = spin.load_params(_read(args.params))
    rng = np.random.default_rng(_seed(args, cfg.seed))
    x0 = np.zeros(cfg.params.n) if args.x0 is None else np.asarray(args.x0, dtype=float)
    panel = spin.simulate_panel(rng, cfg.params, x0, args.steps, history=cfg.history,
                                schedule=cfg.schedule or None)
    _write(args.output, panel_to_csv(panel))
    return EXIT_OK


def _validation_report(params: spin.SpinGasParams, prev, prev2, steps: list[int]) -> dict:
    checks = []

    def check(name, value, tol, asserted=True):
        checks.append({"check": name, "value": value, "tolerance": tol, "asserted": asserted,
                       "passed": (value < tol) if asserted else None})

    joint = spin.build_joint(params, prev, prev2)
    cond = spin.check_node_conditionals(joint)
    check("joint normalization |sum-1|", cond.normalization_error, 1e-12)
    check("next-slice node conditionals max deviation", cond.max_dev_next, 1e-10)
    check("current-slice node conditionals max deviation", cond.max_dev_current, 1e-10,
          asserted=cond.field_only)

    # the joint's P(next | current) must factor into the per-spin Glauber product
    confs = spin.configurations(params.n)
    gamma = spin.local_field_batch(params, confs, np.broadcast_to(joint.prev, confs.shape),
                                   np.broadcast_to(joint.prev2, confs.shape))
    up, down = spin.spin_probabilities(gamma)
    product = np.prod(np.where(confs[None, :, :] > 0, up[:, None, :], down[:, None, :]), axis=2)
    check("joint P(next|current) vs per-spin product",
          float(np.abs(joint.next_given_current() - product).max()), 1e-10)

    for L in steps:
        if params.n * (L - 1) > spin.PATH_ENUM_LIMIT:
            continue
        worst = 0.0
        for start in confs:
            dist = spin.endpoint_distribution(params, start, L, prev, prev2)
            worst = max(worst, abs(float(dist.sum()) - 1.0))
        check(f"path probability normalization L={L}", worst, 1e-10)
        if params.gas_free and params.n <= 10:
            power = np.linalg.matrix_power(spin.transition_matrix(params), L)
            dev = max(float(np.abs(power[k] - spin.endpoint_distribution(
                          params, confs[k], L, prev, prev2)).max()) for k in range(len(confs)))
            check(f"path enumeration vs transition matrix power L={L}", dev, 1e-10)
    return {"n": params.n, "log_partition": joint.log_partition, "checks": checks,
            "passed": all(c["passed"] is not False for c in checks)}


def cmd_validate(args) -> int:
    if args.params:
        cfg = spin.load_params(_read(args.params))
        params = cfg.params
        prev = cfg.history.sigma_prev if cfg.history else None
        prev2 = cfg.history.sigma_prev2 if cfg.history else None
    else:
        if args.n is None:
            raise UsageError("validate needs --params or --n")
        if args.n > spin.JOINT_MAX_N:
            raise CapacityError(f"validation enumerates 2^(2N) states; N={args.n} exceeds {spin.JOINT_MAX_N}")
        rng = np.random.default_rng(_seed(args))
        params = spin.random_params(rng, args.n, gas=not args.no_gas)
        prev = rng.choice([-1.0, 1.0], args.n)
        prev2 = rng.choice([-1.0, 1.0], args.n)
    report = _validation_report(params, prev, prev2, args.steps)
    for c in report["checks"]:
        status = "PASS" if c["passed"] else ("FAIL" if c["passed"] is False else "info")
        print(f"[{status}] {c['check']}: {c['value']:.3e} (tol {c['tolerance']:.0e})")
    if args.output:
        _write(args.output, json.dumps(report, indent=2) + "\n")
    return EXIT_OK if report["passed"] else EXIT_CHECK


def cmd_evaluate(args) -> int:
    if args.synthetic:
        rng = np.random.default_rng(_seed(args))
        data = make_synthetic(rng, args.n, args.length)
        panel, targets = data.inputs, data.targets
    else:
        if not args.input:
            raise UsageError("evaluate needs --input or --synthetic")
        panel = read_panel_csv(_read(args.input))
        targets = read_panel_csv(_read(args.targets)) if args.targets else None
    report = run_comparison(panel, _program(args.basic), _program(args.program),
                            split=args.split, lam=args.lam, targets=targets)
    print(format_report(report))
    text = json.dumps(report, indent=2) + "\n"
    if args.output:
        _write(args.output, text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_resemble(args) -> int:
    panel = read_panel_csv(_read(args.input))
    res = score_resemblance(panel, args.which, args.dtau)
    print(f"{res['which']} dtau={res['dtau']}: n={res['n_compared']} "
          f"max_abs_error={res['max_abs_error']:.3e} max_rel_error={res['max_rel_error']:.3e} "
          f"R2={res['r2']:.15f} Pearson={res['pearson']:.15f}")
    if args.output:
        _write(args.output, json.dumps(res, indent=2) + "\n")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="featprog", description="Programmable feature generation for multivariate time series.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run a feature program over a panel CSV")
    g.add_argument("--input", required=True)
    g.add_argument("--program", default="default", help="'default', 'identity' or a program JSON path")
    g.add_argument("--output", help="features CSV (default stdout)")
    g.add_argument("--report", help="generation report JSON (default stderr)")
    g.add_argument("--drop-warmup", action="store_true")
    g.add_argument("--threads", type=_positive_int)
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("program", help="print a builtin program")
    p.add_argument("name", choices=BUILTIN + RESEMBLANCE)
    p.add_argument("--dtau", type=_positive_int, default=1)
    p.add_argument("--output")
    p.set_defaults(func=cmd_program)

    s = sub.add_parser("simulate", help="simulate a spin-gas panel")
    s.add_argument("--params", required=True)
    s.add_argument("--steps", type=_positive_int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--x0", type=float, nargs="+")
    s.add_argument("--output")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="enumeration checks of the spin-gas model")
    v.add_argument("--params")
    v.add_argument("--n", type=_positive_int)
    v.add_argument("--seed", type=int)
    v.add_argument("--no-gas", action="store_true", help="random params with G1 = G2 = 0")
    v.add_argument("--steps", type=_positive_int, nargs="+", default=[2, 3])
    v.add_argument("--output")
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("evaluate", help="basic vs extended features with pooled ridge")
    e.add_argument("--input")
    e.add_argument("--targets", help="aligned one-step-ahead targets CSV")
    e.add_argument("--synthetic", action="store_true")
    e.add_argument("--n", type=_positive_int, default=20)
    e.add_argument("--length", type=_positive_int, default=2000)
    e.add_argument("--seed", type=int)
    e.add_argument("--program", default="default")
    e.add_argument("--basic", default="identity")
    e.add_argument("--split", type=float, default=0.8)
    e.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    e.add_argument("--output")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("resemble", help="compare a resemblance program with its hand-crafted feature")
    r.add_argument("--which", required=True, choices=RESEMBLANCE)
    r.add_argument("--dtau", type=_positive_int, required=True)
    r.add_argument("--input", required=True)
    r.add_argument("--output")
    r.set_defaults(func=cmd_resemble)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FeatprogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
