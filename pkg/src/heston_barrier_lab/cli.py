"""Command-line entry point ``hbl``.

Every experiment writes a CSV whose leading ``#`` lines record the package
version and the full run configuration (thread count and output path
excepted, since neither affects results).  Any flag can also be supplied
through an ``HBL_<FLAG>`` environment variable, e.g. ``HBL_PATHS=20000``;
explicit flags win.

Exit codes: 0 success, 1 model-hypothesis violation or failed selftest,
2 invalid invocation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

from . import __version__, acceptance, bridge_lab, error_lab, estimators, schemes
from . import grid_paths as gp
from .model import PARAM_KEYS, HestonParams, RegimeError, load_params, preset


@dataclass
class RunConfig:
    subcommand: str
    preset: str | None
    params: dict | None
    steps: list[int]
    steps_fine: list[int]
    paths: int
    seed: int
    refine: int
    scheme: str = "euler"
    bridge_paths: int = 0
    threads: int = field(default=1, compare=False)
    out: str | None = field(default=None, compare=False)

    def header(self) -> str:
        cfg = {k: v for k, v in asdict(self).items() if k not in ("threads", "out")}
        return (
            f"# heston_barrier_lab {__version__}\n"
            f"# seed: {self.seed}\n"
            f"# config: {json.dumps(cfg, sort_keys=True)}\n"
        )


def _int_list(text: str) -> list[int]:
    try:
        values = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _env(name: str, default):
    return os.environ.get(f"HBL_{name.upper().replace('-', '_')}", default)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=("high", "unit", "low"), default=_env("preset", None))
    common.add_argument("--config", default=_env("config", None),
                        help="key=value parameter file applied over the preset; flags override both")
    for key in PARAM_KEYS:
        common.add_argument(f"--{key}", type=float, default=_env(key, None))
    common.add_argument("--steps", type=_int_list, default=_env("steps", None),
                        help="comma-separated coarse step counts")
    common.add_argument("--steps-fine", type=_int_list, default=_env("steps_fine", None))
    common.add_argument("--paths", type=_positive_int, default=_env("paths", 100_000))
    common.add_argument("--refine", type=int, default=_env("refine", None))
    common.add_argument("--seed", type=int, default=_env("seed", 0))
    common.add_argument("--threads", type=_positive_int, default=_env("threads", 1))
    common.add_argument("--out", default=_env("out", None))

    parser = argparse.ArgumentParser(prog="hbl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    rates = sub.add_parser("rates", parents=[common], help="strong L1 errors and fitted orders")
    rates.add_argument("--scheme", choices=("euler", "reference"), default=_env("scheme", "euler"))
    rates.add_argument("--dump-paths", default=_env("dump_paths", None),
                       help="write the first paths' trajectories on the coarsest grid to this CSV")
    barrier = sub.add_parser("barrier", parents=[common], help="Euler X-error against c N^-1/2")
    barrier.add_argument("--bridge-paths", type=int, default=_env("bridge_paths", 0))
    sub.add_parser("bridge-check", parents=[common], help="bridge law identity and T/4 floor")
    sub.add_parser("cc", parents=[common], help="Clark-Cameron error table")
    sub.add_parser("decompose", parents=[common], help="X_T reconstruction gap table")
    sub.add_parser("moments", parents=[common], help="CIR marginal oracle checks")
    selftest = sub.add_parser("selftest", help="run the acceptance checks")
    tier = selftest.add_mutually_exclusive_group()
    tier.add_argument("--quick", dest="tier", action="store_const", const="quick")
    tier.add_argument("--full", dest="tier", action="store_const", const="full")
    selftest.set_defaults(tier="quick")
    return parser


_DEFAULT_STEPS = {
    "rates": list(error_lab.DEFAULT_STEPS),
    "barrier": list(error_lab.DEFAULT_STEPS),
    "bridge-check": [8],
    "cc": [4, 16, 64],
    "decompose": list(error_lab.DEFAULT_STEPS),
    "moments": [],
}
_DEFAULT_FINE = {"decompose": [2**10, 2**12, 2**14]}


def resolve_params(args) -> tuple[str | None, HestonParams]:
    """Preset, then config file, then per-parameter flags; label is None once customised."""
    name = args.preset or "high"
    p = preset(name)
    if args.config:
        p = load_params(args.config, p)
    p = p.with_overrides(**{k: getattr(args, k) for k in PARAM_KEYS})
    return (name if p == preset(name) else None), p


def make_config(args, p: HestonParams, name: str | None) -> RunConfig:
    cmd = args.subcommand
    steps = args.steps if args.steps is not None else _DEFAULT_STEPS[cmd]
    fine = args.steps_fine if args.steps_fine is not None else _DEFAULT_FINE.get(cmd, [error_lab.DEFAULT_FINE])
    refine = args.refine if args.refine is not None else 10
    return RunConfig(
        subcommand=cmd,
        preset=name,
        params=p.as_dict(),
        steps=[int(s) for s in steps],
        steps_fine=[int(s) for s in fine],
        paths=int(args.paths),
        seed=int(args.seed),
        refine=int(refine),
        scheme=getattr(args, "scheme", "euler"),
        bridge_paths=int(getattr(args, "bridge_paths", 0)),
        threads=int(args.threads),
        out=args.out,
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def write_csv(cfg: RunConfig, columns, rows, stream=None) -> None:
    buf = io.StringIO()
    buf.write(cfg.header())
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        (stream or sys.stdout).write(text)


RATE_COLUMNS = [
    "preset", "nu", "N", "N_f", "M", "err_x", "se_x", "err_v", "se_v", "err_l1", "se_l1",
    "floor_c_over_sqrtN", "slope_running",
]


def _rate_rows(cfg: RunConfig, p: HestonParams, reports):
    c = error_lab.barrier_constant(p)
    slopes = error_lab.running_slopes(reports)
    label = cfg.preset or "custom"
    for r, s in zip(reports, slopes):
        yield [label, p.nu, r.N, r.N_f, r.M, r.err_x, r.se_x, r.err_v, r.se_v, r.err_l1, r.se_l1,
               c / math.sqrt(r.N), s]


def cmd_rates(cfg: RunConfig, p: HestonParams) -> int:
    N_f = cfg.steps_fine[0]
    reports = error_lab.strong_errors(p, cfg.steps, N_f, cfg.paths, cfg.seed, cfg.threads,
                                      scheme=cfg.scheme)
    write_csv(cfg, RATE_COLUMNS, _rate_rows(cfg, p, reports))
    return 0


def dump_paths(cfg: RunConfig, p: HestonParams, path: str, count: int = 16) -> None:
    N = min(cfg.steps)
    N_f = cfg.steps_fine[0]
    grid_f = gp.make_grid(p.T, N_f)
    ids = range(min(count, cfg.paths))
    dW, dB = gp.increments(grid_f, ids, cfg.seed)
    dWc, dBc = gp.coarsen_increments(dW, dB, N)
    grid = gp.make_grid(p.T, N)
    traj = schemes.run_scheme(cfg.scheme, p, grid, dWc, dBc)
    with open(path, "w", newline="") as fh:
        fh.write(cfg.header())
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path_id", "k", "t_k", "xhat", "vhat"])
        for row, pid in enumerate(ids):
            for k, t in enumerate(grid.knots):
                writer.writerow([pid, k, repr(float(t)), repr(float(traj.xhat[row, k])),
                                 repr(float(traj.vhat[row, k]))])


def cmd_barrier(cfg: RunConfig, p: HestonParams) -> int:
    error_lab.check_barrier_regime(p)
    rows = error_lab.barrier_table(p, cfg.steps, cfg.steps_fine[0], cfg.paths, cfg.seed,
                                   cfg.threads, cfg.bridge_paths, min(cfg.refine, 6))
    reports = [r.report for r in rows]
    columns = RATE_COLUMNS + ["ratio", "ratio_lower", "floor_ok", "bridge_scaled", "bridge_se",
                              "lower_bound", "upper_bound"]
    out = []
    for base, r in zip(_rate_rows(cfg, p, reports), rows):
        lo, hi = r.bridge_bracket
        out.append(base + [r.ratio, r.ratio_lower, r.floor_ok, r.bridge_scaled, r.bridge_se, lo, hi])
    write_csv(cfg, columns, out)
    return 0


def cmd_bridge(cfg: RunConfig, p: HestonParams) -> int:
    rows = []
    for N in cfg.steps:
        d = bridge_lab.distribution_identity_test(cfg.paths, N, cfg.refine, cfg.seed, p.T, cfg.threads)
        rows.append([N, cfg.refine, cfg.paths, d.ks_stat, d.mean_abs_I, d.scaled_mean,
                     bridge_lab.JENSEN_FLOOR, round(bridge_lab.LYAPUNOV_CEILING, 4)])
    write_csv(cfg, ["N", "n", "M", "ks_stat", "mean_abs_I", "scaled_mean", "lower_bound",
                    "upper_bound"], rows)
    return 0


GAP_COLUMNS = ["N", "M", "estimate", "std_error", "target", "pass"]


def cmd_cc(cfg: RunConfig, p: HestonParams) -> int:
    table = estimators.clark_cameron_table(cfg.steps, cfg.paths, cfg.steps_fine[0], cfg.seed,
                                           cfg.threads)
    rows = [[r.N, r.M, r.estimate, r.std_error, r.target, r.passed()] for r in table]
    write_csv(cfg, GAP_COLUMNS, rows)
    return 0


def cmd_decompose(cfg: RunConfig, p: HestonParams) -> int:
    gaps = estimators.reconstruction_gaps(p, cfg.steps_fine, cfg.paths, cfg.seed, cfg.threads)
    rows = []
    previous = float("nan")
    for g in gaps:
        # each refinement must shrink the gap left by the previous one
        ok = math.isnan(previous) or g.estimate < previous
        rows.append([g.N, g.M, g.estimate, g.std_error, previous, ok])
        previous = g.estimate
    write_csv(cfg, GAP_COLUMNS, rows)
    return 0


def cmd_moments(cfg: RunConfig, p: HestonParams) -> int:
    chk = schemes.marginal_check(p, cfg.paths, cfg.steps_fine[0], cfg.seed, cfg.threads)
    thr = acceptance.FULL.ks_threshold(cfg.paths)
    rows = [
        ["mean", chk.M, chk.mean, chk.mean_se, chk.mean_target,
         abs(chk.mean - chk.mean_target) <= 3 * chk.mean_se],
        ["variance", chk.M, chk.var, chk.var_se, chk.var_target,
         abs(chk.var - chk.var_target) <= 3 * chk.var_se],
        ["ks_reference_vs_exact", chk.M, chk.ks_stat, float("nan"), thr, chk.ks_stat < thr],
    ]
    write_csv(cfg, ["quantity", "M", "estimate", "std_error", "target", "pass"], rows)
    return 0


def cmd_selftest(tier_name: str) -> int:
    tier = acceptance.TIERS[tier_name]
    results = acceptance.run_all(tier)
    failed = [r for r in results if not (r.passed and r.within_time)]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed ({tier.name} tier)")
    return 1 if failed else 0


COMMANDS = {
    "rates": cmd_rates,
    "barrier": cmd_barrier,
    "bridge-check": cmd_bridge,
    "cc": cmd_cc,
    "decompose": cmd_decompose,
    "moments": cmd_moments,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "selftest":
        return cmd_selftest(args.tier)
    try:
        name, p = resolve_params(args)
        cfg = make_config(args, p, name)
        if args.subcommand == "decompose":
            p.require_lamperti()
        code = COMMANDS[args.subcommand](cfg, p)
        if args.subcommand == "rates" and getattr(args, "dump_paths", None):
            dump_paths(cfg, p, args.dump_paths)
        return code
    except RegimeError as exc:
        print(f"hbl: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"hbl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
