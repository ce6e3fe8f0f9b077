"""Command-line entry point.

Subcommands: axpy-bench, swm run, swm bench, sherlog report, netbench.
Every command reads an optional flat config file; explicit flags beat
config entries, config beats the HALF_FLUSH_SUBNORMALS environment
variable, and the environment beats built-in defaults.

All randomness flows from --seed (default 42) through named split
streams, so two invocations with the same seed reproduce every
non-timing CSV column byte for byte.

Exit status: 0 on success, 2 for usage or configuration problems,
3 when a simulation blows up.
"""

from __future__ import annotations

import argparse
import os
import platform
import sys
from dataclasses import fields as dataclass_fields

import numpy as np

from .config import ConfigError, load_config, seed_to_int, spawn_seeds
from .half import DEFAULT_POLICY, RoundingPolicy
from .kernels import bench_axpy
from .netbench import (
    LocalFabric,
    NetBenchConfig,
    SystemClock,
    collective_bench,
    pingpong,
)
from .precision import HARDWARE_CAVEAT, precision_sweep
from .report import (
    AXPY_HEADER,
    DIAG_HEADER,
    NET_HEADER,
    SHERLOG_HEADER,
    SWEEP_HEADER,
    fig_axpy,
    fig_eta_heatmap,
    fig_sherlog,
    fig_speedup,
    save_svg,
    sherlog_rows,
    sherlog_summary,
    write_csv,
)
from .scalars import ScalarKind, get_ops, parse_kind
from .sherlog import LogHistogram
from .swm import NumericalBlowupError, SwmParams, run_simulation, save_snapshot

_SWM_FIELD_NAMES = {f.name for f in dataclass_fields(SwmParams)}


def _env_flush():
    raw = os.environ.get("HALF_FLUSH_SUBNORMALS")
    if raw is None:
        return None
    t = raw.strip().lower()
    if t in ("1", "true", "on", "yes"):
        return True
    if t in ("", "0", "false", "off", "no"):
        return False
    raise ConfigError("HALF_FLUSH_SUBNORMALS must be 0 or 1, got %r"
                      % (raw,))


def resolve_policy(args, cfg: dict) -> RoundingPolicy:
    """Rounding policy with flag > config > environment > default."""
    flush = DEFAULT_POLICY.flush_subnormals
    env = _env_flush()
    if env is not None:
        flush = env
    if "fp16.flush_subnormals" in cfg:
        flush = cfg["fp16.flush_subnormals"]
    if getattr(args, "flush_subnormals", False):
        flush = True
    muladd = cfg.get("fp16.muladd", DEFAULT_POLICY.muladd_mode)
    if getattr(args, "muladd", None):
        muladd = args.muladd
    return RoundingPolicy(flush_subnormals=flush, muladd_mode=muladd)


def build_swm_params(args, cfg: dict) -> SwmParams:
    """SwmParams from config swm.* keys, then explicit flags on top."""
    kw = {}
    for key, value in cfg.items():
        section, _, name = key.partition(".")
        if section != "swm" or name == "kind":
            continue
        if name not in _SWM_FIELD_NAMES:
            raise ConfigError("unknown model parameter %r" % (key,))
        kw[name] = value
    if isinstance(kw.get("integration_kind"), str):
        kw["integration_kind"] = parse_kind(kw["integration_kind"])
    for flag, name in (("nx", "nx"), ("ny", "ny"), ("steps", "n_steps"),
                       ("scale_s", "scale_s")):
        value = getattr(args, flag, None)
        if value is not None:
            kw[name] = value
    return SwmParams(**kw)


def _resolve_kind(args, cfg: dict, default: str = "f64") -> ScalarKind:
    token = getattr(args, "kind", None) or cfg.get("swm.kind") or default
    return parse_kind(token)


def _emit_csv(path, header, rows) -> None:
    if path in (None, "-"):
        write_csv(sys.stdout, header, rows)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_csv(fh, header, rows)


def _stamp(caveat: bool = False) -> None:
    print("# host: %s %s python-%s numpy-%s"
          % (platform.node(), platform.machine(),
             platform.python_version(), np.__version__), file=sys.stderr)
    if caveat:
        print("# " + HARDWARE_CAVEAT, file=sys.stderr)


def _parse_grid_list(text: str):
    sizes = []
    for token in text.split(","):
        token = token.strip().lower()
        try:
            nx, ny = token.split("x")
            sizes.append((int(nx), int(ny)))
        except ValueError:
            raise ConfigError("bad grid size %r, expected NXxNY" % (token,))
    return sizes


def cmd_axpy(args, cfg: dict) -> int:
    policy = resolve_policy(args, cfg)
    seeds = spawn_seeds(args.seed)
    if args.min_exp > args.max_exp:
        raise ConfigError("--min-exp %d exceeds --max-exp %d"
                          % (args.min_exp, args.max_exp))
    sizes = [2 ** e for e in range(args.min_exp, args.max_exp + 1)]
    _stamp(caveat=True)
    rows = []
    for token in args.kind.split(","):
        ops = get_ops(parse_kind(token), policy)
        rows.extend(bench_axpy(
            ops, sizes, rng=np.random.default_rng(seeds["axpy"]),
            cold=args.cold,
            on_skip=lambda msg: print("# " + msg, file=sys.stderr)))
    _emit_csv(args.csv, AXPY_HEADER, rows)
    if args.svg:
        save_svg(fig_axpy(rows), args.svg)
    return 0


def cmd_swm_run(args, cfg: dict) -> int:
    policy = resolve_policy(args, cfg)
    params = build_swm_params(args, cfg)
    kind = _resolve_kind(args, cfg)
    seeds = spawn_seeds(args.seed)
    result = run_simulation(params, kind,
                            rng=np.random.default_rng(seeds["swm"]),
                            policy=policy, diag_every=args.diag_every)
    _emit_csv(args.csv, DIAG_HEADER, result.diagnostics)
    if args.snapshot:
        save_snapshot(args.snapshot, result)
    if args.svg:
        save_svg(fig_eta_heatmap(result.eta, params.Lx, params.Ly), args.svg)
    return 0


def cmd_swm_bench(args, cfg: dict) -> int:
    policy = resolve_policy(args, cfg)
    base = build_swm_params(args, cfg)
    kinds = [parse_kind(t) for t in args.kinds.split(",")]
    sizes = _parse_grid_list(args.sizes)
    seeds = spawn_seeds(args.seed)
    _stamp(caveat=True)
    rows = precision_sweep(base, kinds, sizes, args.horizon,
                           seed=seed_to_int(seeds["swm"]), policy=policy,
                           parallel=args.parallel)
    _emit_csv(args.csv, SWEEP_HEADER, rows)
    if args.svg:
        save_svg(fig_speedup(rows), args.svg)
    return 0


def cmd_sherlog(args, cfg: dict) -> int:
    policy = resolve_policy(args, cfg)
    params = build_swm_params(args, cfg)
    kind = _resolve_kind(args, cfg, default="f16")
    seeds = spawn_seeds(args.seed)
    hist = LogHistogram()
    run_simulation(params, kind,
                   rng=np.random.default_rng(seeds["swm"]),
                   policy=policy, recorder=hist, diag_every=params.n_steps)
    _emit_csv(args.csv, SHERLOG_HEADER, sherlog_rows(hist))
    # the summary must not interleave with CSV on the same stream
    summary_stream = sys.stderr if args.csv in (None, "-") else sys.stdout
    print(sherlog_summary(hist), file=summary_stream)
    if args.svg:
        save_svg(fig_sherlog(hist), args.svg)
    return 0


def cmd_netbench(args, cfg: dict) -> int:
    seeds = spawn_seeds(args.seed)
    sizes = None
    if args.sizes:
        try:
            sizes = sorted(int(t) for t in args.sizes.split(","))
        except ValueError:
            raise ConfigError("bad --sizes %r, expected comma-separated "
                              "byte counts" % (args.sizes,))
    kw = {} if sizes is None else {"msg_sizes": sizes}
    bench_cfg = NetBenchConfig(cache_avoidance=args.cache_avoidance,
                               seed=seed_to_int(seeds["net"]),
                               fixed_reps=args.reps, **kw)
    fabric = LocalFabric(args.ranks)
    clock = SystemClock()
    _stamp()
    if args.op == "pingpong":
        rows = pingpong(fabric.endpoints(), bench_cfg, clock)
    else:
        rows = collective_bench(args.op, fabric.endpoints(),
                                args.reduce_op, bench_cfg, clock)
    _emit_csv(args.csv, NET_HEADER, rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42,
                        help="root seed for all pseudorandomness "
                             "(default 42)")
    common.add_argument("--config", metavar="PATH",
                        help="flat 'section.key = value' config file")
    common.add_argument("--flush-subnormals", action="store_true",
                        help="flush binary16 subnormal results to zero")
    common.add_argument("--muladd", choices=("fused", "double"),
                        help="binary16 muladd mode")
    common.add_argument("--csv", metavar="PATH",
                        help="write CSV to PATH instead of standard output")

    parser = argparse.ArgumentParser(
        prog="flexprec",
        description="Precision experiments: software binary16, a "
                    "shallow-water model across scalar kinds, and "
                    "message-passing microbenchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("axpy-bench", parents=[common],
                       help="time y <- a*x + y across vector lengths")
    p.add_argument("--kind", default="f64",
                   help="comma-separated scalar kinds: f16|f32|f64 "
                        "(default f64)")
    p.add_argument("--min-exp", type=int, default=4,
                   help="smallest length as a power of two (default 4)")
    p.add_argument("--max-exp", type=int, default=20,
                   help="largest length as a power of two (default 20)")
    p.add_argument("--cold", action="store_true",
                   help="rotate buffers so each call runs on cold data")
    p.add_argument("--svg", metavar="PATH",
                   help="render a throughput curve to PATH")
    p.set_defaults(func=cmd_axpy)

    swm = sub.add_parser("swm", help="shallow-water model")
    swm_sub = swm.add_subparsers(dest="swm_command", required=True)

    p = swm_sub.add_parser("run", parents=[common],
                           help="integrate and emit diagnostics CSV")
    p.add_argument("--kind", help="scalar kind (default f64)")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--steps", type=int, help="number of RK4 steps")
    p.add_argument("--scale-s", type=float,
                   help="power-of-two state scaling factor")
    p.add_argument("--diag-every", type=int, default=1,
                   help="record diagnostics every k-th step (default 1)")
    p.add_argument("--snapshot", metavar="PATH",
                   help="save final fields to PATH (.npz)")
    p.add_argument("--svg", metavar="PATH",
                   help="render the final surface as a heatmap to PATH")
    p.set_defaults(func=cmd_swm_run)

    p = swm_sub.add_parser("bench", parents=[common],
                           help="precision ladder: timings and accuracy "
                                "per scalar kind and grid size")
    p.add_argument("--kinds", default="f64,f32,f16,f16/32",
                   help="comma-separated kinds, must include f64")
    p.add_argument("--sizes", default="32x16,64x32",
                   help="comma-separated grids like 64x32,128x64")
    p.add_argument("--horizon", type=int, default=100,
                   help="steps per run (default 100)")
    p.add_argument("--parallel", action="store_true",
                   help="run concurrently; timings flagged unreliable")
    p.add_argument("--nx", type=int, help=argparse.SUPPRESS)
    p.add_argument("--ny", type=int, help=argparse.SUPPRESS)
    p.add_argument("--svg", metavar="PATH",
                   help="render speedup against grid size to PATH")
    p.set_defaults(func=cmd_swm_bench)

    sherlog = sub.add_parser("sherlog", help="magnitude histograms")
    sherlog_sub = sherlog.add_subparsers(dest="sherlog_command",
                                         required=True)
    p = sherlog_sub.add_parser(
        "report", parents=[common],
        help="histogram every arithmetic result of a model run")
    p.add_argument("--kind", help="scalar kind to instrument (default f16)")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--scale-s", type=float)
    p.add_argument("--svg", metavar="PATH",
                   help="render the exponent histogram to PATH")
    p.set_defaults(func=cmd_sherlog)

    p = sub.add_parser("netbench", parents=[common],
                       help="message-passing microbenchmarks over "
                            "in-process ranks")
    p.add_argument("--op", default="pingpong",
                   choices=("pingpong", "reduce", "allreduce", "gatherv"))
    p.add_argument("--ranks", type=int, default=2)
    p.add_argument("--sizes",
                   help="comma-separated message sizes in bytes "
                        "(default 0 and powers of two up to 4 MiB)")
    p.add_argument("--cache-avoidance", action="store_true",
                   help="rotate through disjoint buffer copies")
    p.add_argument("--reps", type=int,
                   help="fixed repetition count overriding the schedule")
    p.add_argument("--reduce-op", default="sum", choices=("sum", "max"),
                   help="reduction operator (default sum)")
    p.set_defaults(func=cmd_netbench)

    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config) if args.config else {}
        return args.func(args, cfg)
    except ConfigError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except NumericalBlowupError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    entry()
