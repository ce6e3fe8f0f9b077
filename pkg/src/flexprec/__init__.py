"""flexprec: precision-flexible numerics with magnitude diagnostics.

Software binary16 arithmetic with controllable rounding, a scalar-kind
contract that lets kernels and a shallow-water model run at 64/32/16-bit
or mixed precision, logarithmic magnitude histograms for picking safe
power-of-two rescalings, compensated time integration, and small
benchmark harnesses (axpy, message passing) with CSV/SVG reporting.
"""

from .half import (
    CANONICAL_NAN_BITS,
    DEFAULT_POLICY,
    FpClass,
    Half16,
    MAX_FINITE,
    MIN_NORMAL,
    MIN_SUBNORMAL,
    RoundingPolicy,
    classify,
    f16_add,
    f16_div,
    f16_mul,
    f16_muladd,
    f16_sub,
    round_f64_to_f16,
)
from .kernels import BenchRecord, ResourceLimitError, axpy_inplace, bench_axpy
from .netbench import (
    FakeClock,
    LocalFabric,
    NetBenchConfig,
    NetRow,
    SystemClock,
    Transport,
    allreduce,
    bcast,
    collective_bench,
    gatherv,
    pingpong,
    reduce,
)
from .precision import HARDWARE_CAVEAT, SweepRow, precision_sweep
from .scalars import (
    F16Ops,
    F32Ops,
    F64Ops,
    ScalarKind,
    ScalarOps,
    get_ops,
    parse_kind,
)
from .sherlog import (
    LogHistogram,
    SherlogOps,
    SherlogScalar,
    subnormal_fraction,
    suggest_scale,
)
from .swm import (
    DiagRow,
    NumericalBlowupError,
    RunResult,
    SwmParams,
    SwmState,
    compensated_update,
    load_snapshot,
    run_simulation,
    save_snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "CANONICAL_NAN_BITS",
    "DEFAULT_POLICY",
    "FpClass",
    "Half16",
    "MAX_FINITE",
    "MIN_NORMAL",
    "MIN_SUBNORMAL",
    "RoundingPolicy",
    "classify",
    "f16_add",
    "f16_div",
    "f16_mul",
    "f16_muladd",
    "f16_sub",
    "round_f64_to_f16",
    "F16Ops",
    "F32Ops",
    "F64Ops",
    "ScalarKind",
    "ScalarOps",
    "get_ops",
    "parse_kind",
    "LogHistogram",
    "SherlogOps",
    "SherlogScalar",
    "subnormal_fraction",
    "suggest_scale",
    "BenchRecord",
    "ResourceLimitError",
    "axpy_inplace",
    "bench_axpy",
    "DiagRow",
    "NumericalBlowupError",
    "RunResult",
    "SwmParams",
    "SwmState",
    "compensated_update",
    "load_snapshot",
    "run_simulation",
    "save_snapshot",
    "HARDWARE_CAVEAT",
    "SweepRow",
    "precision_sweep",
    "FakeClock",
    "LocalFabric",
    "NetBenchConfig",
    "NetRow",
    "SystemClock",
    "Transport",
    "allreduce",
    "bcast",
    "collective_bench",
    "gatherv",
    "pingpong",
    "reduce",
    "__version__",
]
