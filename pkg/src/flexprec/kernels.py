"""Vector kernels and a small, honest timing harness.

The timing protocol is the usual benchmarking hygiene: warmup calls to
settle caches and allocator state, an inner repetition loop calibrated so
one sample lasts at least 10 ms, several samples, and both the minimum
(best-case, least noise) and the median reported.  Rates use the minimum.
Timings are hardware facts, so no test asserts absolute numbers; only
the deterministic columns of a benchmark record are reproducible.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from .scalars import ScalarOps

# buffer sets cycled through in cold mode so no call reuses warm lines
COLD_COPIES = 16


@dataclass(frozen=True)
class BenchRecord:
    kind: str
    size: int
    t_min_s: float
    t_median_s: float
    gflops: float


class ResourceLimitError(RuntimeError):
    """A benchmark point would exceed the configured memory cap."""


def axpy_inplace(ops: ScalarOps, a, x: np.ndarray, y: np.ndarray) -> None:
    """y[i] <- a * x[i] + y[i], elementwise through the ops contract.

    One muladd per element; the backend decides whether that is fused.
    """
    if np.shape(x) != np.shape(y):
        raise ValueError(
            "axpy length mismatch: x has shape %r, y has shape %r"
            % (np.shape(x), np.shape(y))
        )
    y[...] = ops.muladd(a, x, y)


def _calibrate(fn, min_time: float) -> int:
    iters = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(iters):
            fn()
        if time.perf_counter() - t0 >= min_time or iters >= 1 << 24:
            return iters
        iters *= 2


def bench_axpy(ops: ScalarOps, sizes, *, rng=None, samples: int = 11,
               warmup: int = 3, min_sample_s: float = 0.010,
               cold: bool = False, mem_cap_bytes: int = 2 << 30,
               on_skip=None):
    """Time axpy at each size; returns a list of BenchRecord.

    Data is drawn once per size from rng (default seeded).  In cold mode
    each call rotates through COLD_COPIES distinct buffer pairs.  A size
    whose working set would exceed mem_cap_bytes is skipped: on_skip is
    called with a message and the run continues.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    records = []
    itemsize = np.dtype(ops.dtype).itemsize
    copies = COLD_COPIES if cold else 1
    for n in sizes:
        need = 2 * n * itemsize * copies
        if need > mem_cap_bytes:
            msg = ("axpy size %d needs %d bytes (cap %d); skipped"
                   % (n, need, mem_cap_bytes))
            if on_skip is not None:
                on_skip(msg)
            continue
        a = ops.asarray(rng.uniform(0.25, 1.0))
        xs = [ops.asarray(rng.uniform(-1.0, 1.0, n)) for _ in range(copies)]
        ys = [ops.asarray(rng.uniform(-1.0, 1.0, n)) for _ in range(copies)]
        slot = [0]

        def call():
            i = slot[0]
            axpy_inplace(ops, a, xs[i], ys[i])
            slot[0] = (i + 1) % copies

        for _ in range(warmup):
            call()
        iters = _calibrate(call, min_sample_s)
        times = []
        for _ in range(samples):
            t0 = time.perf_counter()
            for _ in range(iters):
                call()
            times.append((time.perf_counter() - t0) / iters)
        t_min = min(times)
        t_med = statistics.median(times)
        gflops = (2.0 * n / t_min) / 1e9 if n > 0 and t_min > 0 else 0.0
        records.append(BenchRecord(ops.kind.token, int(n), t_min, t_med, gflops))
    return records
