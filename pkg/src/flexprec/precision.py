"""Precision ladder sweeps over the shallow-water model.

Runs the model across scalar kinds and grid sizes, timing each run and
comparing accuracy against the binary64 run at the same size and seed.
Timings are wall-clock on whatever host executes the sweep; absolute
numbers and speedup ratios are not comparable across machines, and
software binary16 is expected to be far slower than hardware floats.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .half import DEFAULT_POLICY, RoundingPolicy
from .scalars import ScalarKind
from .swm import NumericalBlowupError, SwmParams, run_simulation

HARDWARE_CAVEAT = (
    "speedups are host-specific: software binary16 has no hardware fast "
    "path here, so f16 rows are expected to run slower than f64, not "
    "faster; treat t_wall_s and speedup as relative to this machine only"
)


@dataclass(frozen=True)
class SweepRow:
    """One line of the kind-by-size table (CSV column order)."""

    kind: ScalarKind
    nx: int
    ny: int
    steps: int
    t_wall_s: float
    speedup: float
    rmse_eta: float
    comp_overhead: float
    status: str


def _default_comp(base: SwmParams, kind: ScalarKind) -> bool:
    if base.compensated is not None:
        return base.compensated
    return kind in (ScalarKind.F16, ScalarKind.F16_F32)


def _timed(p: SwmParams, kind: ScalarKind, seed: int,
           policy: RoundingPolicy):
    t0 = time.perf_counter()
    try:
        res = run_simulation(p, kind, rng=np.random.default_rng(seed),
                             policy=policy)
    except NumericalBlowupError:
        return time.perf_counter() - t0, None
    return time.perf_counter() - t0, res


def _run_pair(p_size: SwmParams, kind: ScalarKind, seed: int,
              policy: RoundingPolicy):
    """Timed compensated and uncompensated runs of one (kind, size)."""
    # a short untimed run first, so cold-start costs (allocator, cache)
    # do not land on whichever timed run happens to go first
    _timed(replace(p_size, compensated=False,
                   n_steps=min(p_size.n_steps, 3)), kind, seed, policy)
    t_plain, r_plain = _timed(replace(p_size, compensated=False), kind,
                              seed, policy)
    t_comp, r_comp = _timed(replace(p_size, compensated=True), kind,
                            seed, policy)
    return t_plain, r_plain, t_comp, r_comp


def precision_sweep(base_params: SwmParams,
                    kinds: Sequence[ScalarKind],
                    sizes: Sequence[tuple],
                    horizon: Optional[int] = None,
                    *,
                    seed: int = 0,
                    policy: RoundingPolicy = DEFAULT_POLICY,
                    parallel: bool = False) -> list:
    """Kind-by-size table of timings and accuracy for the model.

    Every kind at a given size starts from the identical seeded initial
    state and the size's own CFL time step (dt is re-derived per size).
    Each cell runs twice, compensated and not, giving comp_overhead =
    t_comp / t_plain - 1; t_wall_s and the reported fields come from
    the run matching the kind's resolved compensation default.  speedup
    is t_wall(F64) / t_wall(kind) at the same size, so the F64 row is
    exactly 1.  rmse_eta compares final unscaled eta against the F64
    run.  A run that blows up yields status "diverged" with NaN metric
    columns; the sweep continues.  horizon overrides n_steps (default
    200 via SwmParams is the caller's to set; None keeps base_params').

    parallel runs the cells concurrently; wall-clock readings then
    contend for the machine and every surviving row is flagged
    "timing-unreliable" instead of "ok".
    """
    kinds = list(kinds)
    if ScalarKind.F64 not in kinds:
        raise ValueError("kinds must include f64: it is the speedup and "
                         "accuracy baseline")
    steps = base_params.n_steps if horizon is None else int(horizon)

    cells = {}
    jobs = []
    for nx, ny in sizes:
        p_size = replace(base_params, nx=int(nx), ny=int(ny),
                         n_steps=steps, dt=None)
        for kind in kinds:
            jobs.append((p_size, kind))

    if parallel:
        with ThreadPoolExecutor() as pool:
            futs = {(p.nx, p.ny, kind): pool.submit(_run_pair, p, kind,
                                                    seed, policy)
                    for p, kind in jobs}
        for key, fut in futs.items():
            cells[key] = fut.result()
    else:
        for p, kind in jobs:
            cells[(p.nx, p.ny, kind)] = _run_pair(p, kind, seed, policy)

    ok_status = "timing-unreliable" if parallel else "ok"
    rows = []
    for nx, ny in sizes:
        nx, ny = int(nx), int(ny)
        base_cell = cells[(nx, ny, ScalarKind.F64)]
        bt_plain, br_plain, bt_comp, br_comp = base_cell
        if _default_comp(base_params, ScalarKind.F64):
            t_base, r_base = bt_comp, br_comp
        else:
            t_base, r_base = bt_plain, br_plain
        for kind in kinds:
            t_plain, r_plain, t_comp, r_comp = cells[(nx, ny, kind)]
            if _default_comp(base_params, kind):
                t_wall, res = t_comp, r_comp
            else:
                t_wall, res = t_plain, r_plain
            if res is None:
                rows.append(SweepRow(kind, nx, ny, steps, float("nan"),
                                     float("nan"), float("nan"),
                                     float("nan"), "diverged"))
                continue
            overhead = (t_comp / t_plain - 1.0
                        if r_plain is not None and r_comp is not None
                        else float("nan"))
            if kind is ScalarKind.F64:
                speedup, rmse = 1.0, 0.0
            elif r_base is None:
                speedup, rmse = float("nan"), float("nan")
            else:
                speedup = t_base / t_wall
                rmse = float(np.sqrt(np.mean((res.eta - r_base.eta) ** 2)))
            rows.append(SweepRow(kind, nx, ny, steps, t_wall, speedup,
                                 rmse, overhead, ok_status))
    return rows
