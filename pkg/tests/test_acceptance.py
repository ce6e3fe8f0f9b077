"""Acceptance gate: the package's headline guarantees, one test each.

Each test pins the tolerance it checks; the terminal summary prints one
PASS/FAIL line per criterion.  Run with `pytest tests/test_acceptance.py -v`.
"""

import csv
import io
import subprocess
import sys
import threading
import time
from dataclasses import replace

import numpy as np
import pytest

import f16_ref as ref
import swm_ref
from flexprec import half
from flexprec.half import DEFAULT_POLICY, RoundingPolicy
from flexprec.kernels import axpy_inplace
from flexprec.netbench import (
    FakeClock,
    LocalFabric,
    NetBenchConfig,
    Transport,
    allreduce,
    gatherv,
    pingpong,
    reduce,
    serial_gatherv_reference,
    serial_reduce_reference,
)
from flexprec.scalars import ARITHMETIC_METHODS, ScalarKind, get_ops
from flexprec.sherlog import (
    LogHistogram,
    SherlogScalar,
    subnormal_fraction,
    suggest_scale,
)
from flexprec.swm import (
    SwmParams,
    _Model,
    compensated_update,
    rk4_premultiplied,
    run_simulation,
)

FUSED = RoundingPolicy(muladd_mode="fused")
SEED = 42


def _bits(x):
    return np.asarray(x).view(np.uint16)


def _sweep_operands(n=10**6):
    rng = np.random.default_rng(SEED)
    a = rng.integers(0, 1 << 16, n, dtype=np.uint16)
    b = rng.integers(0, 1 << 16, n, dtype=np.uint16)
    c = rng.integers(0, 1 << 16, n, dtype=np.uint16)
    return a, b, c


def test_c01_bit_roundtrip():
    """All 65536 binary16 bit patterns survive f16 -> f64 -> f16
    identically (NaNs by class); runtime under 1 s."""
    start = time.perf_counter()
    pats = np.arange(1 << 16, dtype=np.uint16).view(np.float16)
    back = _bits(half.encode(half.decode(pats)))
    elapsed = time.perf_counter() - start

    bits = _bits(pats)
    nan_mask = (bits & 0x7FFF) > 0x7C00
    assert np.array_equal(back[~nan_mask], bits[~nan_mask])
    assert np.all((back[nan_mask] & 0x7FFF) > 0x7C00)
    assert elapsed < 1.0, "round trip took %.3fs" % elapsed


def test_c02_arithmetic_oracle():
    """10^6 seeded operand pairs per op bit-match the independent
    integer-arithmetic oracle for add/sub/mul/div/fma, plus a pinned
    triple where fused and double-rounded muladd diverge; under 30 s."""
    start = time.perf_counter()
    a, b, c = _sweep_operands()
    af, bf, cf = (x.view(np.float16) for x in (a, b, c))

    pairs = [("add", ref.ref_add_vec), ("sub", ref.ref_sub_vec),
             ("mul", ref.ref_mul_vec), ("div", ref.ref_div_vec)]
    for name, oracle in pairs:
        got = _bits(getattr(half, name)(af, bf))
        assert np.array_equal(got, oracle(a, b)), name

    got = _bits(half.muladd(af, bf, cf, FUSED))
    assert np.array_equal(got, ref.ref_fma_scalar_sweep(a, b, c))
    got = _bits(half.muladd(af, bf, cf))  # default double rounding
    assert np.array_equal(got, ref.ref_add_vec(ref.ref_mul_vec(a, b), c))

    # 1 + 2^-10 squared, minus roughly 1: the product's sticky bits
    # survive a single rounding but die in two
    ta, tb, tc = (np.uint16(x).view(np.float16)
                  for x in (0x3C01, 0x3C01, 0x9001))
    assert int(_bits(half.muladd(ta, tb, tc, FUSED))) == 0x3C02
    assert int(_bits(half.muladd(ta, tb, tc))) == 0x3C01

    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, "oracle sweep took %.1fs" % elapsed


def test_c03_flush_to_zero():
    """With flushing on, the same 10^6-pair sweep yields zero
    subnormal-classified results."""
    a, b, c = _sweep_operands()
    af, bf, cf = (x.view(np.float16) for x in (a, b, c))
    flush = RoundingPolicy(flush_subnormals=True)
    flush_fused = RoundingPolicy(flush_subnormals=True, muladd_mode="fused")

    outs = [getattr(half, name)(af, bf, flush)
            for name in ("add", "sub", "mul", "div")]
    outs.append(half.muladd(af, bf, cf, flush))
    outs.append(half.muladd(af, bf, cf, flush_fused))
    for out in outs:
        mag = _bits(out) & 0x7FFF
        assert int(((mag > 0) & (mag < 0x0400)).sum()) == 0


def test_c04_axpy_bit_exactness():
    """axpy equals the per-element reference bitwise for lengths 0-1000
    at all three kinds; identity and zero cases are exact."""
    lengths = [0, 1, 2, 3, 7, 16, 63, 128, 333, 777, 1000]
    rng = np.random.default_rng(SEED)
    for kind in (ScalarKind.F64, ScalarKind.F32, ScalarKind.F16):
        ops = get_ops(kind)
        for n in lengths:
            a = ops.asarray(rng.standard_normal())
            x = ops.asarray(rng.standard_normal(n))
            y = ops.asarray(rng.standard_normal(n))
            expect = y.copy()
            for i in range(n):
                expect[i:i + 1] = ops.muladd(a, x[i:i + 1], y[i:i + 1])
            got = y.copy()
            axpy_inplace(ops, a, x, got)
            assert np.array_equal(_view_bits(got), _view_bits(expect))

        # a=0 and x=0 leave y untouched; a=1 adds x once
        x = ops.asarray(rng.standard_normal(64))
        y0 = ops.asarray(rng.standard_normal(64))
        y = y0.copy()
        axpy_inplace(ops, ops.asarray(0.0), x, y)
        assert np.array_equal(_view_bits(y), _view_bits(y0))
        y = y0.copy()
        axpy_inplace(ops, ops.asarray(2.0), ops.zeros(64), y)
        assert np.array_equal(_view_bits(y), _view_bits(y0))
        y = y0.copy()
        axpy_inplace(ops, ops.asarray(1.0), x, y)
        assert np.array_equal(_view_bits(y), _view_bits(ops.add(y0, x)))


def _view_bits(arr):
    kind_bytes = arr.dtype.itemsize
    return arr.view({8: np.uint64, 4: np.uint32, 2: np.uint16}[kind_bytes])


class _CountingOps:
    """Pass-through ops wrapper tallying result elements per method."""

    def __init__(self, inner, counts):
        self._inner = inner
        self._counts = counts

    def __getattr__(self, name):
        attr = getattr(self._inner, name)
        if name not in ARITHMETIC_METHODS:
            return attr

        def counted(*args):
            out = attr(*args)
            self._counts[name] = self._counts.get(name, 0) + out.size
            return out
        return counted


def test_c05_sherlog_transparency():
    """Recording magnitudes changes nothing: the instrumented 64x32 F64
    run is bitwise identical to the plain run, and the histogram total
    equals the number of recorded arithmetic result elements."""
    p = SwmParams(nx=64, ny=32, n_steps=20)
    plain = run_simulation(p, ScalarKind.F64, rng=np.random.default_rng(SEED))
    hist = LogHistogram()
    counts = {}
    recorded = run_simulation(
        p, ScalarKind.F64, rng=np.random.default_rng(SEED), recorder=hist,
        instrument=lambda ops: _CountingOps(ops, counts))
    for field in ("u", "v", "eta"):
        assert np.array_equal(getattr(plain, field).view(np.uint64),
                              getattr(recorded, field).view(np.uint64))
    assert hist.total == sum(counts.values()) > 0

    # the scalar wrapper is equally invisible
    h = LogHistogram()
    x = SherlogScalar(1.5, h)
    y = (x * 3.0 - 0.25) / 2.0
    assert float(y) == (1.5 * 3.0 - 0.25) / 2.0
    assert h.total == 3


def test_c06_scaling_invariance():
    """Power-of-two state scaling is invisible after unscaling: F64
    linear runs at s=1 and s=2^10 match bitwise after 100 steps; the
    nonlinear runs agree to relative 1e-12."""
    for nonlinear, exact in ((False, True), (True, False)):
        p1 = SwmParams(nx=64, ny=32, n_steps=100, nonlinear=nonlinear)
        ps = replace(p1, scale_s=2.0 ** 10)
        r1 = run_simulation(p1, ScalarKind.F64,
                            rng=np.random.default_rng(SEED))
        rs = run_simulation(ps, ScalarKind.F64,
                            rng=np.random.default_rng(SEED))
        if exact:
            assert np.array_equal(r1.eta.view(np.uint64),
                                  rs.eta.view(np.uint64))
        else:
            denom = np.max(np.abs(r1.eta))
            rel = np.max(np.abs(r1.eta - rs.eta)) / denom
            assert rel <= 1e-12, "nonlinear scaling relative error %g" % rel


def test_c07_rescaling_prevents_subnormals():
    """The histogram-suggested power-of-two scale drops the binary16
    run's subnormal result fraction below 1e-4, strictly under the
    unscaled run's fraction."""
    p = SwmParams(nx=64, ny=32, nonlinear=False, r_bottom=0.0, nu4=0.0,
                  n_steps=100, compensated=False)
    recon = LogHistogram()
    run_simulation(p, ScalarKind.F64, rng=np.random.default_rng(SEED),
                   recorder=recon)
    s_hat = suggest_scale(recon)
    assert s_hat > 1.0  # this configuration lives well below unit scale

    h1 = LogHistogram()
    run_simulation(p, ScalarKind.F16, rng=np.random.default_rng(SEED),
                   recorder=h1)
    frac_unscaled = subnormal_fraction(h1)

    hs = LogHistogram()
    run_simulation(replace(p, scale_s=s_hat), ScalarKind.F16,
                   rng=np.random.default_rng(SEED), recorder=hs)
    frac_scaled = subnormal_fraction(hs)

    assert frac_scaled < 1e-4, "scaled fraction %g" % frac_scaled
    assert frac_scaled < frac_unscaled


def test_c08_compensated_accumulation():
    """Accumulating 512 unit increments onto 2048 in binary16: the
    compensated sum's error is at most 1/100 of the uncompensated
    error; runtime under 1 s."""
    start = time.perf_counter()
    ops = get_ops(ScalarKind.F16)
    delta = ops.asarray([1.0])
    target = 2048.0 + 512.0

    plain = ops.asarray([2048.0])
    comp = ops.asarray([2048.0])
    carry = ops.zeros(1)
    for _ in range(512):
        plain = ops.add(plain, delta)
        comp, carry = compensated_update(ops, comp, carry, delta)

    err_plain = abs(float(plain[0]) - target)
    err_comp = abs(float(comp[0]) - target)
    elapsed = time.perf_counter() - start
    assert err_plain > 0  # the tie-to-even stall this guards against
    assert err_comp <= err_plain / 100.0
    assert elapsed < 1.0, "accumulation took %.2fs" % elapsed


def test_c09_mass_conservation():
    """1000 F64 steps at 64x32 move the mean surface displacement by at
    most 1e-12 relative; runtime under 10 s."""
    start = time.perf_counter()
    p = SwmParams(nx=64, ny=32, n_steps=1000)
    res = run_simulation(p, ScalarKind.F64, rng=np.random.default_rng(SEED),
                         diag_every=p.n_steps)
    elapsed = time.perf_counter() - start
    first, last = res.diagnostics[0], res.diagnostics[-1]
    drift = abs(last.mean_eta - first.mean_eta) / abs(first.mean_eta)
    assert drift <= 1e-12, "relative mean drift %g" % drift
    assert elapsed < 10.0, "run took %.1fs" % elapsed


def test_c10_precision_ladder():
    """After 100 nonlinear steps at 64x32, surface RMSE against the F64
    baseline orders as expected: f32 < f16, both finite, and the mixed
    kind is no worse than pure f16."""
    p = SwmParams(nx=64, ny=32, n_steps=100)
    eta = {}
    for kind in (ScalarKind.F64, ScalarKind.F32, ScalarKind.F16,
                 ScalarKind.F16_F32):
        eta[kind] = run_simulation(
            p, kind, rng=np.random.default_rng(SEED)).eta

    def rmse(kind):
        return float(np.sqrt(np.mean((eta[kind] - eta[ScalarKind.F64]) ** 2)))

    r32, r16, rmix = (rmse(k) for k in (ScalarKind.F32, ScalarKind.F16,
                                        ScalarKind.F16_F32))
    assert np.isfinite(r32) and np.isfinite(r16) and np.isfinite(rmix)
    assert r32 < r16, "f32 rmse %g not below f16 rmse %g" % (r32, r16)
    assert rmix <= r16, "mixed rmse %g above f16 rmse %g" % (rmix, r16)


def test_c11_stencil_oracle():
    """Model tendencies and one RK4 step on an 8x8 grid agree with the
    directly indexed loop oracle to relative 1e-14 in F64."""
    for nonlinear in (False, True):
        p = SwmParams(nx=8, ny=8, Lx=8e5, Ly=8e5, nonlinear=nonlinear,
                      n_steps=1)
        rng = np.random.default_rng(SEED)
        u = rng.standard_normal((p.nx + 1, p.ny)) * 0.01
        v = rng.standard_normal((p.nx, p.ny + 1)) * 0.01
        eta = rng.standard_normal((p.nx, p.ny)) * (0.01 * p.H)
        u[0, :] = u[-1, :] = 0.0
        v[:, 0] = v[:, -1] = 0.0

        ops = get_ops(ScalarKind.F64)
        model = _Model(p, ops, 1.0)
        got_rhs = model.rhs((u, v, eta))
        ref_rhs = swm_ref.ref_rhs(u, v, eta, p, 1.0)
        for g, r in zip(got_rhs, ref_rhs):
            np.testing.assert_allclose(g, r, rtol=1e-14, atol=0.0)

        got_step = rk4_premultiplied(ops, (u, v, eta), model.rhs)
        ref_step = swm_ref.ref_rk4_delta(u, v, eta, p, 1.0)
        for g, r in zip(got_step, ref_step):
            np.testing.assert_allclose(g, r, rtol=1e-14, atol=0.0)


class _AdvanceOnRecv(Transport):
    def __init__(self, inner, clock, step_ns):
        self.inner = inner
        self.clock = clock
        self.step_ns = step_ns

    def send(self, dest, buf):
        self.inner.send(dest, buf)

    def recv(self, src):
        buf = self.inner.recv(src)
        self.clock.advance(self.step_ns)
        return buf

    def rank(self):
        return self.inner.rank()

    def size(self):
        return self.inner.size()


def _run_ranks(fns):
    errors = []
    out = [None] * len(fns)

    def wrap(i):
        try:
            out[i] = fns[i]()
        except BaseException as exc:
            errors.append(exc)

    threads = [threading.Thread(target=wrap, args=(i,))
               for i in range(len(fns))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return out


def test_c12_netbench_closed_form_and_oracles():
    """Scripted-clock pingpong latency and throughput equal their
    closed forms exactly; binomial collectives equal serial references
    for 2, 3, 4, and 8 ranks including a custom operator; under 10 s."""
    start = time.perf_counter()

    # 10 reps at 1024 bytes, clock advancing 1000 ns per measured recv:
    # latency = 10*1000/(2*10) ns = 0.5 us; throughput = 1024/0.5 = 2048
    fab = LocalFabric(2)
    clk = FakeClock()
    e0, e1 = fab.endpoints()
    cfg = NetBenchConfig(msg_sizes=[0, 1024], warmup_iters=2, fixed_reps=10)
    rows = pingpong([_AdvanceOnRecv(e0, clk, 1000), e1], cfg, clk)
    assert rows[0].t_avg_us == 0.5 and rows[0].throughput_MBps is None
    assert rows[1].t_min_us == rows[1].t_avg_us == rows[1].t_max_us == 0.5
    assert rows[1].throughput_MBps == 2048.0

    def custom(x, y):
        return x + y + 1.0

    for n in (2, 3, 4, 8):
        datas = [np.random.default_rng([SEED, n, r]).standard_normal(17)
                 for r in range(n)]
        for op in ("sum", "max", custom):
            fab = LocalFabric(n, timeout_s=10.0)
            ts = fab.endpoints()
            got = _run_ranks([
                (lambda t=t, d=d: reduce(t, d, op))
                for t, d in zip(ts, datas)])
            want = serial_reduce_reference(datas, op)
            assert np.array_equal(got[0], want), (n, op)

            fab = LocalFabric(n, timeout_s=10.0)
            ts = fab.endpoints()
            all_got = _run_ranks([
                (lambda t=t, d=d: allreduce(t, d, op))
                for t, d in zip(ts, datas)])
            assert all(np.array_equal(g, want) for g in all_got), (n, op)

        counts = [d.size for d in datas]
        fab = LocalFabric(n, timeout_s=10.0)
        ts = fab.endpoints()
        gv = _run_ranks([
            (lambda t=t, d=d: gatherv(t, d, counts))
            for t, d in zip(ts, datas)])
        assert np.array_equal(gv[0], serial_gatherv_reference(datas))

    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, "netbench checks took %.1fs" % elapsed


def _cli(args):
    proc = subprocess.run([sys.executable, "-m", "flexprec.cli"] + args,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def _columns(text, picks):
    rows = list(csv.reader(io.StringIO(text)))
    return [[row[i] for i in picks] for row in rows]


def test_c13_cli_determinism():
    """Every subcommand, run twice with the same --seed, reproduces all
    non-timing CSV columns byte for byte."""
    cases = [
        # argv, indices of non-timing columns (None = whole document)
        (["swm", "run", "--nx", "16", "--ny", "8", "--steps", "4",
          "--seed", "11"], None),
        (["sherlog", "report", "--nx", "16", "--ny", "8", "--steps", "3",
          "--seed", "11"], None),
        (["axpy-bench", "--kind", "f64", "--min-exp", "4", "--max-exp",
          "6", "--seed", "11"], (0, 1)),
        (["swm", "bench", "--kinds", "f64,f32", "--sizes", "16x8",
          "--horizon", "5", "--seed", "11"], (0, 1, 2, 3, 6, 8)),
        (["netbench", "--op", "allreduce", "--ranks", "2", "--sizes",
          "0,64", "--reps", "5", "--seed", "11"], (0, 1, 2)),
    ]
    for argv, picks in cases:
        first, second = _cli(argv), _cli(argv)
        if picks is None:
            assert first == second, argv
        else:
            assert _columns(first, picks) == _columns(second, picks), argv
