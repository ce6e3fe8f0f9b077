"""Message-passing benchmark engine over a pluggable byte transport.

The measurement protocols (pingpong, reduce, allreduce, gatherv) are
written against a small Transport contract, so they run identically over
the in-process fabric here or any adapter somebody wires up later.  The
in-process fabric gives each ordered rank pair its own FIFO queue, which
makes delivery deterministic and lets the collectives be checked against
serial oracles that replay the exact combine bracketing.

Clocks are injectable: benchmarks read a monotonic nanosecond counter
through the Clock contract, so tests can script time instead of
measuring it.

Reductions combine binary64 vectors.  Custom operators are applied with
a fixed bracketing along the binomial tree (low rank on the left);
commutativity and associativity are the caller's responsibility, and the
serial references replay the same bracketing rather than assuming
either.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

# disjoint buffer copies rotated through when cache avoidance is on
ROTATION_COPIES = 16

REDUCE_OPS = {"sum": np.add, "max": np.maximum}


class TransportError(RuntimeError):
    """Delivery failure: unknown route, timeout, or closed fabric."""


class IntegrityError(RuntimeError):
    """A received payload did not match the expected bytes."""


class ProtocolError(RuntimeError):
    """Message sizes disagree with the declared counts."""


class CorrectnessError(RuntimeError):
    """A collective produced a result differing from the serial oracle."""


class Transport:
    """Point-to-point byte channel seen from one rank.

    send enqueues without blocking; recv blocks until a buffer from the
    named source arrives.  Delivery per (source, destination) pair is
    ordered, lossless, and duplicate-free.
    """

    def send(self, dest: int, buf: bytes) -> None:
        raise NotImplementedError

    def recv(self, src: int) -> bytes:
        raise NotImplementedError

    def rank(self) -> int:
        raise NotImplementedError

    def size(self) -> int:
        raise NotImplementedError


class Clock:
    """Monotonic nanosecond counter contract."""

    def now(self) -> int:
        raise NotImplementedError


class SystemClock(Clock):
    def now(self) -> int:
        return time.perf_counter_ns()


class FakeClock(Clock):
    """Scripted clock: time moves only when advance is called.

    Thread-safe; now() never advances on its own, so a test controls
    the exact schedule benchmarks observe.
    """

    def __init__(self, start_ns: int = 0):
        self._t = int(start_ns)
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            return self._t

    def advance(self, ns: int) -> None:
        if ns < 0:
            raise ValueError("time cannot move backwards")
        with self._lock:
            self._t += int(ns)


class _LocalTransport(Transport):
    def __init__(self, fabric: "LocalFabric", rank: int):
        self._fabric = fabric
        self._rank = rank

    def send(self, dest: int, buf: bytes) -> None:
        q = self._fabric._queue(self._rank, dest)
        q.put(buf)

    def recv(self, src: int) -> bytes:
        q = self._fabric._queue(src, self._rank)
        try:
            return q.get(timeout=self._fabric.timeout_s)
        except queue.Empty:
            raise TransportError(
                "rank %d timed out waiting for rank %d" % (self._rank, src)
            ) from None

    def rank(self) -> int:
        return self._rank

    def size(self) -> int:
        return self._fabric.n


class LocalFabric:
    """In-process fabric: one FIFO queue per ordered rank pair."""

    def __init__(self, n: int, timeout_s: float = 30.0):
        if n < 1:
            raise ValueError("fabric needs at least one rank")
        self.n = n
        self.timeout_s = timeout_s
        self._queues = {
            (s, d): queue.SimpleQueue()
            for s in range(n) for d in range(n) if s != d
        }
        self._endpoints = [_LocalTransport(self, r) for r in range(n)]

    def _queue(self, src: int, dst: int):
        try:
            return self._queues[(src, dst)]
        except KeyError:
            raise TransportError(
                "no route from rank %d to rank %d" % (src, dst)
            ) from None

    def endpoints(self) -> list:
        return list(self._endpoints)


@dataclass(frozen=True)
class NetBenchConfig:
    """Message sizes, repetition schedule, and rotation policy."""

    msg_sizes: Sequence[int] = field(
        default_factory=lambda: [0] + [2**k for k in range(23)])
    warmup_iters: int = 2
    cache_avoidance: bool = False
    seed: int = 0
    fixed_reps: Optional[int] = None

    def __post_init__(self):
        sizes = list(self.msg_sizes)
        if sizes != sorted(sizes):
            raise ValueError("msg_sizes must be sorted ascending")
        if any(s < 0 for s in sizes):
            raise ValueError("msg_sizes must be nonnegative")
        if self.fixed_reps is not None and self.fixed_reps < 1:
            raise ValueError("fixed_reps must be at least 1")

    def repetitions(self, size_bytes: int) -> int:
        """1000 reps up to 4 KiB, halving per size doubling, floor 10;
        fixed_reps short-circuits the schedule."""
        if self.fixed_reps is not None:
            return self.fixed_reps
        reps, s = 1000, 4096
        while s < size_bytes:
            reps //= 2
            s *= 2
        return max(10, reps)


@dataclass(frozen=True)
class NetRow:
    """One benchmark line (CSV column order); throughput only where the
    half-round-trip convention defines one."""

    op: str
    ranks: int
    size_bytes: int
    t_min_us: float
    t_avg_us: float
    t_max_us: float
    throughput_MBps: Optional[float]


def _payload_copies(pattern: bytes, rotate: bool) -> list:
    n = ROTATION_COPIES if rotate else 1
    return [bytes(bytearray(pattern)) for _ in range(n)]


def _buffer_copies(data: np.ndarray, rotate: bool) -> list:
    n = ROTATION_COPIES if rotate else 1
    return [data.copy() for _ in range(n)]


def _run_workers(targets) -> None:
    """Run one callable per rank in threads.

    Failures are re-raised after all workers have stopped.  A dead rank
    leaves its peers timing out, so transport errors are reported only
    when no rank failed for a more specific reason.
    """
    errors = [None] * len(targets)

    def guard(i, fn):
        def run():
            try:
                fn()
            except BaseException as exc:  # propagated after join
                errors[i] = exc
        return run

    threads = [threading.Thread(target=guard(i, fn))
               for i, fn in enumerate(targets)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    raised = [e for e in errors if e is not None]
    for exc in raised:
        if not isinstance(exc, TransportError):
            raise exc
    if raised:
        raise raised[0]


def pingpong(transports: Sequence[Transport], cfg: NetBenchConfig,
             clock: Clock) -> list:
    """IMB-style ping-pong over exactly two ranks.

    Rank 0 sends and awaits the echo; latency is total/(2*reps), the
    half-round-trip convention, and throughput = size/latency for
    nonzero sizes.  Every echoed buffer is verified inside the timed
    loop; a mismatch raises IntegrityError.
    """
    if len(transports) != 2:
        raise ValueError("pingpong requires exactly 2 ranks, got %d"
                         % len(transports))
    t0, t1 = transports
    rows = []
    for size in cfg.msg_sizes:
        reps = cfg.repetitions(size)
        pattern = np.random.default_rng([cfg.seed, size]).bytes(size)
        payloads = _payload_copies(pattern, cfg.cache_avoidance)
        measured = {}

        def sender():
            for w in range(cfg.warmup_iters):
                t0.send(1, payloads[w % len(payloads)])
                t0.recv(1)
            start = clock.now()
            for rep in range(reps):
                buf = payloads[rep % len(payloads)]
                t0.send(1, buf)
                echo = t0.recv(1)
                if echo != buf:
                    raise IntegrityError(
                        "echo mismatch at size %d rep %d" % (size, rep))
            measured["ns"] = clock.now() - start

        def echoer():
            for _ in range(cfg.warmup_iters + reps):
                t1.send(0, t1.recv(0))

        _run_workers([sender, echoer])
        latency_us = measured["ns"] / (2 * reps) / 1000.0
        thr = size / latency_us if size > 0 and latency_us > 0 else None
        rows.append(NetRow("pingpong", 2, size, latency_us, latency_us,
                           latency_us, thr))
    return rows


def reduce(t: Transport, value: np.ndarray, op) -> Optional[np.ndarray]:
    """Binomial-tree reduce to rank 0; returns the result there, None
    elsewhere.  op combines two binary64 vectors, lower rank on the
    left."""
    op = REDUCE_OPS.get(op, op) if isinstance(op, str) else op
    r, n = t.rank(), t.size()
    partial = np.asarray(value, dtype=np.float64)
    k = 1
    while k < n:
        if r & k:
            t.send(r - k, partial.tobytes())
            return None
        if r + k < n:
            other = np.frombuffer(t.recv(r + k), dtype=np.float64)
            partial = np.asarray(op(partial, other), dtype=np.float64)
        k <<= 1
    return partial


def bcast(t: Transport, value: Optional[np.ndarray]) -> np.ndarray:
    """Binomial-tree broadcast from rank 0."""
    r, n = t.rank(), t.size()
    if r == 0:
        data = np.asarray(value, dtype=np.float64)
    else:
        data = None
    k = 1
    while k < n:
        if data is not None:
            if r < k and r + k < n:
                t.send(r + k, data.tobytes())
        elif k <= r < 2 * k:
            data = np.frombuffer(t.recv(r - k), dtype=np.float64)
        k <<= 1
    return data


def allreduce(t: Transport, value: np.ndarray, op) -> np.ndarray:
    """Reduce to rank 0 then broadcast, so all ranks hold identical
    bytes."""
    return bcast(t, reduce(t, value, op))


def gatherv(t: Transport, value: np.ndarray,
            counts: Sequence[int]) -> Optional[np.ndarray]:
    """Every rank sends its (possibly unequal) chunk to rank 0, which
    returns the rank-ordered concatenation; None elsewhere.

    counts declares the element count per rank; any disagreement with
    an actual chunk raises ProtocolError.
    """
    r, n = t.rank(), t.size()
    if len(counts) != n:
        raise ProtocolError("counts has %d entries for %d ranks"
                            % (len(counts), n))
    chunk = np.asarray(value, dtype=np.float64)
    if chunk.size != counts[r]:
        raise ProtocolError("rank %d holds %d elements but declared %d"
                            % (r, chunk.size, counts[r]))
    if r != 0:
        t.send(0, chunk.tobytes())
        return None
    parts = [chunk]
    for src in range(1, n):
        got = np.frombuffer(t.recv(src), dtype=np.float64)
        if got.size != counts[src]:
            raise ProtocolError(
                "rank %d sent %d elements but declared %d"
                % (src, got.size, counts[src]))
        parts.append(got)
    return np.concatenate(parts)


def serial_reduce_reference(values: Sequence[np.ndarray], op) -> np.ndarray:
    """Replay of the binomial combine order on one thread."""
    op = REDUCE_OPS.get(op, op) if isinstance(op, str) else op
    parts = [np.asarray(v, dtype=np.float64) for v in values]
    n = len(parts)
    k = 1
    while k < n:
        for r in range(0, n - k, 2 * k):
            parts[r] = np.asarray(op(parts[r], parts[r + k]),
                                  dtype=np.float64)
        k <<= 1
    return parts[0]


def serial_gatherv_reference(values: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.asarray(v, dtype=np.float64).ravel()
                           for v in values])


def _gatherv_counts(size_bytes: int, n: int) -> list:
    base = size_bytes // 8
    return [base + r for r in range(n)]


def collective_bench(kind: str, transports: Sequence[Transport],
                     op: Union[str, Callable], cfg: NetBenchConfig,
                     clock: Clock) -> list:
    """Timed reduce / allreduce / gatherv rounds with verification.

    Element vectors are seeded binary64 of size_bytes//8 elements per
    rank (gatherv ranks additionally stagger their counts so the chunks
    are unequal).  A barrier aligns ranks before every repetition; each
    rank accumulates its own elapsed time, and the row reports
    min/avg/max of the per-rank averages.  Every repetition's result is
    checked against the serial reference; a mismatch raises
    CorrectnessError.
    """
    n = len(transports)
    if n < 2:
        raise ValueError("collectives need at least 2 ranks, got %d" % n)
    if kind not in ("reduce", "allreduce", "gatherv"):
        raise ValueError("unknown collective %r" % (kind,))

    rows = []
    for size in cfg.msg_sizes:
        reps = cfg.repetitions(size)
        elems = size // 8
        if kind == "gatherv":
            counts = _gatherv_counts(size, n)
            datas = [np.random.default_rng([cfg.seed, size, r])
                     .standard_normal(counts[r]) for r in range(n)]
            expect = serial_gatherv_reference(datas)
        else:
            counts = None
            datas = [np.random.default_rng([cfg.seed, size, r])
                     .standard_normal(elems) for r in range(n)]
            expect = serial_reduce_reference(datas, op)

        barrier = threading.Barrier(n)
        totals = [0] * n

        def worker(t, data):
            r = t.rank()
            buffers = _buffer_copies(data, cfg.cache_avoidance)
            total = 0
            for rep in range(cfg.warmup_iters + reps):
                barrier.wait()
                buf = buffers[rep % len(buffers)]
                start = clock.now()
                if kind == "reduce":
                    out = reduce(t, buf, op)
                elif kind == "allreduce":
                    out = allreduce(t, buf, op)
                else:
                    out = gatherv(t, buf, counts)
                elapsed = clock.now() - start
                if rep < cfg.warmup_iters:
                    continue
                total += elapsed
                if kind == "allreduce" or r == 0:
                    if not np.array_equal(out, expect):
                        raise CorrectnessError(
                            "%s result mismatch at size %d rep %d"
                            % (kind, size, rep))
            totals[r] = total

        _run_workers([
            (lambda tt, dd: (lambda: worker(tt, dd)))(t, d)
            for t, d in zip(transports, datas)
        ])
        avgs = [tot / reps / 1000.0 for tot in totals]
        rows.append(NetRow(kind, n, size, min(avgs),
                           sum(avgs) / n, max(avgs), None))
    return rows
