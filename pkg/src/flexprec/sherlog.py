"""sherlog: logarithmic magnitude histograms of arithmetic results.

The histogram answers one question about a computation: where on the
binary exponent axis do its results live?  Every recorded finite nonzero
value lands in the bin for clamp(floor(log2 |x|), -64, 64); zeros, infs,
and NaNs are tallied separately.  From the histogram one can read off the
fraction of results that would be subnormal in a given format and a
power-of-two rescaling that centers the distribution.

Two wrappers feed it: SherlogScalar shadows a single scalar through
ordinary operator syntax, and SherlogOps shadows a whole ScalarOps
backend, recording every element of every arithmetic result.  Wrapping
never changes a value; runs are bitwise identical with and without it.
"""

from __future__ import annotations

import math

import numpy as np

from .scalars import ARITHMETIC_METHODS, ScalarOps

EXP_MIN = -64
EXP_MAX = 64
N_BINS = EXP_MAX - EXP_MIN + 1


class LogHistogram:
    """Counts of arithmetic results by binary exponent.

    bins[i] counts magnitudes with clamped floor(log2 |x|) == i + EXP_MIN.
    Not thread-safe; give each worker its own and merge afterwards.
    """

    __slots__ = ("bins", "zero_count", "inf_count", "nan_count")

    def __init__(self):
        self.bins = np.zeros(N_BINS, dtype=np.int64)
        self.zero_count = 0
        self.inf_count = 0
        self.nan_count = 0

    @property
    def total(self) -> int:
        return int(self.bins.sum()) + self.zero_count + self.inf_count + self.nan_count

    def record(self, x: float) -> None:
        """Tally one value."""
        x = float(x)
        if math.isnan(x):
            self.nan_count += 1
        elif math.isinf(x):
            self.inf_count += 1
        elif x == 0.0:
            self.zero_count += 1
        else:
            # frexp gives |x| = m * 2**e with m in [0.5, 1), so the floor
            # of log2 |x| is exactly e - 1, subnormals included
            _, e = math.frexp(abs(x))
            idx = min(max(e - 1, EXP_MIN), EXP_MAX) - EXP_MIN
            self.bins[idx] += 1

    def record_array(self, values: np.ndarray) -> None:
        """Tally every element of an array (any float dtype)."""
        x = np.asarray(values, dtype=np.float64).ravel()
        if x.size == 0:
            return
        nan = np.isnan(x)
        inf = np.isinf(x)
        zero = x == 0.0
        self.nan_count += int(nan.sum())
        self.inf_count += int(inf.sum())
        self.zero_count += int(zero.sum())
        rest = x[~(nan | inf | zero)]
        if rest.size:
            _, e = np.frexp(np.abs(rest))
            idx = np.clip(e.astype(np.int64) - 1, EXP_MIN, EXP_MAX) - EXP_MIN
            self.bins += np.bincount(idx, minlength=N_BINS)

    def merge(self, other: "LogHistogram") -> "LogHistogram":
        """Counter-wise sum; both inputs are left untouched."""
        out = LogHistogram()
        out.bins = self.bins + other.bins
        out.zero_count = self.zero_count + other.zero_count
        out.inf_count = self.inf_count + other.inf_count
        out.nan_count = self.nan_count + other.nan_count
        return out

    def exponent_counts(self):
        """(exponent, count) pairs for all 129 bins, in exponent order."""
        return [(e, int(self.bins[e - EXP_MIN])) for e in range(EXP_MIN, EXP_MAX + 1)]

    def __repr__(self):
        return ("LogHistogram(total=%d, zeros=%d, infs=%d, nans=%d)"
                % (self.total, self.zero_count, self.inf_count, self.nan_count))


def subnormal_fraction(hist: LogHistogram,
                       lo: float = 2.0 ** -24,
                       hi: float = 2.0 ** -14) -> float:
    """Fraction of all recorded entries whose magnitude fell in [lo, hi).

    A bin for exponent e covers [2**e, 2**(e+1)) and is counted whenever
    that interval overlaps [lo, hi); bin granularity is the resolution
    limit, and the clamped edge bins are coarse by construction.  The
    denominator is the histogram total including zeros, infs, and NaNs.
    """
    if not (lo > 0.0 and hi > 0.0):
        raise ValueError("bounds must be positive, got lo=%r hi=%r" % (lo, hi))
    if lo >= hi:
        raise ValueError("empty magnitude range: lo=%r >= hi=%r" % (lo, hi))
    total = hist.total
    if total == 0:
        raise ValueError("histogram is empty")
    n = 0
    for e, count in hist.exponent_counts():
        if 2.0 ** (e + 1) > lo and 2.0 ** e < hi:
            n += count
    return n / total


def suggest_scale(hist: LogHistogram) -> float:
    """Power-of-two s that recenters recorded magnitudes near one.

    Returns 2**(-m) where m is the lower median of the recorded binary
    exponents, so multiplying the data by s moves the median magnitude
    into [1, 2).  On even counts the lower median is taken, which errs
    toward the larger scale.  Raises ValueError if nothing finite and
    nonzero was recorded.
    """
    n = int(hist.bins.sum())
    if n == 0:
        raise ValueError("histogram has no finite nonzero magnitudes")
    k = (n + 1) // 2
    cum = 0
    for e, count in hist.exponent_counts():
        cum += count
        if cum >= k:
            return 2.0 ** (-e)
    raise AssertionError("unreachable: cumulative count never reached median")


class SherlogScalar:
    """A scalar that records the magnitude of every arithmetic result.

    Wraps any value with +, -, *, / (float, np.float32, Half16, ...).
    The wrapped operation itself is untouched: unwrapping after a
    computation gives bitwise the same value as never wrapping at all.
    Negation is a sign flip, not arithmetic, and is not recorded.
    """

    __slots__ = ("value", "hist")

    def __init__(self, value, hist: LogHistogram):
        self.value = value
        self.hist = hist

    def _emit(self, value):
        self.hist.record(float(value))
        return SherlogScalar(value, self.hist)

    @staticmethod
    def _unwrap(x):
        return x.value if isinstance(x, SherlogScalar) else x

    def __add__(self, other):
        return self._emit(self.value + self._unwrap(other))

    def __radd__(self, other):
        return self._emit(self._unwrap(other) + self.value)

    def __sub__(self, other):
        return self._emit(self.value - self._unwrap(other))

    def __rsub__(self, other):
        return self._emit(self._unwrap(other) - self.value)

    def __mul__(self, other):
        return self._emit(self.value * self._unwrap(other))

    def __rmul__(self, other):
        return self._emit(self._unwrap(other) * self.value)

    def __truediv__(self, other):
        return self._emit(self.value / self._unwrap(other))

    def __rtruediv__(self, other):
        return self._emit(self._unwrap(other) / self.value)

    def __neg__(self):
        return SherlogScalar(-self.value, self.hist)

    def __float__(self):
        return float(self.value)

    def __eq__(self, other):
        return self.value == self._unwrap(other)

    def __lt__(self, other):
        return self.value < self._unwrap(other)

    def __le__(self, other):
        return self.value <= self._unwrap(other)

    def __repr__(self):
        return "SherlogScalar(%r)" % (self.value,)


class SherlogOps(ScalarOps):
    """ScalarOps wrapper that histograms every arithmetic result element.

    Conversions (asarray, to_f64) and allocation are structural and not
    recorded; add/sub/mul/div/muladd record one entry per result element.
    muladd counts as a single operation whatever the backend's rounding
    granularity.
    """

    def __init__(self, inner: ScalarOps, hist: LogHistogram):
        self.inner = inner
        self.hist = hist
        self.kind = inner.kind
        self.dtype = inner.dtype

    @property
    def policy(self):
        return getattr(self.inner, "policy", None)

    def asarray(self, values):
        return self.inner.asarray(values)

    def to_f64(self, values):
        return self.inner.to_f64(values)

    def zeros(self, shape):
        return self.inner.zeros(shape)

    def neg(self, a):
        return self.inner.neg(a)

    def _emit(self, r):
        self.hist.record_array(self.inner.to_f64(r))
        return r

    def add(self, a, b):
        return self._emit(self.inner.add(a, b))

    def sub(self, a, b):
        return self._emit(self.inner.sub(a, b))

    def mul(self, a, b):
        return self._emit(self.inner.mul(a, b))

    def div(self, a, b):
        return self._emit(self.inner.div(a, b))

    def muladd(self, a, b, c):
        return self._emit(self.inner.muladd(a, b, c))


assert set(ARITHMETIC_METHODS) <= set(dir(SherlogOps))
