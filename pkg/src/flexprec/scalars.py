"""Interchangeable element types behind one small arithmetic contract.

Numerical code in this package is written against ScalarOps rather than a
concrete dtype, so the same kernel or model runs in binary64, binary32,
binary16, or the mixed mode where binary16 supplies the arithmetic and
binary32 holds the integrated state.  Structural work (slicing, padding,
assembling arrays) stays plain numpy; only value-producing arithmetic
goes through the contract.
"""

from __future__ import annotations

import enum

import numpy as np

from . import half
from .half import DEFAULT_POLICY, RoundingPolicy

# the value-producing methods of ScalarOps; wrappers that observe or count
# operations intercept exactly these
ARITHMETIC_METHODS = ("add", "sub", "mul", "div", "muladd")


class ScalarKind(enum.Enum):
    """Element type of a run.  F16_F32 pairs binary16 arithmetic with a
    binary32 master copy of the integrated state."""

    F64 = "f64"
    F32 = "f32"
    F16 = "f16"
    F16_F32 = "f16/32"

    @property
    def token(self) -> str:
        return self.value

    def __str__(self):
        return self.value


_KIND_ALIASES = {
    "f64": ScalarKind.F64,
    "float64": ScalarKind.F64,
    "f32": ScalarKind.F32,
    "float32": ScalarKind.F32,
    "f16": ScalarKind.F16,
    "float16": ScalarKind.F16,
    "f16/32": ScalarKind.F16_F32,
    "f16_32": ScalarKind.F16_F32,
    "f16-32": ScalarKind.F16_F32,
    "mixed": ScalarKind.F16_F32,
}


def parse_kind(text: str) -> ScalarKind:
    kind = _KIND_ALIASES.get(str(text).strip().lower())
    if kind is None:
        raise ValueError(
            "unknown scalar kind %r (expected f64, f32, f16, or f16/32)" % (text,)
        )
    return kind


def model_kind(kind: ScalarKind) -> ScalarKind:
    """Kind used for model arithmetic (right-hand sides, kernels)."""
    return ScalarKind.F16 if kind is ScalarKind.F16_F32 else kind


def integration_kind(kind: ScalarKind) -> ScalarKind:
    """Kind used for state accumulation unless overridden."""
    return ScalarKind.F32 if kind is ScalarKind.F16_F32 else kind


class ScalarOps:
    """Arithmetic contract: elementwise ops at one precision.

    asarray converts (rounding once) into the element type, to_f64 widens
    exactly, zeros allocates.  add/sub/mul/div/muladd are elementwise with
    numpy broadcasting.  neg is a quiet sign flip, not arithmetic.
    """

    kind: ScalarKind
    dtype: np.dtype

    def asarray(self, values) -> np.ndarray:
        raise NotImplementedError

    def to_f64(self, values) -> np.ndarray:
        return np.asarray(values, dtype=self.dtype).astype(np.float64)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=self.dtype)

    def neg(self, a) -> np.ndarray:
        return np.negative(a)

    def add(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def sub(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def mul(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def div(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def muladd(self, a, b, c) -> np.ndarray:
        """a * b + c; rounding granularity is the backend's choice."""
        raise NotImplementedError


class _NativeOps(ScalarOps):
    """Hardware float arithmetic at a fixed numpy dtype.

    Overflow and invalid-operand conditions are IEEE events the callers
    detect by inspecting values (blowup checks), not warnings, so the
    numpy warning machinery is silenced here.
    """

    def __init__(self):
        self._dt = np.dtype(self.dtype)

    def asarray(self, values):
        return np.asarray(values, dtype=self._dt)

    def add(self, a, b):
        with np.errstate(all="ignore"):
            return np.add(a, b, dtype=self._dt)

    def sub(self, a, b):
        with np.errstate(all="ignore"):
            return np.subtract(a, b, dtype=self._dt)

    def mul(self, a, b):
        with np.errstate(all="ignore"):
            return np.multiply(a, b, dtype=self._dt)

    def div(self, a, b):
        with np.errstate(all="ignore"):
            return np.divide(a, b, dtype=self._dt)

    def muladd(self, a, b, c):
        with np.errstate(all="ignore"):
            return np.add(np.multiply(a, b, dtype=self._dt), c, dtype=self._dt)


class F64Ops(_NativeOps):
    kind = ScalarKind.F64
    dtype = np.float64


class F32Ops(_NativeOps):
    kind = ScalarKind.F32
    dtype = np.float32


class F16Ops(ScalarOps):
    """Software binary16 arithmetic under a RoundingPolicy."""

    kind = ScalarKind.F16
    dtype = np.float16

    def __init__(self, policy: RoundingPolicy = DEFAULT_POLICY):
        self.policy = policy

    def asarray(self, values):
        return half.encode(np.asarray(values, dtype=np.float64), self.policy)

    def add(self, a, b):
        return half.add(a, b, self.policy)

    def sub(self, a, b):
        return half.sub(a, b, self.policy)

    def mul(self, a, b):
        return half.mul(a, b, self.policy)

    def div(self, a, b):
        return half.div(a, b, self.policy)

    def muladd(self, a, b, c):
        return half.muladd(a, b, c, self.policy)


def get_ops(kind: ScalarKind, policy: RoundingPolicy = DEFAULT_POLICY) -> ScalarOps:
    """Ops backend for a kind; F16_F32 returns the binary16 model backend."""
    kind = model_kind(kind)
    if kind is ScalarKind.F64:
        return F64Ops()
    if kind is ScalarKind.F32:
        return F32Ops()
    return F16Ops(policy)
