"""Software IEEE 754 binary16 with explicit, per-operation rounding control.

Arithmetic follows the widen-compute-round scheme: operands are decoded
exactly to binary64, the operation is performed there, and the result is
rounded to binary16 once.  binary64 carries more than twice the precision
of binary16, so add, sub, mul, div, and the fused multiply-add are all
correctly rounded this way (the test suite pins this against an exact
integer-arithmetic reference, including constructed tie cases).

Rounding is to nearest, ties to even.  Any operation with a NaN input
returns the canonical quiet NaN 0x7E00.  A RoundingPolicy optionally
flushes subnormal results to signed zero and selects whether muladd is a
single fused rounding or an exact mul-then-add pair of roundings.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

CANONICAL_NAN_BITS = 0x7E00
INF_BITS = 0x7C00
SIGN_MASK = 0x8000
MAG_MASK = 0x7FFF

MAX_FINITE = 65504.0
MIN_NORMAL = 2.0 ** -14
MIN_SUBNORMAL = 2.0 ** -24

FUSED = "fused_single_rounding"
DOUBLE = "double_rounding"

_MULADD_TOKENS = {
    "fused": FUSED,
    "double": DOUBLE,
    FUSED: FUSED,
    DOUBLE: DOUBLE,
}


@dataclass(frozen=True)
class RoundingPolicy:
    """How binary16 results are finished after the exact binary64 compute.

    flush_subnormals: results with 0 < |x| < 2**-14 become signed zero.
    muladd_mode: "fused_single_rounding" rounds the exact a*b + c once;
    "double_rounding" computes round(round(a*b) + c), i.e. an actual
    multiply followed by an add.
    """

    flush_subnormals: bool = False
    muladd_mode: str = DOUBLE

    def __post_init__(self):
        mode = _MULADD_TOKENS.get(self.muladd_mode)
        if mode is None:
            raise ValueError(
                "muladd_mode must be 'fused'/'fused_single_rounding' or "
                "'double'/'double_rounding', got %r" % (self.muladd_mode,)
            )
        object.__setattr__(self, "muladd_mode", mode)

    @property
    def fused(self) -> bool:
        return self.muladd_mode == FUSED


DEFAULT_POLICY = RoundingPolicy()


class FpClass(enum.Enum):
    ZERO = "zero"
    SUBNORMAL = "subnormal"
    NORMAL = "normal"
    INF = "inf"
    NAN = "nan"


# ---------------------------------------------------------------------------
# array kernels
# ---------------------------------------------------------------------------

def decode(values: np.ndarray) -> np.ndarray:
    """Exact binary64 image of a binary16 array."""
    return np.asarray(values, dtype=np.float16).astype(np.float64)


def encode(values: np.ndarray, policy: RoundingPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Round a binary64 array to binary16 once, applying the policy."""
    x = np.asarray(values, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        h = x.astype(np.float16)
    bits = h.view(np.uint16)
    mag = bits & np.uint16(MAG_MASK)
    bits = np.where(mag > INF_BITS, np.uint16(CANONICAL_NAN_BITS), bits)
    if policy.flush_subnormals:
        sub = (mag > 0) & (mag < 0x0400)
        bits = np.where(sub, bits & np.uint16(SIGN_MASK), bits)
    return bits.view(np.float16)


def classify_bits(bits: np.ndarray):
    """Vectorized classification; returns a dict of boolean masks."""
    b = np.asarray(bits, dtype=np.uint16)
    mag = b & np.uint16(MAG_MASK)
    e = (b >> np.uint16(10)) & np.uint16(0x1F)
    return {
        "zero": mag == 0,
        "subnormal": (e == 0) & (mag != 0),
        "normal": (e > 0) & (e < 31),
        "inf": mag == INF_BITS,
        "nan": mag > INF_BITS,
    }


def add(a, b, policy: RoundingPolicy = DEFAULT_POLICY) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return encode(decode(a) + decode(b), policy)


def sub(a, b, policy: RoundingPolicy = DEFAULT_POLICY) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return encode(decode(a) - decode(b), policy)


def mul(a, b, policy: RoundingPolicy = DEFAULT_POLICY) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return encode(decode(a) * decode(b), policy)


def div(a, b, policy: RoundingPolicy = DEFAULT_POLICY) -> np.ndarray:
    # binary64 division then one more rounding is innocuous for p' >= 2p + 2
    with np.errstate(invalid="ignore", divide="ignore"):
        return encode(decode(a) / decode(b), policy)


def muladd(a, b, c, policy: RoundingPolicy = DEFAULT_POLICY) -> np.ndarray:
    """a * b + c under the policy's muladd mode."""
    if policy.fused:
        # the product of two binary16 values is exact in binary64, so this
        # is a single rounding of the exact a*b + c
        with np.errstate(invalid="ignore"):
            return encode(decode(a) * decode(b) + decode(c), policy)
    return add(mul(a, b, policy), c, policy)


def exp(a, policy=DEFAULT_POLICY):
    return encode(np.exp(decode(a)), policy)


def log(a, policy=DEFAULT_POLICY):
    with np.errstate(invalid="ignore", divide="ignore"):
        return encode(np.log(decode(a)), policy)


def sin(a, policy=DEFAULT_POLICY):
    return encode(np.sin(decode(a)), policy)


def cos(a, policy=DEFAULT_POLICY):
    return encode(np.cos(decode(a)), policy)


def sqrt(a, policy=DEFAULT_POLICY):
    with np.errstate(invalid="ignore"):
        return encode(np.sqrt(decode(a)), policy)


# ---------------------------------------------------------------------------
# scalar surface
# ---------------------------------------------------------------------------

class Half16:
    """A single binary16 value, addressed by its 16-bit pattern.

    Every pattern is valid, NaN payloads included.  Arithmetic operators
    use the default policy; use the module functions to pass another one.
    """

    __slots__ = ("_bits",)

    def __init__(self, value=0.0):
        if isinstance(value, Half16):
            self._bits = value._bits
        else:
            self._bits = int(encode(np.float64(value)).view(np.uint16))

    @classmethod
    def from_bits(cls, bits: int) -> "Half16":
        if not 0 <= bits <= 0xFFFF:
            raise ValueError("binary16 pattern out of range: %r" % (bits,))
        obj = cls.__new__(cls)
        obj._bits = int(bits)
        return obj

    @property
    def bits(self) -> int:
        return self._bits

    def to_float(self) -> float:
        return float(np.uint16(self._bits).view(np.float16))

    __float__ = to_float

    def __repr__(self):
        return "Half16(%r)" % (self.to_float(),)

    def __eq__(self, other):
        if isinstance(other, Half16):
            return self.to_float() == other.to_float()
        return self.to_float() == other

    def __hash__(self):
        return hash(self.to_float())

    def __neg__(self):
        # sign inversion is a quiet bit operation, not arithmetic
        return Half16.from_bits(self._bits ^ SIGN_MASK)

    def __abs__(self):
        return Half16.from_bits(self._bits & MAG_MASK)

    def __add__(self, other):
        return f16_add(self, _coerce(other))

    def __sub__(self, other):
        return f16_sub(self, _coerce(other))

    def __mul__(self, other):
        return f16_mul(self, _coerce(other))

    def __truediv__(self, other):
        return f16_div(self, _coerce(other))

    __radd__ = __add__
    __rmul__ = __mul__

    def __rsub__(self, other):
        return f16_sub(_coerce(other), self)

    def __rtruediv__(self, other):
        return f16_div(_coerce(other), self)


def _coerce(x) -> Half16:
    return x if isinstance(x, Half16) else Half16(x)


def _as_f16(x: Half16) -> np.float16:
    return np.uint16(x.bits).view(np.float16)


def _wrap(value: np.ndarray) -> Half16:
    return Half16.from_bits(int(np.asarray(value).view(np.uint16)))


def round_f64_to_f16(x: float, policy: RoundingPolicy = DEFAULT_POLICY) -> Half16:
    """Round a binary64 value to binary16 (one rounding, policy applied)."""
    return _wrap(encode(np.float64(x), policy))


def f16_add(a: Half16, b: Half16, policy: RoundingPolicy = DEFAULT_POLICY) -> Half16:
    return _wrap(add(_as_f16(a), _as_f16(b), policy))


def f16_sub(a: Half16, b: Half16, policy: RoundingPolicy = DEFAULT_POLICY) -> Half16:
    return _wrap(sub(_as_f16(a), _as_f16(b), policy))


def f16_mul(a: Half16, b: Half16, policy: RoundingPolicy = DEFAULT_POLICY) -> Half16:
    return _wrap(mul(_as_f16(a), _as_f16(b), policy))


def f16_div(a: Half16, b: Half16, policy: RoundingPolicy = DEFAULT_POLICY) -> Half16:
    return _wrap(div(_as_f16(a), _as_f16(b), policy))


def f16_muladd(a: Half16, b: Half16, c: Half16,
               policy: RoundingPolicy = DEFAULT_POLICY) -> Half16:
    return _wrap(muladd(_as_f16(a), _as_f16(b), _as_f16(c), policy))


def classify(x) -> FpClass:
    """Class of a Half16 (or raw pattern): zero, subnormal, normal, inf, nan."""
    bits = x.bits if isinstance(x, Half16) else int(x)
    mag = bits & MAG_MASK
    if mag == 0:
        return FpClass.ZERO
    if mag < 0x0400:
        return FpClass.SUBNORMAL
    if mag < INF_BITS:
        return FpClass.NORMAL
    if mag == INF_BITS:
        return FpClass.INF
    return FpClass.NAN
