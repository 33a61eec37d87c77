"""Signed base-2 log-domain reals for magnitudes outside double range."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: largest log2 magnitude that still materializes as a finite double
MAX_LOG2 = math.log2(np.finfo(float).max)
#: smallest log2 magnitude of a normal double
MIN_LOG2 = -1022.0
CANCEL_RTOL = 1e-12


class IndeterminateSign(ArithmeticError):
    """Raised when a log-domain difference cancels below resolution."""


@dataclass(frozen=True)
class LogReal:
    """A real number stored as ``sign * 2**log2``.

    ``sign`` is -1, 0 or +1; zero is stored as ``(0, -inf)``.
    """

    sign: int
    log2: float

    def __post_init__(self):
        if self.sign == 0 or self.log2 == -math.inf:
            object.__setattr__(self, "sign", 0)
            object.__setattr__(self, "log2", -math.inf)

    @classmethod
    def from_float(cls, x: float) -> "LogReal":
        if x == 0:
            return cls(0, -math.inf)
        return cls(1 if x > 0 else -1, math.log2(abs(x)))

    @classmethod
    def pow2(cls, log2: float) -> "LogReal":
        return cls(1, float(log2))

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(0, -math.inf)

    @property
    def representable(self) -> bool:
        return self.sign == 0 or self.log2 <= MAX_LOG2

    def to_float(self) -> float:
        """Materialize; raises ``OverflowError`` beyond double range."""
        if self.sign == 0:
            return 0.0
        if self.log2 > MAX_LOG2:
            raise OverflowError(f"2**{self.log2:.6g} exceeds double range")
        return self.sign * float(np.exp2(self.log2))

    def __neg__(self) -> "LogReal":
        return LogReal(-self.sign, self.log2)

    def __mul__(self, other) -> "LogReal":
        other = _coerce(other)
        if self.sign == 0 or other.sign == 0:
            return LogReal.zero()
        return LogReal(self.sign * other.sign, self.log2 + other.log2)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogReal":
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("log-domain division by zero")
        if self.sign == 0:
            return LogReal.zero()
        return LogReal(self.sign * other.sign, self.log2 - other.log2)

    def __pow__(self, p: float) -> "LogReal":
        if self.sign < 0:
            raise ValueError("real power of a negative log-domain value")
        if self.sign == 0:
            return LogReal.zero() if p > 0 else LogReal(1, 0.0)
        return LogReal(1, self.log2 * p)

    def __add__(self, other) -> "LogReal":
        other = _coerce(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        if self.sign == other.sign:
            return LogReal(self.sign, float(np.logaddexp2(self.log2, other.log2)))
        big, small = (self, other) if self.log2 >= other.log2 else (other, self)
        gap = big.log2 - small.log2
        # 1 - 2**-gap; gap below ~CANCEL_RTOL means the terms agree to 1e-12
        rel = -math.expm1(-gap * math.log(2.0))
        if rel <= CANCEL_RTOL:
            raise IndeterminateSign(
                f"terms 2**{big.log2:.6g} and 2**{small.log2:.6g} cancel"
            )
        return LogReal(big.sign, big.log2 + math.log2(rel))

    __radd__ = __add__

    def __sub__(self, other) -> "LogReal":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "LogReal":
        return _coerce(other) - self

    def __lt__(self, other) -> bool:
        other = _coerce(other)
        return _key(self) < _key(other)

    def __le__(self, other) -> bool:
        other = _coerce(other)
        return _key(self) <= _key(other)

    def __gt__(self, other) -> bool:
        return _coerce(other) < self

    def __ge__(self, other) -> bool:
        return _coerce(other) <= self

    def __float__(self) -> float:
        return self.to_float()

    def __repr__(self) -> str:
        if self.sign == 0:
            return "LogReal(0)"
        s = "-" if self.sign < 0 else ""
        return f"LogReal({s}2**{self.log2:.10g})"


def _key(x: LogReal):
    if x.sign == 0:
        return (0, 0.0)
    return (x.sign, x.sign * x.log2)


def _coerce(x) -> LogReal:
    if isinstance(x, LogReal):
        return x
    return LogReal.from_float(float(x))


def log2_sum(values) -> float:
    """log2 of a sum of positive terms given by their log2 values."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        return -math.inf
    return float(np.logaddexp2.reduce(arr))


def log2_diff(log_a: float, log_b: float) -> float:
    """log2(2**a - 2**b) for a > b."""
    return (LogReal.pow2(log_a) - LogReal.pow2(log_b)).log2
