"""
Exact dyadic rationals m * 2^-k.

Every approximant, measure and reference value in the workbench is a Dyadic.
Nothing here ever rounds: sums, differences and products of dyadics are
dyadics, and halving only bumps the exponent.
"""

import re
import sys
from enum import Enum
from fractions import Fraction

# Long runs push mantissas past the default int->str digit limit.
if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(0)


_DYADIC_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:\*\s*2\^-(\d+))?\s*$")


class Ordering(Enum):
    LT = -1
    EQ = 0
    GT = 1


class Dyadic:
    """Immutable m * 2^-k in canonical form.

    Canonical form: the exponent is as small as possible, i.e. the mantissa is
    odd or the exponent is 0; zero is always 0 * 2^0.
    """

    __slots__ = ("mantissa", "exponent")

    def __init__(self, mantissa=0, exponent=0):
        if exponent < 0:
            raise ValueError(f"Dyadic exponent must be nonnegative, got {exponent}")
        mantissa = int(mantissa)
        exponent = int(exponent)
        if mantissa == 0:
            exponent = 0
        elif exponent:
            trailing = (mantissa & -mantissa).bit_length() - 1
            shift = min(trailing, exponent)
            if shift:
                mantissa >>= shift
                exponent -= shift
        object.__setattr__(self, "mantissa", mantissa)
        object.__setattr__(self, "exponent", exponent)

    def __setattr__(self, name, value):
        raise AttributeError("Dyadic values are immutable")

    def __reduce__(self):
        return (Dyadic, (self.mantissa, self.exponent))

    # construction helpers

    @classmethod
    def pow2(cls, n):
        """2^-n for n >= 0."""
        return cls(1, n)

    @classmethod
    def parse(cls, text):
        if isinstance(text, Dyadic):
            return text
        if isinstance(text, bool):
            raise ValueError(f"Not a dyadic: {text!r}")
        if isinstance(text, int):
            return cls(text, 0)
        match = _DYADIC_RE.match(str(text))
        if not match:
            raise ValueError(f"Not a dyadic: {text!r}")
        mantissa = int(match.group(1))
        exponent = int(match.group(2)) if match.group(2) is not None else 0
        return cls(mantissa, exponent)

    @classmethod
    def from_fraction(cls, value):
        value = Fraction(value)
        den = value.denominator
        if den & (den - 1):
            raise ValueError(f"{value} has a non-dyadic denominator")
        return cls(value.numerator, den.bit_length() - 1)

    # arithmetic

    @staticmethod
    def _coerce(other):
        if isinstance(other, Dyadic):
            return other
        if isinstance(other, int) and not isinstance(other, bool):
            return Dyadic(other, 0)
        return NotImplemented

    @staticmethod
    def _aligned(a, b):
        k = max(a.exponent, b.exponent)
        return a.mantissa << (k - a.exponent), b.mantissa << (k - b.exponent), k

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        x, y, k = self._aligned(self, other)
        return Dyadic(x + y, k)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        x, y, k = self._aligned(self, other)
        return Dyadic(x - y, k)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Dyadic(self.mantissa * other.mantissa, self.exponent + other.exponent)

    __rmul__ = __mul__

    def __neg__(self):
        return Dyadic(-self.mantissa, self.exponent)

    def __pos__(self):
        return self

    def __abs__(self):
        return self if self.mantissa >= 0 else -self

    def shift(self, n):
        """Exact division by 2^n (multiplication when n < 0)."""
        if n >= 0:
            return Dyadic(self.mantissa, self.exponent + n)
        return self * Dyadic(1 << -n)

    def half(self):
        return self.shift(1)

    # comparison

    def _compare(self, other):
        x, y, _ = self._aligned(self, other)
        return (x > y) - (x < y)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self.mantissa == other.mantissa and self.exponent == other.exponent

    def __lt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._compare(other) < 0

    def __le__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._compare(other) <= 0

    def __gt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._compare(other) > 0

    def __ge__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._compare(other) >= 0

    def __hash__(self):
        if self.exponent == 0:
            return hash(self.mantissa)
        return hash((self.mantissa, self.exponent))

    def __bool__(self):
        return self.mantissa != 0

    # inspection

    def sign(self):
        return (self.mantissa > 0) - (self.mantissa < 0)

    def is_power_of_two(self):
        """True for 2^-n with n >= 0 (and for 2^n via exponent 0)."""
        m = self.mantissa
        return m > 0 and m & (m - 1) == 0

    def binary_expansion(self):
        """Exponents n, ascending, with self == sum of 2^-n.

        Only defined for values in [0, 1]; an integer part of 1 shows up as n = 0.
        """
        if self.mantissa < 0 or self > 1:
            raise ValueError(f"binary expansion needs a value in [0, 1], got {self}")
        terms = []
        m, k = self.mantissa, self.exponent
        bit = 0
        while m:
            if m & 1:
                terms.append(k - bit)
            m >>= 1
            bit += 1
        terms.sort()
        return terms

    def to_fraction(self):
        return Fraction(self.mantissa, 1 << self.exponent)

    def __float__(self):
        return float(self.to_fraction())

    def __str__(self):
        return f"{self.mantissa}*2^-{self.exponent}"

    def __repr__(self):
        return f"Dyadic({self.mantissa}, {self.exponent})"


ZERO = Dyadic(0)
ONE = Dyadic(1)
HALF = Dyadic(1, 1)


def make(m, k):
    if k < 0:
        raise ValueError(f"make() needs k >= 0, got {k}")
    return Dyadic(m, k)


def arith(op, a, b=None):
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "neg":
        return -a
    raise ValueError(f"Unknown dyadic operation: {op}")


def cmp(a, b):
    result = Dyadic._coerce(a)._compare(Dyadic._coerce(b))
    return Ordering(result)


def as_dyadic(value):
    """Accept a Dyadic, an int or a serialized "m*2^-k" string."""
    return Dyadic.parse(value)
