"""Finite value domains and the canonical text form of values.

Every model variable ranges over a finite set: booleans, bounded integers or
decimals quantized to a fixed number of digits.  Values are plain Python
objects (``bool``, ``int``, :class:`decimal.Decimal`) plus ``None`` for null
when a domain is declared nullable.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from fractions import Fraction
from typing import Iterator, Union

Value = Union[bool, int, Decimal, None]

BOOL = "bool"
INT = "int"
DECIMAL = "decimal"


class DomainError(ValueError):
    """A value does not lie in (or cannot be represented by) a domain."""


@dataclass(frozen=True)
class ValueDomain:
    kind: str
    lo: Union[int, Decimal, None] = None
    hi: Union[int, Decimal, None] = None
    precision: int = 0
    nullable: bool = False

    @classmethod
    def boolean(cls, nullable: bool = False) -> "ValueDomain":
        return cls(BOOL, nullable=nullable)

    @classmethod
    def integer(cls, lo: int, hi: int, nullable: bool = False) -> "ValueDomain":
        return cls(INT, int(lo), int(hi), 0, nullable)

    @classmethod
    def decimal(cls, lo, hi, precision: int, nullable: bool = False) -> "ValueDomain":
        q = Decimal(1).scaleb(-precision)
        return cls(DECIMAL, Decimal(str(lo)).quantize(q), Decimal(str(hi)).quantize(q), precision, nullable)

    def problems(self) -> list[str]:
        out = []
        if self.kind not in (BOOL, INT, DECIMAL):
            out.append(f"unknown domain kind {self.kind!r}")
        elif self.kind != BOOL:
            if self.lo > self.hi:
                out.append(f"empty domain: lo {self.lo} > hi {self.hi}")
            if self.precision < 0:
                out.append("negative precision")
        return out

    @property
    def step(self) -> Decimal:
        return Decimal(1).scaleb(-self.precision)

    @property
    def cardinality(self) -> int:
        extra = 1 if self.nullable else 0
        if self.kind == BOOL:
            return 2 + extra
        if self.kind == INT:
            return self.hi - self.lo + 1 + extra
        # (hi - lo) * 10^d + 1 representable values
        return int((self.hi - self.lo).scaleb(self.precision)) + 1 + extra

    def value_at(self, k: int) -> Value:
        """The k-th representable value, in ascending order (null first)."""
        if self.nullable:
            if k == 0:
                return None
            k -= 1
        if self.kind == BOOL:
            return bool(k)
        if self.kind == INT:
            return self.lo + k
        return (self.lo + self.step * k).quantize(self.step)

    def values(self) -> Iterator[Value]:
        for k in range(self.cardinality):
            yield self.value_at(k)

    def contains(self, v: Value) -> bool:
        try:
            c = self.coerce(v)
        except DomainError:
            return False
        return c == v and isinstance(c, bool) == isinstance(v, bool)

    def coerce(self, v) -> Value:
        """Convert *v* into this domain's representation or raise DomainError.

        Decimals are rounded half-even to the domain precision; everything
        else must already be an exact member.  Out-of-range values are never
        clamped.
        """
        if v is None:
            if self.nullable:
                return None
            raise DomainError("null in non-nullable domain")
        if self.kind == BOOL:
            if isinstance(v, bool):
                return v
            raise DomainError(f"{format_value(v)} is not a boolean")
        if isinstance(v, bool) or not isinstance(v, (int, Decimal, Fraction)):
            raise DomainError(f"{v!r} is not numeric")
        if self.kind == INT:
            if isinstance(v, Decimal):
                if v != v.to_integral_value():
                    raise DomainError(f"{format_value(v)} is not an integer")
                v = int(v)
            elif isinstance(v, Fraction):
                if v.denominator != 1:
                    raise DomainError(f"{v} is not an integer")
                v = int(v)
            if not self.lo <= v <= self.hi:
                raise DomainError(f"{v} outside [{self.lo}, {self.hi}]")
            return v
        if isinstance(v, Fraction):
            v = Decimal(v.numerator) / Decimal(v.denominator)
        try:
            q = Decimal(v).quantize(self.step, rounding=ROUND_HALF_EVEN)
        except InvalidOperation as exc:
            raise DomainError(f"cannot quantize {v}") from exc
        if not self.lo <= q <= self.hi:
            raise DomainError(f"{format_value(q)} outside [{self.lo}, {self.hi}]")
        return q

    def format(self, v: Value) -> str:
        if v is None:
            return "null"
        if self.kind == DECIMAL:
            return format(Decimal(v).quantize(self.step), "f")
        return format_value(v)

    def __str__(self) -> str:
        tail = "?" if self.nullable else ""
        if self.kind == BOOL:
            return "bool" + tail
        if self.kind == INT:
            return f"int[{self.lo}, {self.hi}]{tail}"
        return f"decimal[{format(self.lo, 'f')}, {format(self.hi, 'f')}, {self.precision}]{tail}"


def format_value(v) -> str:
    """Canonical text of a value whose domain is not known."""
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Decimal):
        return format(v, "f")
    if isinstance(v, Fraction):
        return format(Decimal(v.numerator) / Decimal(v.denominator), "f")
    return str(v)


def parse_value(text: str) -> Value:
    """Inverse of :func:`format_value` for literal tokens."""
    if text == "null":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    if "." in text:
        return Decimal(text)
    return int(text)


def to_fraction(v) -> Fraction:
    if isinstance(v, bool):
        return Fraction(int(v))
    if isinstance(v, Decimal):
        return Fraction(v)
    return Fraction(v)
