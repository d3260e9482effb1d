from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from abmlevels.values import DomainError, ValueDomain, format_value, parse_value


def test_cardinalities():
    assert ValueDomain.boolean().cardinality == 2
    assert ValueDomain.boolean(nullable=True).cardinality == 3
    assert ValueDomain.integer(-2, 5).cardinality == 8
    assert ValueDomain.decimal(0, 1, 1).cardinality == 11
    assert ValueDomain.decimal(0, 1, 10).cardinality == 10**10 + 1


def test_values_enumerate_in_order_with_null_first():
    dom = ValueDomain.integer(1, 3, nullable=True)
    assert list(dom.values()) == [None, 1, 2, 3]
    assert list(ValueDomain.decimal("0.5", 1, 1).values()) == [Decimal(x) for x in ("0.5", "0.6", "0.7", "0.8", "0.9", "1.0")]


def test_coerce_rejects_instead_of_clamping():
    dom = ValueDomain.integer(0, 5)
    with pytest.raises(DomainError):
        dom.coerce(7)
    with pytest.raises(DomainError):
        dom.coerce(None)
    with pytest.raises(DomainError):
        dom.coerce(True)
    with pytest.raises(DomainError):
        ValueDomain.decimal(0, 1, 2).coerce(Decimal("1.01"))


def test_decimal_rounding_is_half_even():
    dom = ValueDomain.decimal(0, 1, 1)
    assert dom.coerce(Decimal("0.25")) == Decimal("0.2")
    assert dom.coerce(Decimal("0.35")) == Decimal("0.4")
    assert dom.coerce(Fraction(1, 3)) == Decimal("0.3")


def test_integer_domain_accepts_integral_decimals_only():
    dom = ValueDomain.integer(0, 9)
    assert dom.coerce(Decimal("4.0")) == 4
    assert dom.coerce(Fraction(8, 2)) == 4
    with pytest.raises(DomainError):
        dom.coerce(Decimal("4.5"))


@given(st.integers(0, 200), st.integers(0, 3))
def test_every_enumerated_decimal_is_a_member(k, precision):
    dom = ValueDomain.decimal(-1, 1, precision)
    k %= dom.cardinality
    v = dom.value_at(k)
    assert dom.contains(v)
    assert dom.coerce(v) == v


@given(st.one_of(st.booleans(), st.integers(-10**6, 10**6), st.none(),
                 st.decimals(allow_nan=False, allow_infinity=False, places=3, min_value=-1000, max_value=1000)))
def test_value_text_round_trip(v):
    assert parse_value(format_value(v)) == v
