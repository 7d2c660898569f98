"""Exact coefficient ring: arithmetic, lam localization, text round trip."""

import math
import random
from fractions import Fraction

import pytest

from qcalc.scalars import QQi, Scalar, parse_scalar


def test_qqi_field_ops():
    a = QQi(Fraction(1, 2), Fraction(-3, 4))
    b = QQi(2, 1)
    assert a + b == QQi(Fraction(5, 2), Fraction(1, 4))
    assert a * b == QQi(Fraction(7, 4), -1)
    assert (a / b) * b == a
    assert a.conj().conj() == a
    assert (a * a.conj()).im == 0


def test_qnum_small_values():
    # [0]=0, [1]=1, [2]=q+1/q, [-1]=-1, [3]=q^2+1+q^-2
    assert Scalar.qnum(0).is_zero()
    assert Scalar.qnum(1) == Scalar.from_rational(1)
    assert Scalar.qnum(-1) == Scalar.from_rational(-1)
    assert Scalar.qnum(2) == Scalar({2: 1, -2: 1})
    assert Scalar.qnum(3) == Scalar({4: 1, 0: 1, -4: 1})
    assert Scalar.qnum(-2) == -Scalar.qnum(2)


def test_qnum_matches_closed_form_numerically():
    q = 1.5
    for n in range(-8, 9):
        want = (q ** n - q ** (-n)) / (q - 1 / q)
        got = Scalar.qnum(n).evaluate(q)
        assert got.imag == 0
        assert math.isclose(got.real, want, rel_tol=1e-13, abs_tol=1e-13)


def test_lam_localization_cancels():
    lam = Scalar.lam_poly()
    inv = Scalar.inv_lam()
    assert lam * inv == Scalar.from_rational(1)
    assert inv * lam * lam == lam
    # (q^n - q^-n)/lam normalizes to the polynomial [n]
    for n in range(1, 7):
        num = Scalar.q_power(n) - Scalar.q_power(-n)
        assert num * Scalar.inv_lam() == Scalar.qnum(n)


def test_lam_power_is_minimal():
    s = Scalar({0: 1}, lam=2)
    assert s.lam == 2
    t = s * Scalar.lam_poly()
    assert t.lam == 1
    assert t.num == {0: QQi(1, 0)}


def test_add_mixed_lam_denominators():
    # 1/lam + 1 = (1 + lam)/lam, and back
    x = Scalar.inv_lam() + Scalar.from_rational(1)
    assert x.lam == 1
    assert x - Scalar.from_rational(1) == Scalar.inv_lam()


def test_conj_is_antilinear_on_i():
    z = Scalar.i() * Scalar.s_power(3) + Scalar.from_rational(2)
    assert z.conj() == -Scalar.i() * Scalar.s_power(3) + Scalar.from_rational(2)
    assert (z * z.conj()).conj() == z * z.conj()


def test_evaluate_exact_even_powers():
    q = Fraction(3, 2)
    z = Scalar.q_power(2) - Scalar.q_power(-1) * Scalar.i()
    v = z.evaluate_exact(q)
    assert v.re == Fraction(9, 4)
    assert v.im == -Fraction(2, 3)
    with pytest.raises(ValueError):
        Scalar.s_power(1).evaluate_exact(q)


def test_evaluate_matches_exact():
    q = Fraction(3, 2)
    z = Scalar.qnum(4) * Scalar.inv_lam() + Scalar.i() * Scalar.q_power(-2)
    approx = z.evaluate(float(q))
    exact = z.evaluate_exact(q)
    assert math.isclose(approx.real, float(exact.re), rel_tol=1e-13)
    assert math.isclose(approx.imag, float(exact.im), rel_tol=1e-13)


def test_str_parse_round_trip_random():
    rng = random.Random(20260816)
    for _ in range(200):
        num = {}
        for _ in range(rng.randrange(0, 5)):
            e = rng.randrange(-6, 7)
            num[e] = QQi(Fraction(rng.randrange(-9, 10), rng.randrange(1, 5)),
                         Fraction(rng.randrange(-9, 10), rng.randrange(1, 5)))
        z = Scalar(num, lam=rng.randrange(0, 3))
        assert parse_scalar(str(z)) == z


def test_str_examples():
    assert str(Scalar()) == "0"
    assert str(Scalar.from_rational(-2)) == "-2"
    assert str(Scalar.qnum(2)) == "s^2 + s^-2"
    assert str(Scalar.i() * Scalar.s_power(1) * Scalar.inv_lam()) == "(i*s^1)/lam"
    assert str(Scalar({0: QQi(0, -1)}, lam=2)) == "(-1*i)/lam^2"
