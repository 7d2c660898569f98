"""Deformation-parameter context shared by all numeric layers.

Two backends: exact (q a Fraction, coefficients Gaussian rationals) for
algebraic identity checks, and double (q a float, coefficients complex)
for lattice numerics.  lam = q - 1/q throughout.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .scalars import QQi, _as_qqi


class QContext:
    __slots__ = ("q", "backend", "lam", "inv_lam")

    def __init__(self, q):
        if isinstance(q, float):
            if not q > 1.0:
                raise ValueError("q must be > 1")
            self.q = q
            self.backend = "double"
            self.lam = q - 1.0 / q
            self.inv_lam = 1.0 / self.lam
        elif isinstance(q, (int, Fraction)):
            q = Fraction(q)
            if not q > 1:
                raise ValueError("q must be > 1")
            self.q = q
            self.backend = "exact"
            self.lam = q - 1 / q
            self.inv_lam = 1 / self.lam
        else:
            raise TypeError("q must be a Fraction (exact) or float (double)")

    @property
    def exact(self):
        return self.backend == "exact"

    @property
    def sqrt_q(self):
        if self.exact:
            raise ValueError("q^(1/2) is not rational; use the double backend")
        return math.sqrt(self.q)

    def qpow(self, n):
        return self.q ** n

    def qnum(self, n):
        """[n] = (q^n - q^-n) / (q - q^-1)."""
        return (self.qpow(n) - self.qpow(-n)) * self.inv_lam

    def qfact(self, n):
        """[n]! with [0]! = 1."""
        if n < 0:
            raise ValueError("q-factorial needs n >= 0")
        acc = self.one
        for k in range(2, n + 1):
            acc = acc * self.qnum(k)
        return acc

    def coerce(self, v):
        """Coefficient in this backend's ring."""
        if self.exact:
            return _as_qqi(v) if not isinstance(v, QQi) else v
        return complex(v)

    @property
    def zero(self):
        return QQi(0, 0) if self.exact else 0j

    @property
    def one(self):
        return QQi(1, 0) if self.exact else 1 + 0j

    def is_zero(self, v):
        return v.is_zero() if self.exact else v == 0

    def __repr__(self):
        return f"QContext(q={self.q!r}, backend={self.backend})"
