"""q-special functions: cos_q, sin_q, the q-exponential, lattice Gaussian.

Series with superexponentially decaying terms (factor q^(-2n(n+1))), so a
truncated sum is accurate to its first dropped term.  For large arguments
z = q^m the intermediate terms peak near q^((m-1)^2/2) before the decay
sets in, far beyond double range, while the sum itself is tiny; those
evaluations run in mpmath with a working precision sized from the peak
estimate, and only the final value is rounded to double (underflow to
zero is harmless, since every later use weights these values down).
Small arguments use a plain double loop.  Values are cached per instance.
"""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath

_FLOAT_STOP = 1e-16
_MP_GUARD_DIGITS = 40


class DivergentProduct(Exception):
    """Infinite q-Pochhammer product with |p| >= 1."""


class OutOfRadius(Exception):
    """q-exponential series argument on or outside the unit circle."""


class QCombinatorics:
    """[n], [n]!, and (a; p)_n over a QContext, with per-instance caches."""

    def __init__(self, ctx):
        self.ctx = ctx
        self._fact = {0: ctx.one if not ctx.exact else Fraction(1)}

    def qnum(self, n):
        return self.ctx.qnum(n)

    def qfact(self, n):
        if n < 0:
            raise ValueError("q-factorial needs n >= 0")
        if n not in self._fact:
            top = max(self._fact)
            acc = self._fact[top]
            for k in range(top + 1, n + 1):
                acc = acc * self.ctx.qnum(k)
                self._fact[k] = acc
        return self._fact[n]

    def qpoch(self, a, p, n):
        """(a; p)_n = prod_{k<n} (1 - a p^k)."""
        if n == math.inf:
            return self.qpoch_inf(a, p)
        if n < 0:
            raise ValueError("Pochhammer index must be >= 0 or inf")
        acc = Fraction(1) if self.ctx.exact else 1.0
        f = a
        for _ in range(n):
            acc = acc * (1 - f)
            f = f * p
        return acc

    def qpoch_inf(self, a, p, tol=1e-18):
        if self.ctx.exact:
            raise ValueError("infinite products need the double backend")
        if abs(p) >= 1:
            raise DivergentProduct(f"|p| = {abs(p)} >= 1")
        acc = 1.0
        f = a
        while abs(f) > tol:
            acc *= 1 - f
            f *= p
        return acc


def _series_float(q, z, kind):
    """Double-precision alternating series; returns (value, first dropped)."""
    qm2 = q ** (-2.0)
    if kind == "cos":
        term = 1.0
        next_den_k = 1  # next denominator factors are (1-q^-2k) for k = 1, 2
    else:
        term = z / (1.0 - qm2)
        next_den_k = 2
    total = term
    running_max = abs(term)
    n = 0
    while True:
        # t_{n+1}/t_n = -q^(-4(n+1)) z^2 / ((1-q^-2j)(1-q^-2(j+1)))
        d1 = 1.0 - q ** (-2.0 * next_den_k)
        d2 = 1.0 - q ** (-2.0 * (next_den_k + 1))
        term = -term * q ** (-4.0 * (n + 1)) * z * z / (d1 * d2)
        if abs(term) < _FLOAT_STOP * running_max:
            return total, abs(term)
        total += term
        running_max = max(running_max, abs(total), abs(term))
        n += 1
        next_den_k += 2


def _series_mp(q, z, kind, digits):
    with mpmath.workdps(digits):
        qm = mpmath.mpf(q)
        zm = mpmath.mpf(z)
        if kind == "cos":
            term = mpmath.mpf(1)
            next_den_k = 1
        else:
            term = zm / (1 - qm ** -2)
            next_den_k = 2
        total = term
        running_max = abs(term)
        stop = mpmath.mpf(10) ** (-digits + 5)
        n = 0
        while True:
            d1 = 1 - qm ** (-2 * next_den_k)
            d2 = 1 - qm ** (-2 * (next_den_k + 1))
            term = -term * qm ** (-4 * (n + 1)) * zm * zm / (d1 * d2)
            if abs(term) < stop * running_max:
                return float(total), float(abs(term))
            total += term
            running_max = max(running_max, abs(total), abs(term))
            n += 1
            next_den_k += 2


class SpecialFunctions:
    """Evaluators over one double-backend context, values cached."""

    def __init__(self, ctx):
        if ctx.exact:
            raise ValueError("special-function evaluation uses the double backend")
        self.ctx = ctx
        self.comb = QCombinatorics(ctx)
        self._cache = {}
        self._nq = None

    # -- trigonometric family ---------------------------------------------

    def _eval(self, z, kind):
        z = float(z)
        key = (kind, z)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        sign = 1.0
        if z < 0:
            z = -z
            if kind == "sin":
                sign = -1.0
        q = self.ctx.q
        if z <= q * q:
            val, bound = _series_float(q, z, kind)
        else:
            m = math.log(z) / math.log(q)
            # On the even sublattice the value decays like q^(-m^2/2) times
            # a bounded constant; once even half that decay underflows any
            # double, skip the high-precision work and return exact zero.
            mr = round(m)
            if (abs(m - mr) < 1e-9 and mr % 2 == 0
                    and (mr * mr / 4.0) * math.log10(q) > 340.0):
                val, bound = 0.0, 0.0
            else:
                peak = ((m - 1.0) ** 2 / 2.0 + m + 4.0) * math.log10(q)
                digits = max(50, int(peak) + 330 + _MP_GUARD_DIGITS)
                val, bound = _series_mp(q, z, kind, digits)
        out = (sign * val, bound)
        self._cache[key] = out
        return out

    def cos_q(self, z, with_bound=False):
        val, bound = self._eval(z, "cos")
        return (val, bound) if with_bound else val

    def sin_q(self, z, with_bound=False):
        val, bound = self._eval(z, "sin")
        return (val, bound) if with_bound else val

    # -- normalization constant ---------------------------------------------

    def n_q(self):
        """N_q = (q^-2; q^-4)_inf / (q^-4; q^-4)_inf."""
        if self._nq is None:
            q = self.ctx.q
            self._nq = (self.comb.qpoch_inf(q ** -2, q ** -4)
                        / self.comb.qpoch_inf(q ** -4, q ** -4))
        return self._nq

    # -- q-exponential --------------------------------------------------------

    def q_exp(self, z, with_bound=False):
        """e_{q^-2}(z) = sum z^k / (q^-2; q^-2)_k, |z| < 1."""
        z = complex(z)
        if abs(z) >= 1:
            raise OutOfRadius(f"|z| = {abs(z)} is outside the unit radius")
        q = self.ctx.q
        total = 1.0 + 0j
        term = 1.0 + 0j
        running_max = 1.0
        k = 0
        while True:
            k += 1
            term = term * z / (1.0 - q ** (-2.0 * k))
            if abs(term) < _FLOAT_STOP * running_max:
                bound = abs(term) / (1.0 - abs(z))
                break
            total += term
            running_max = max(running_max, abs(total))
        return (total, bound) if with_bound else total

    # -- lattice Gaussian ------------------------------------------------------

    def lattice_gaussian(self, l, c0=1.0):
        """f(q^l) = q^(-(l^2 + l)/2) c0."""
        return self.ctx.qpow(-0.5 * (l * l + l)) * c0

    def gauss_sum_constants(self, c0=1.0, tol=1e-18):
        """(c0~, c0') by direct Gauss sums and by Jacobi triple products.

        c0~/c0 = sum_l q^(-2 l^2)      = (q^-4; q^-4) (-q^-2; q^-4)^2
        c0'/c0 = sum_l q^(-2 l(l+1))   = (q^-4; q^-4) (-q^-4; q^-4) (-1; q^-4)
        """
        q = self.ctx.q
        s_tilde = 1.0
        l = 1
        while True:
            t = 2.0 * q ** (-2.0 * l * l)
            if t < tol:
                break
            s_tilde += t
            l += 1
        s_prime = 0.0
        l = 0
        while True:
            # pair l and -(l+1) give the same exponent -2 l (l+1)
            t = 2.0 * q ** (-2.0 * l * (l + 1))
            if t < tol:
                break
            s_prime += t
            l += 1
        p4 = q ** -4
        base = self.comb.qpoch_inf(p4, p4)
        tilde_prod = base * self.comb.qpoch_inf(-(q ** -2), p4) ** 2
        prime_prod = base * self.comb.qpoch_inf(-p4, p4) \
            * self.comb.qpoch_inf(-1.0, p4)
        return {
            "c0_tilde": (c0 * s_tilde, c0 * tilde_prod),
            "c0_prime": (c0 * s_prime, c0 * prime_prod),
        }

    # -- eigenvalue table ------------------------------------------------------

    def nabla2_eigenvalue(self, basis, index_parity, n):
        """Tabulated nabla^2 eigenvalue of the C/S basis functions."""
        key = (basis, index_parity)
        expo = {
            ("C", "2n+1"): 4 * n + 1,
            ("C", "2n"): 4 * n - 1,
            ("S", "2n+1"): 4 * n + 3,
            ("S", "2n"): 4 * n + 1,
        }.get(key)
        if expo is None:
            raise ValueError(f"unknown basis entry {key!r}")
        return -self.ctx.inv_lam ** 2 * self.ctx.qpow(expo)
