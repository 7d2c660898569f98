"""Calculus of fields: Laurent polynomials under the q-derivative and scale map.

nabla acts on monomials as x^n -> [n] x^(n-1) and equals
lam^-1 x^-1 (L^-1 - L); both routes are implemented and must agree.
L rescales the argument by 1/q.  The one-form layer carries the two
Leibniz-rule families for the exterior derivative d = dx nabla, indexed
by an integer b and a variant flag:

    variant A:  d(fg) = df (L^-1 g) + (L^b f) dg,   dx x = q^(1-b) x dx
    variant B:  d(fg) = df (L g)   + (L^b f) dg,    dx x = q^(-1-b) x dx

Default is variant A with b = 1, where dx and x commute.
"""

from __future__ import annotations

from .context import QContext


class NotInImage(Exception):
    """The field has no preimage under nabla."""


class LaurentPoly:
    __slots__ = ("ctx", "coeffs")

    def __init__(self, ctx, coeffs=None):
        self.ctx = ctx
        out = {}
        for n, c in (coeffs or {}).items():
            c = ctx.coerce(c)
            if not ctx.is_zero(c):
                out[n] = c
        self.coeffs = out

    @classmethod
    def monomial(cls, ctx, n, coeff=1):
        return cls(ctx, {n: coeff})

    @classmethod
    def zero(cls, ctx):
        return cls(ctx)

    @classmethod
    def one(cls, ctx):
        return cls(ctx, {0: 1})

    def _wrap(self, coeffs):
        f = LaurentPoly.__new__(LaurentPoly)
        f.ctx = self.ctx
        f.coeffs = coeffs
        return f

    def __add__(self, other):
        out = dict(self.coeffs)
        for n, c in other.coeffs.items():
            r = out.get(n, self.ctx.zero) + c
            if self.ctx.is_zero(r):
                out.pop(n, None)
            else:
                out[n] = r
        return self._wrap(out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return self._wrap({n: -c for n, c in self.coeffs.items()})

    def __mul__(self, other):
        out = {}
        for n1, c1 in self.coeffs.items():
            for n2, c2 in other.coeffs.items():
                n = n1 + n2
                r = out.get(n, self.ctx.zero) + c1 * c2
                if self.ctx.is_zero(r):
                    out.pop(n, None)
                else:
                    out[n] = r
        return self._wrap(out)

    def scale(self, v):
        v = self.ctx.coerce(v)
        if self.ctx.is_zero(v):
            return self._wrap({})
        return self._wrap({n: c * v for n, c in self.coeffs.items()})

    def conj(self):
        if self.ctx.exact:
            return self._wrap({n: c.conj() for n, c in self.coeffs.items()})
        return self._wrap({n: c.conjugate() for n, c in self.coeffs.items()})

    def is_zero(self):
        return not self.coeffs

    def __eq__(self, other):
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    __hash__ = None

    def evaluate(self, x0):
        acc = self.ctx.zero
        for n, c in self.coeffs.items():
            acc = acc + c * x0 ** n
        return acc

    def max_abs(self):
        """Largest coefficient magnitude (double backend)."""
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def __str__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for n in sorted(self.coeffs, reverse=True):
            c = self.coeffs[n]
            body = str(c) if self.ctx.exact else repr(c)
            parts.append(f"({body}) x^{n}" if n else f"({body})")
        return " + ".join(parts)

    def __repr__(self):
        return f"LaurentPoly<{self}>"


def nabla(f, route="qnumber"):
    """q-derivative: x^n -> [n] x^(n-1), or the equivalent shift route."""
    ctx = f.ctx
    if route == "qnumber":
        out = {}
        for n, c in f.coeffs.items():
            if n == 0:
                continue
            r = out.get(n - 1, ctx.zero) + c * ctx.qnum(n)
            if not ctx.is_zero(r):
                out[n - 1] = r
            else:
                out.pop(n - 1, None)
        return f._wrap(out)
    if route == "shift":
        g = L_op(f, -1) - L_op(f, 1)
        out = {n - 1: c * ctx.inv_lam for n, c in g.coeffs.items()}
        return f._wrap({n: c for n, c in out.items() if not ctx.is_zero(c)})
    raise ValueError(f"unknown route {route!r}")


def L_op(f, power=1):
    """Scale map L^power: x^n -> q^(-power*n) x^n."""
    ctx = f.ctx
    return f._wrap({n: c * ctx.qpow(-power * n) for n, c in f.coeffs.items()})


def nabla_preimage(f):
    """Solve nabla(g) = f; raises NotInImage when x^-1 terms are present."""
    ctx = f.ctx
    out = {}
    for n, c in f.coeffs.items():
        if n == -1:
            raise NotInImage("x^-1 has no preimage under nabla")
        out[n + 1] = c * (ctx.one / ctx.coerce(ctx.qnum(n + 1))
                          if ctx.exact else 1.0 / ctx.qnum(n + 1))
    return f._wrap(out)


# -- identity residuals (all must vanish identically) -----------------------


def leibniz_residual(f, g, form=1):
    """nabla(fg) minus one of the two product-rule expansions."""
    lhs = nabla(f * g)
    if form == 1:
        rhs = nabla(f) * L_op(g, 1) + L_op(f, -1) * nabla(g)
    elif form == 2:
        rhs = nabla(f) * L_op(g, -1) + L_op(f, 1) * nabla(g)
    else:
        raise ValueError("form must be 1 or 2")
    return lhs - rhs


def comultiplication_residual(f, g):
    """Difference of the two coproduct expansions acting on fields."""
    a = nabla(f) * L_op(g, 1) + L_op(f, -1) * nabla(g)
    b = nabla(f) * L_op(g, -1) + L_op(f, 1) * nabla(g)
    return a - b


def morphism_residual(f):
    """L(nabla f) - q nabla(L f); the grade relation L nabla = q nabla L."""
    return L_op(nabla(f), 1) - nabla(L_op(f, 1)).scale(f.ctx.q)


# -- one-forms --------------------------------------------------------------


class OneForm:
    """dx * coeff with the commutation rule indexed by (b, variant)."""

    __slots__ = ("coeff", "b", "variant")

    def __init__(self, coeff, b=1, variant="A"):
        if variant not in ("A", "B"):
            raise ValueError("variant must be 'A' or 'B'")
        self.coeff = coeff
        self.b = b
        self.variant = variant

    def _check(self, other):
        if self.b != other.b or self.variant != other.variant:
            raise ValueError("one-forms carry different Leibniz conventions")

    def __add__(self, other):
        self._check(other)
        return OneForm(self.coeff + other.coeff, self.b, self.variant)

    def __sub__(self, other):
        self._check(other)
        return OneForm(self.coeff - other.coeff, self.b, self.variant)

    def left_mul(self, f):
        """f * (dx h): move x powers of f past dx."""
        # x^m dx = q^(kappa m) dx x^m with kappa = b-1 (A) or b+1 (B)
        kappa = self.b - 1 if self.variant == "A" else self.b + 1
        return OneForm(L_op(f, -kappa) * self.coeff, self.b, self.variant)

    def right_mul(self, f):
        return OneForm(self.coeff * f, self.b, self.variant)

    def is_zero(self):
        return self.coeff.is_zero()

    def __eq__(self, other):
        if not isinstance(other, OneForm):
            return NotImplemented
        return (self.b == other.b and self.variant == other.variant
                and self.coeff == other.coeff)

    __hash__ = None

    def __repr__(self):
        return f"OneForm<dx * {self.coeff}; b={self.b}, {self.variant}>"


def differential(f, b=1, variant="A"):
    """d f = dx (nabla f) as a OneForm carrying the chosen convention."""
    return OneForm(nabla(f), b, variant)


def d_leibniz_residual(f, g, b=1, variant="A"):
    """d(fg) minus the variant's product rule; identically zero."""
    lhs = differential(f * g, b, variant)
    shift = -1 if variant == "A" else 1
    rhs = differential(f, b, variant).right_mul(L_op(g, shift)) \
        + differential(g, b, variant).left_mul(L_op(f, b))
    return lhs - rhs


def d_squared(f, b=1, variant="A"):
    """d(d f).  Ordering dx past x in dx dx x both ways forces
    (1 + q^(1-b)) dx^2 = 0 (variant A; q^(-1-b) for B), so dx^2 = 0 and
    the result is the zero 2-form, independent of f."""
    wedge_factor = 1 + (f.ctx.qpow(1 - b) if variant == "A"
                        else f.ctx.qpow(-1 - b))
    assert not f.ctx.is_zero(f.ctx.coerce(wedge_factor))
    return LaurentPoly.zero(f.ctx)
