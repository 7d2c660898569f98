"""Jackson integration: indefinite, definite, improper; scalar product; Green.

The definite integral between same-parity exponents is the weighted trace

    integral from sigma q^(2N) to sigma q^(2M) of h
        = lam * sum_{mu=N+1}^{M} (sigma q^(2mu-1)) h(sigma q^(2mu-1))

(and the odd-endpoint twin), i.e. it samples only sites of the opposite
parity.  The improper integral halves the sum of both parity families
and weights each sector with its sign, which cancels the sign of the x
eigenvalue and leaves the positive Jackson measure (1/2) lam q^n per site.
"""

from __future__ import annotations

from .fields import LaurentPoly, NotInImage, L_op, nabla_preimage
from .lattice import GridMismatch, InsufficientPadding, LatticeFn


class NotIntegrable(Exception):
    """x^-1 term present: no preimage under the derivative."""


class DivergentBranch(Exception):
    """The chosen inverse-derivative series diverges for this field."""


class ParityMismatch(Exception):
    """Definite-integral endpoints must share parity."""


class NotConverged(Exception):
    """Window tails of an improper integral exceed tolerance."""


def indefinite_integral(f):
    """Inverse of nabla with zero constant term: x^n -> x^(n+1)/[n+1]."""
    try:
        return nabla_preimage(f)
    except NotInImage as e:
        raise NotIntegrable(str(e)) from e


def nabla_inverse_series(f, branch, terms):
    """Truncated shift-operator series for the inverse derivative.

    branch 'plus':  lam * sum_nu L^(2nu) L (x f), converges for x^m, m >= 0
    branch 'minus': -lam * sum_nu L^(-2nu) L^-1 (x f), converges for m <= -2
    """
    ctx = f.ctx
    if branch == "plus":
        if any(m <= -1 for m in f.coeffs):
            raise DivergentBranch("plus branch needs monomials x^m, m >= 0")
        sign, direction = 1, 1
    elif branch == "minus":
        if any(m >= -1 for m in f.coeffs):
            raise DivergentBranch("minus branch needs monomials x^m, m <= -2")
        sign, direction = -1, -1
    else:
        raise ValueError("branch must be 'plus' or 'minus'")
    xf = LaurentPoly(ctx, {m + 1: c for m, c in f.coeffs.items()})
    acc = LaurentPoly.zero(ctx)
    for nu in range(terms):
        acc = acc + L_op(xf, direction * (2 * nu + 1))
    return acc.scale(sign * ctx.lam)


def _site_exponents(lower_exp, upper_exp):
    if (upper_exp - lower_exp) % 2:
        raise ParityMismatch("endpoints must share parity")
    if lower_exp >= upper_exp:
        raise ValueError("need lower_exp < upper_exp")
    return range(lower_exp + 1, upper_exp, 2)


def definite_integral(h, lower_exp, upper_exp, sector=1):
    """Trace-formula integral from sigma q^lower to sigma q^upper.

    h may be a LaurentPoly (evaluated exactly on the exact backend) or a
    LatticeFn (sampled at the opposite-parity sites in between).
    """
    if isinstance(h, LatticeFn):
        ctx = h.grid.ctx
        acc = 0j
        for n in _site_exponents(lower_exp, upper_exp):
            acc += (sector * ctx.qpow(n)) * h.value(sector, n)
        return ctx.lam * acc
    ctx = h.ctx
    acc = ctx.zero
    for n in _site_exponents(lower_exp, upper_exp):
        pt = sector * ctx.qpow(n)
        acc = acc + ctx.coerce(pt) * h.evaluate(pt)
    return ctx.coerce(ctx.lam) * acc


def monomial_integral_closed_form(ctx, n, lower_exp, upper_exp):
    """x^n from q^lower to q^upper: (q^(upper(n+1)) - q^(lower(n+1)))/[n+1];
    for n = -1, lam times the number of double steps."""
    if (upper_exp - lower_exp) % 2:
        raise ParityMismatch("endpoints must share parity")
    if n == -1:
        return ctx.lam * ((upper_exp - lower_exp) // 2)
    num = ctx.qpow(upper_exp * (n + 1)) - ctx.qpow(lower_exp * (n + 1))
    return num / ctx.qnum(n + 1)


def improper_integral(h, tail_tol=1e-10, tail_sites=2):
    """(1/2) lam sum over sectors and all valid sites of q^n h(sigma q^n),
    the sector sign being cancelled against the x eigenvalue's sign."""
    ctx = h.grid.ctx
    lo, hi = h.valid_window()
    acc = 0j
    worst_tail = 0.0
    for s in h.grid.sectors:
        for n in range(lo, hi + 1):
            term = ctx.qpow(n) * h.value(s, n)
            acc += term
            if n < lo + tail_sites or n > hi - tail_sites:
                worst_tail = max(worst_tail, abs(ctx.lam * term))
    if worst_tail > tail_tol:
        raise NotConverged(
            f"window tail term {worst_tail:.3e} exceeds {tail_tol:.3e}")
    return 0.5 * ctx.lam * acc


def scalar_product(chi, psi, tail_tol=1e-10):
    """(chi, psi) = improper integral of conj(chi) psi."""
    if chi.grid != psi.grid:
        raise GridMismatch("scalar product needs a common grid")
    return improper_integral(chi.conj() * psi, tail_tol=tail_tol)


def norm(psi, tail_tol=1e-10):
    return abs(scalar_product(psi, psi, tail_tol=tail_tol)) ** 0.5


def check_green(f, g, lower_exp, upper_exp, sector=1):
    """LHS - RHS of the windowed Green identity on lattice data.

    LHS: definite integral of (nabla^2 f) g - f (nabla^2 g);
    RHS: boundary values of (nabla f)(L^-1 g) - (L^-1 f)(nabla g).
    """
    integrand = f.nabla2_fn() * g - f * g.nabla2_fn()
    lhs = definite_integral(integrand, lower_exp, upper_exp, sector)
    flux = f.nabla_fn() * g.L_shift(-1) - f.L_shift(-1) * g.nabla_fn()
    rhs = flux.value(sector, upper_exp) - flux.value(sector, lower_exp)
    return lhs - rhs
