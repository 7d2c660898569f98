"""Sublattice Fourier transform built on the q-trigonometric kernel.

Samples live on one parity family of the geometric lattice: the even
family indexes the points q^(-2k), the odd family the points q^(-2k+1).
The transform pairs a sequence with its expansion coefficients through
the kernel cos_q(q^(-2(k+n))) (or the sin_q analogue) and the summation
weight q^(-2k).  The kernel argument is always an even power, whatever
the family; the family changes only the points the values refer to and
the weight used in norms.

The defining sums run over all integers.  Here they are truncated to the
sequence window, so every transform checks that the weighted summands
have decayed at the window edges and refuses to silently drop a fat
tail.
"""

import csv
import io
import math

import numpy as np

from .integration import NotConverged
from .special import SpecialFunctions

_FAMILIES = ("even", "odd")


class WindowTooSmall(Exception):
    """An explicitly requested summation window cuts off visible weight."""


class SublatticeSeq:
    """Finite window of samples on one parity family of the lattice."""

    __slots__ = ("ctx", "k_min", "values", "family", "tau")

    def __init__(self, ctx, k_min, values, family="even", tau=None):
        if family not in _FAMILIES:
            raise ValueError(f"unknown family {family!r}")
        if tau not in (None, 1, -1):
            raise ValueError("tau must be +1, -1 or None")
        self.ctx = ctx
        self.k_min = int(k_min)
        self.values = np.asarray(values, dtype=complex)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("values must be a nonempty 1-d array")
        self.family = family
        self.tau = tau

    @classmethod
    def zero(cls, ctx, k_min, k_max, family="even"):
        return cls(ctx, k_min, np.zeros(k_max - k_min + 1, dtype=complex),
                   family=family)

    @classmethod
    def from_dict(cls, ctx, data, family="even", tau=None):
        k_min, k_max = min(data), max(data)
        vals = np.zeros(k_max - k_min + 1, dtype=complex)
        for k, v in data.items():
            vals[k - k_min] = v
        return cls(ctx, k_min, vals, family=family, tau=tau)

    @property
    def k_max(self):
        return self.k_min + self.values.size - 1

    def indices(self):
        return range(self.k_min, self.k_max + 1)

    def point(self, k):
        expo = -2 * k if self.family == "even" else -2 * k + 1
        return self.ctx.qpow(expo)

    def weight(self, k):
        expo = -2 * k if self.family == "even" else -2 * k + 1
        return self.ctx.qpow(expo)

    def value(self, k):
        if not self.k_min <= k <= self.k_max:
            raise IndexError(f"k={k} outside window [{self.k_min}, {self.k_max}]")
        return self.values[k - self.k_min]

    # -- algebra ---------------------------------------------------------

    def _check_compatible(self, other):
        if self.ctx is not other.ctx and self.ctx.q != other.ctx.q:
            raise ValueError("mixed deformation parameters")
        if self.family != other.family:
            raise ValueError("mixed parity families")
        if self.k_min != other.k_min or self.values.size != other.values.size:
            raise ValueError("window mismatch")

    def _merge_tau(self, other):
        return self.tau if self.tau == other.tau else None

    def __add__(self, other):
        self._check_compatible(other)
        return SublatticeSeq(self.ctx, self.k_min, self.values + other.values,
                             self.family, self._merge_tau(other))

    def __sub__(self, other):
        self._check_compatible(other)
        return SublatticeSeq(self.ctx, self.k_min, self.values - other.values,
                             self.family, self._merge_tau(other))

    def __neg__(self):
        return self.scale(-1)

    def scale(self, v):
        return SublatticeSeq(self.ctx, self.k_min, self.values * complex(v),
                             self.family, self.tau)

    def conj(self):
        return SublatticeSeq(self.ctx, self.k_min, np.conj(self.values),
                             self.family, self.tau)

    def max_abs(self):
        return float(np.max(np.abs(self.values)))

    def is_zero(self, tol=0.0):
        return self.max_abs() <= tol

    def weighted_norm_sq(self):
        """Sum of weight(k) |f(k)|^2 over the window."""
        acc = 0.0
        for k in self.indices():
            acc += self.weight(k) * abs(self.values[k - self.k_min]) ** 2
        return acc

    # -- serialization -----------------------------------------------------

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["k", "re", "im", "family"])
        for k in self.indices():
            v = self.values[k - self.k_min]
            w.writerow([k, repr(float(v.real)), repr(float(v.imag)),
                        self.family])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, ctx, text):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["k", "re", "im", "family"]:
            raise ValueError("bad header")
        data = {}
        families = set()
        for row in rows[1:]:
            if not row:
                continue
            k = int(row[0])
            data[k] = complex(float(row[1]), float(row[2]))
            families.add(row[3])
        if len(families) != 1:
            raise ValueError("rows must carry exactly one family")
        return cls.from_dict(ctx, data, family=families.pop())


class QFourier:
    """Kernel sums over a fixed deformation parameter.

    Kernel values are cached per integer argument exponent, so repeated
    transforms on the same window cost one dense matrix product each.
    """

    def __init__(self, ctx, special=None):
        if ctx.exact:
            raise ValueError("transforms need the double backend")
        self.ctx = ctx
        self.sf = special if special is not None else SpecialFunctions(ctx)
        self._nq = self.sf.n_q()

    def kernel(self, j, kind="cos"):
        z = self.ctx.qpow(-2 * j)
        return self.sf.cos_q(z) if kind == "cos" else self.sf.sin_q(z)

    # -- sequence transform -------------------------------------------------

    def transform(self, f, kind="cos", tail_tol=1e-10):
        """Expand f in the chosen kernel family; also its own inverse.

        Raises NotConverged when the weighted summand has not decayed
        below tail_tol (relative to its peak) at the window edges.
        """
        if kind not in ("cos", "sin"):
            raise ValueError(f"unknown kernel {kind!r}")
        k_idx = np.arange(f.k_min, f.k_max + 1)
        w = self.ctx.q ** (-2.0 * k_idx)
        wf = w * f.values
        scale = float(np.max(np.abs(wf)))
        if scale == 0.0:
            return SublatticeSeq(self.ctx, f.k_min,
                                 np.zeros_like(f.values), f.family, f.tau)
        edge = max(abs(wf[0]), abs(wf[-1]))
        if edge > tail_tol * scale:
            raise NotConverged(
                f"weighted summand at window edge is {edge / scale:.2e} of peak")
        j_lo = 2 * f.k_min
        j_hi = 2 * f.k_max
        kern = np.array([self.kernel(j, kind) for j in range(j_lo, j_hi + 1)])
        K = kern[np.add.outer(k_idx, k_idx) - j_lo]
        g = self._nq * (K @ wf)
        return SublatticeSeq(self.ctx, f.k_min, g, f.family, f.tau)

    def qft_cos(self, f, tail_tol=1e-10):
        return self.transform(f, "cos", tail_tol)

    def qft_cos_inverse(self, g, tail_tol=1e-10):
        # the kernel matrix is symmetric in (k, n); both directions are
        # the same sum, which is why the double transform is the identity
        return self.transform(g, "cos", tail_tol)

    def qft_sin(self, f, tail_tol=1e-10):
        return self.transform(f, "sin", tail_tol)

    def qft_sin_inverse(self, g, tail_tol=1e-10):
        return self.transform(g, "sin", tail_tol)

    # -- step function -------------------------------------------------------

    def _auto_floor(self, tol):
        # geometric tail of sum_{n < floor} q^(2n): keep it below tol
        return int(math.floor(math.log(tol * (1 - self.ctx.qpow(-2)))
                              / (2 * math.log(self.ctx.q)))) - 1

    def step_transform(self, M, k_indices, n_min=None, tol=1e-14):
        """Transform of the cut-off sequence (1 for n <= M, else 0).

        Points here sit at the positive powers q^(2k).  Returns {k: value}.
        """
        floor_needed = self._auto_floor(tol)
        if n_min is None:
            n_min = floor_needed
        elif n_min > floor_needed:
            raise WindowTooSmall(
                f"summation floor {n_min} drops visible weight; "
                f"need n_min <= {floor_needed}")
        out = {}
        for k in k_indices:
            acc = 0.0
            for n in range(n_min, M + 1):
                acc += self.ctx.qpow(2 * n) * self.sf.cos_q(self.ctx.qpow(2 * (k + n)))
            out[k] = self._nq * acc
        return out

    def step_closed_form(self, M, k):
        return self._nq * self.ctx.qpow(-2 * k) \
            * self.sf.sin_q(self.ctx.qpow(2 * (k + M)))

    def step_inverse(self, M, n_indices, k_min=None, k_max=None, tol=1e-14):
        """Transform the closed form back; recovers the cut-off sequence."""
        lo_needed = self._auto_floor(tol) - abs(M)
        hi_needed = -self._auto_floor(tol) + abs(M)
        if k_min is None:
            k_min = lo_needed
        elif k_min > lo_needed:
            raise WindowTooSmall(f"need k_min <= {lo_needed}")
        if k_max is None:
            k_max = hi_needed
        elif k_max < hi_needed:
            raise WindowTooSmall(f"need k_max >= {hi_needed}")
        out = {}
        for n in n_indices:
            acc = 0.0
            for k in range(k_min, k_max + 1):
                acc += self.ctx.qpow(2 * k) \
                    * self.sf.cos_q(self.ctx.qpow(2 * (k + n))) \
                    * self.step_closed_form(M, k)
            out[n] = acc * self._nq
        return out
