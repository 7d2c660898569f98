"""Sampled fields on the q-lattice x = sigma q^n.

A LatticeFn stores complex values on a finite exponent window for one or
both sign sectors.  The scale map and the derivative are index shifts:

    (L^k f)(sigma q^n)   = f(sigma q^(n-k))
    (nabla f)(sigma q^n) = [f(sigma q^(n+1)) - f(sigma q^(n-1))] / (lam sigma q^n)

A shift cannot see past the window edge, so functions carry a count of
invalid layers at each end (pad_lo, pad_hi); shifted-in sites hold zero
and are excluded from any residual check.  Checks and integrals read
valid sites only.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np


class GridMismatch(Exception):
    """Operands live on different grids."""


class InsufficientPadding(Exception):
    """A requested site lies in the invalid boundary layer."""


class LatticeGrid:
    __slots__ = ("ctx", "n_min", "n_max", "sectors")

    def __init__(self, ctx, n_min, n_max, sectors=(1, -1)):
        if n_min >= n_max:
            raise ValueError("need n_min < n_max")
        sectors = tuple(sectors)
        if not sectors or any(s not in (1, -1) for s in sectors):
            raise ValueError("sectors must be a nonempty subset of {+1, -1}")
        self.ctx = ctx
        self.n_min = n_min
        self.n_max = n_max
        self.sectors = sectors

    @property
    def size(self):
        return self.n_max - self.n_min + 1

    def exponents(self):
        return range(self.n_min, self.n_max + 1)

    def index(self, n):
        if not self.n_min <= n <= self.n_max:
            raise IndexError(f"exponent {n} outside [{self.n_min}, {self.n_max}]")
        return n - self.n_min

    def point(self, sigma, n):
        return sigma * self.ctx.qpow(n)

    def __eq__(self, other):
        if not isinstance(other, LatticeGrid):
            return NotImplemented
        return (self.ctx.q == other.ctx.q and self.n_min == other.n_min
                and self.n_max == other.n_max and self.sectors == other.sectors)

    __hash__ = None

    def __repr__(self):
        return (f"LatticeGrid(q={self.ctx.q}, n=[{self.n_min}, {self.n_max}], "
                f"sectors={self.sectors})")


class LatticeFn:
    __slots__ = ("grid", "values", "pad_lo", "pad_hi")

    def __init__(self, grid, values=None, pad_lo=0, pad_hi=0):
        self.grid = grid
        self.values = {}
        for s in grid.sectors:
            v = None if values is None else values.get(s)
            if v is None:
                self.values[s] = np.zeros(grid.size, dtype=complex)
            else:
                arr = np.asarray(v, dtype=complex)
                if arr.shape != (grid.size,):
                    raise ValueError("value array does not match the grid")
                self.values[s] = arr.copy()
        self.pad_lo = pad_lo
        self.pad_hi = pad_hi

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, grid):
        return cls(grid)

    @classmethod
    def from_callable(cls, grid, fn):
        vals = {}
        for s in grid.sectors:
            vals[s] = np.array([fn(grid.point(s, n)) for n in grid.exponents()],
                               dtype=complex)
        return cls(grid, vals)

    @classmethod
    def from_sites(cls, grid, sites):
        """sites: map (sigma, n) -> value; elsewhere zero."""
        f = cls(grid)
        for (s, n), v in sites.items():
            f.values[s][grid.index(n)] = v
        return f

    def copy(self):
        return LatticeFn(self.grid, self.values, self.pad_lo, self.pad_hi)

    # -- site access ----------------------------------------------------------

    def valid_window(self):
        return (self.grid.n_min + self.pad_lo, self.grid.n_max - self.pad_hi)

    def is_valid(self, n):
        lo, hi = self.valid_window()
        return lo <= n <= hi

    def value(self, sigma, n, require_valid=True):
        if require_valid and not self.is_valid(n):
            raise InsufficientPadding(
                f"site n={n} is inside the invalid boundary layer")
        return self.values[sigma][self.grid.index(n)]

    # -- pointwise algebra ----------------------------------------------------

    def _check(self, other):
        if self.grid != other.grid:
            raise GridMismatch("operands live on different grids")

    def _wrap(self, values, pad_lo, pad_hi):
        f = LatticeFn.__new__(LatticeFn)
        f.grid = self.grid
        f.values = values
        f.pad_lo = pad_lo
        f.pad_hi = pad_hi
        return f

    def __add__(self, other):
        self._check(other)
        return self._wrap({s: self.values[s] + other.values[s]
                           for s in self.grid.sectors},
                          max(self.pad_lo, other.pad_lo),
                          max(self.pad_hi, other.pad_hi))

    def __sub__(self, other):
        self._check(other)
        return self._wrap({s: self.values[s] - other.values[s]
                           for s in self.grid.sectors},
                          max(self.pad_lo, other.pad_lo),
                          max(self.pad_hi, other.pad_hi))

    def __neg__(self):
        return self._wrap({s: -self.values[s] for s in self.grid.sectors},
                          self.pad_lo, self.pad_hi)

    def __mul__(self, other):
        """Pointwise product with another LatticeFn."""
        self._check(other)
        return self._wrap({s: self.values[s] * other.values[s]
                           for s in self.grid.sectors},
                          max(self.pad_lo, other.pad_lo),
                          max(self.pad_hi, other.pad_hi))

    def scale(self, v):
        return self._wrap({s: self.values[s] * complex(v)
                           for s in self.grid.sectors},
                          self.pad_lo, self.pad_hi)

    def conj(self):
        return self._wrap({s: np.conj(self.values[s])
                           for s in self.grid.sectors},
                          self.pad_lo, self.pad_hi)

    def x_multiply(self, power=1):
        """Multiply by x^power pointwise (x = sigma q^n)."""
        out = {}
        for s in self.grid.sectors:
            pts = np.array([self.grid.point(s, n) ** power
                            for n in self.grid.exponents()], dtype=complex)
            out[s] = self.values[s] * pts
        return self._wrap(out, self.pad_lo, self.pad_hi)

    # -- shifts and derivatives ------------------------------------------------

    def L_shift(self, k=1):
        """(L^k f)(sigma q^n) = f(sigma q^(n-k))."""
        out = {}
        for s in self.grid.sectors:
            shifted = np.zeros(self.grid.size, dtype=complex)
            if k >= 0:
                if k < self.grid.size:
                    shifted[k:] = self.values[s][:self.grid.size - k]
            else:
                if -k < self.grid.size:
                    shifted[:k] = self.values[s][-k:]
            out[s] = shifted
        pad_lo = self.pad_lo + max(k, 0)
        pad_hi = self.pad_hi + max(-k, 0)
        return self._wrap(out, pad_lo, pad_hi)

    def nabla_fn(self):
        """Two-neighbor difference quotient; widens both pads by one."""
        lam = self.grid.ctx.lam
        out = {}
        for s in self.grid.sectors:
            v = self.values[s]
            d = np.zeros(self.grid.size, dtype=complex)
            d[1:-1] = v[2:] - v[:-2]
            pts = np.array([lam * s * self.grid.ctx.qpow(n)
                            for n in self.grid.exponents()])
            d = d / pts
            out[s] = d
        return self._wrap(out, self.pad_lo + 1, self.pad_hi + 1)

    def nabla2_fn(self):
        return self.nabla_fn().nabla_fn()

    # -- diagnostics ---------------------------------------------------------

    def max_abs_interior(self, extra_margin=0):
        lo, hi = self.valid_window()
        lo, hi = lo + extra_margin, hi - extra_margin
        if lo > hi:
            raise InsufficientPadding("no interior sites remain")
        i0, i1 = self.grid.index(lo), self.grid.index(hi)
        return max(float(np.max(np.abs(self.values[s][i0:i1 + 1])))
                   for s in self.grid.sectors)

    def __repr__(self):
        lo, hi = self.valid_window()
        return (f"LatticeFn(grid={self.grid!r}, valid=[{lo}, {hi}])")


# -- serialization -------------------------------------------------------------


def to_csv(fn, stream=None):
    """Valid sites as rows sigma,n,re,im; floats via repr (bit-exact)."""
    own = stream is None
    if own:
        stream = io.StringIO()
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["sigma", "n", "re", "im"])
    lo, hi = fn.valid_window()
    for s in fn.grid.sectors:
        for n in range(lo, hi + 1):
            v = fn.values[s][fn.grid.index(n)]
            w.writerow([s, n, repr(float(v.real)), repr(float(v.imag))])
    return stream.getvalue() if own else None


def from_csv(ctx, text_or_stream):
    stream = (io.StringIO(text_or_stream)
              if isinstance(text_or_stream, str) else text_or_stream)
    rows = list(csv.reader(stream))
    if not rows or rows[0] != ["sigma", "n", "re", "im"]:
        raise ValueError("missing sigma,n,re,im header")
    sites = {}
    for sigma, n, re, im in rows[1:]:
        sites[(int(sigma), int(n))] = complex(float(re), float(im))
    if not sites:
        raise ValueError("no data rows")
    ns = [n for (_, n) in sites]
    sectors = tuple(sorted({s for (s, _) in sites}, reverse=True))
    grid = LatticeGrid(ctx, min(ns), max(ns), sectors)
    return LatticeFn.from_sites(grid, sites)


def to_json(fn):
    lo, hi = fn.valid_window()
    doc = {
        "q": float(fn.grid.ctx.q),
        "n_min": lo,
        "n_max": hi,
        "sectors": list(fn.grid.sectors),
        "values": {
            str(s): [[float(v.real), float(v.imag)]
                     for v in fn.values[s][fn.grid.index(lo):fn.grid.index(hi) + 1]]
            for s in fn.grid.sectors
        },
    }
    return json.dumps(doc, sort_keys=True)


def from_json(ctx, text):
    doc = json.loads(text)
    grid = LatticeGrid(ctx, doc["n_min"], doc["n_max"],
                       tuple(doc["sectors"]))
    vals = {}
    for s in grid.sectors:
        vals[s] = np.array([complex(re, im) for re, im in doc["values"][str(s)]],
                           dtype=complex)
    return LatticeFn(grid, vals)
