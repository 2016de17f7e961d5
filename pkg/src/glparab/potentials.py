"""Symmetric 2x2 matrix potentials and 2-component initial values.

Closed-form entries are finite sums of terms c, c*x^k, c*cos(m*pi*x),
c*sin(m*pi*x), c*exp(b*x); each term knows its derivative and exact
antiderivative, so traces and trace integrals of closed-form potentials incur
no quadrature error.  Sampled potentials live on a Grid1D and interpolate
cubically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .fields import Grid1D, cumulative_integral, differentiate, interpolate

TERM_KINDS = ("const", "power", "cos", "sin", "exp")


@dataclass(frozen=True)
class Term:
    """One closed-form term; x is always measured from 0."""

    kind: str
    c: float
    k: int = 0
    m: int = 0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise DomainError(f"unknown term kind {self.kind!r}")
        if self.kind == "power" and self.k < 1:
            raise DomainError("power terms need exponent k >= 1 (use const for k=0)")
        if self.kind in ("cos", "sin") and self.m < 1:
            raise DomainError("trig terms need frequency m >= 1")
        if self.kind == "exp" and self.b == 0.0:
            raise DomainError("exp terms need b != 0 (use const for b=0)")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return self.c * np.ones_like(x)
        if self.kind == "power":
            return self.c * x**self.k
        if self.kind == "cos":
            return self.c * np.cos(self.m * np.pi * x)
        if self.kind == "sin":
            return self.c * np.sin(self.m * np.pi * x)
        return self.c * np.exp(self.b * x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.zeros_like(x)
        if self.kind == "power":
            return self.c * self.k * x ** (self.k - 1)
        w = self.m * np.pi
        if self.kind == "cos":
            return -self.c * w * np.sin(w * x)
        if self.kind == "sin":
            return self.c * w * np.cos(w * x)
        return self.c * self.b * np.exp(self.b * x)

    def antiderivative(self, x):
        """Exact integral from 0 to x."""
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return self.c * x
        if self.kind == "power":
            return self.c * x ** (self.k + 1) / (self.k + 1)
        w = self.m * np.pi
        if self.kind == "cos":
            return self.c * np.sin(w * x) / w
        if self.kind == "sin":
            return self.c * (1.0 - np.cos(w * x)) / w
        return self.c * (np.exp(self.b * x) - 1.0) / self.b


@dataclass(frozen=True)
class TermSum:
    """Finite sum of closed-form terms; the empty sum is identically zero."""

    terms: tuple = ()

    @classmethod
    def of(cls, *specs):
        """Build from Term objects, dicts, or bare numbers (constants)."""
        out = []
        for s in specs:
            if isinstance(s, Term):
                out.append(s)
            elif isinstance(s, dict):
                out.append(Term(**s))
            else:
                out.append(Term("const", float(s)))
        return cls(tuple(out))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for t in self.terms:
            total = total + t.value(x)
        return total

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for t in self.terms:
            total = total + t.derivative(x)
        return total

    def antiderivative(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for t in self.terms:
            total = total + t.antiderivative(x)
        return total

    @property
    def constant(self):
        """The constant value if every term is const, else None."""
        if all(t.kind == "const" for t in self.terms):
            return float(sum(t.c for t in self.terms))
        return None


class MatrixPotential:
    """Symmetric 2x2 real potential on [0, L], closed-form or sampled."""

    def __init__(self, *, entries=None, grid=None, samples=None, domain=(0.0, 1.0)):
        self.domain = (float(domain[0]), float(domain[1]))
        if (entries is None) == (samples is None):
            raise DomainError("give either closed-form entries or samples")
        if entries is not None:
            p11, p12, p22 = entries
            self.entries = (p11, p12, p22)
            self.grid = None
            self.samples = None
        else:
            if grid is None:
                raise DomainError("sampled potentials need a grid")
            vals = np.asarray(samples, dtype=float)
            if vals.shape != (grid.n, 2, 2):
                raise DomainError("samples must have shape (n, 2, 2)")
            if not np.all(np.isfinite(vals)):
                raise DomainError("potential samples must be finite")
            if np.max(np.abs(vals[:, 0, 1] - vals[:, 1, 0])) > 1e-12 * (1.0 + np.max(np.abs(vals))):
                raise DomainError("potential samples are not symmetric")
            self.entries = None
            self.grid = grid
            self.samples = vals
            self.domain = (grid.lo, grid.hi)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_entries(cls, p11, p12, p22, domain=(0.0, 1.0)):
        def coerce(e):
            if isinstance(e, TermSum):
                return e
            if isinstance(e, (list, tuple)):
                return TermSum.of(*e)
            return TermSum.of(e)

        return cls(entries=(coerce(p11), coerce(p12), coerce(p22)), domain=domain)

    @classmethod
    def constant(cls, mat, domain=(0.0, 1.0)):
        m = np.asarray(mat, dtype=float)
        if m.shape != (2, 2) or abs(m[0, 1] - m[1, 0]) > 1e-14 * (1 + np.max(np.abs(m))):
            raise DomainError("constant potential must be a symmetric 2x2 matrix")
        return cls.from_entries(m[0, 0], m[0, 1], m[1, 1], domain=domain)

    @classmethod
    def from_samples(cls, grid, samples):
        return cls(grid=grid, samples=samples)

    # -- evaluation --------------------------------------------------------

    @property
    def is_closed_form(self):
        return self.entries is not None

    def __call__(self, x):
        """Evaluate at x (scalar or array); returns shape x.shape + (2, 2)."""
        x = np.asarray(x, dtype=float)
        if self.is_closed_form:
            p11, p12, p22 = (e(x) for e in self.entries)
            out = np.empty(x.shape + (2, 2))
            out[..., 0, 0] = p11
            out[..., 0, 1] = p12
            out[..., 1, 0] = p12
            out[..., 1, 1] = p22
            return out
        return interpolate(self.samples, self.grid, x)

    def entry(self, i, j):
        """Scalar entry evaluator (closed-form TermSum or sampled callable)."""
        if self.is_closed_form:
            idx = {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 2}[(i, j)]
            return self.entries[idx]
        samples = self.samples[:, i, j]
        grid = self.grid

        class _Sampled:
            def __call__(self, x):
                return interpolate(samples, grid, x)

            def antiderivative(self, x):
                cum = cumulative_integral(samples, grid.h)
                return interpolate(cum, grid, x)

            def derivative(self, x):
                return interpolate(differentiate(samples, grid), grid, x)

        return _Sampled()

    def sample(self, grid):
        return self(grid.points)

    def constant_value(self):
        """The 2x2 matrix if the potential is constant, else None."""
        if self.is_closed_form:
            consts = [e.constant for e in self.entries]
            if all(c is not None for c in consts):
                return np.array([[consts[0], consts[1]], [consts[1], consts[2]]])
            return None
        vals = self.samples
        if np.max(np.abs(vals - vals[0])) <= 1e-13 * (1.0 + np.max(np.abs(vals))):
            return vals[0].copy()
        return None

    def half_integral(self, x):
        """(1/2) * integral from 0 to x, entrywise; exact for closed forms."""
        x = np.asarray(x, dtype=float)
        if self.is_closed_form:
            a11, a12, a22 = (e.antiderivative(x) for e in self.entries)
        else:
            cum = cumulative_integral(self.samples, self.grid.h, axis=0)
            vals = interpolate(cum, self.grid, x)
            a11, a12, a22 = vals[..., 0, 0], vals[..., 0, 1], vals[..., 1, 1]
        out = np.empty(x.shape + (2, 2))
        out[..., 0, 0] = a11
        out[..., 0, 1] = a12
        out[..., 1, 0] = a12
        out[..., 1, 1] = a22
        return 0.5 * out

    def eig_range(self, grid=None):
        """(min, max) of the pointwise eigenvalues over the domain."""
        if grid is None:
            grid = Grid1D.uniform(self.domain[0], self.domain[1], 401)
        P = self.sample(grid)
        tr = 0.5 * (P[:, 0, 0] + P[:, 1, 1])
        disc = np.sqrt((0.5 * (P[:, 0, 0] - P[:, 1, 1])) ** 2 + P[:, 0, 1] ** 2)
        return float(np.min(tr - disc)), float(np.max(tr + disc))

    def extended(self):
        """C^1 extension from [0, 1] to [0, 2].

        Closed forms extend by evaluating the same formulas; sampled
        potentials extend by odd reflection about (1, P(1)), which matches
        value and first derivative at the seam exactly.
        """
        if abs(self.domain[0]) > 0 or abs(self.domain[1] - 1.0) > 1e-14:
            raise DomainError("extension is defined for potentials on [0, 1]")
        if self.is_closed_form:
            return MatrixPotential(entries=self.entries, domain=(0.0, 2.0))
        n = self.grid.n
        big = Grid1D.uniform(0.0, 2.0, 2 * n - 1)
        vals = np.empty((2 * n - 1, 2, 2))
        vals[:n] = self.samples
        vals[n:] = 2.0 * self.samples[-1] - self.samples[-2::-1][: n - 1]
        return MatrixPotential.from_samples(big, vals)

    def c0_distance(self, other, npoints=801):
        """sup over x of the largest entrywise |self - other|."""
        g = Grid1D.uniform(self.domain[0], min(self.domain[1], other.domain[1]), npoints)
        return float(np.max(np.abs(self.sample(g) - other.sample(g))))


class VectorFunction:
    """Closed-form 2-component function on [0, 1] (initial values)."""

    def __init__(self, a1, a2):
        def coerce(e):
            if isinstance(e, TermSum):
                return e
            if isinstance(e, (list, tuple)):
                return TermSum.of(*e)
            return TermSum.of(e)

        self.components = (coerce(a1), coerce(a2))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (2,))
        out[..., 0] = self.components[0](x)
        out[..., 1] = self.components[1](x)
        return out

    def sample(self, grid):
        return self(grid.points)


def as_vector_samples(a, grid):
    """Coerce a VectorFunction, callable, or array to (n, 2) samples."""
    if isinstance(a, VectorFunction):
        return a.sample(grid)
    if callable(a):
        vals = np.asarray(a(grid.points), dtype=float)
        if vals.shape == (2, grid.n):
            vals = vals.T
        if vals.shape != (grid.n, 2):
            raise DomainError("initial-value callable must produce (n, 2) samples")
        return vals
    vals = np.asarray(a, dtype=float)
    if vals.shape != (grid.n, 2):
        raise DomainError(f"initial values must have shape ({grid.n}, 2)")
    return vals
