"""Uniform grids, sampled fields, quadrature, interpolation, differentiation.

All grids are uniform.  Quadrature is composite Simpson (with a 3/8 tail when
the panel count is odd), cumulative integrals use a backward cubic scheme, and
finite differences use 7-point stencils, so every operation here is fourth
order or better on smooth data.  Triangle lattices are structured grids
clipped to the handful of domains the hyperbolic solvers work on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

#: admissible tags for triangle_grid / TriangleField
TRIANGLE_TAGS = ("omega", "square", "D", "Dtilde", "omega1", "omega2", "canonical")


@dataclass(eq=False)
class Grid1D:
    """Strictly increasing uniform grid on an interval."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        self.points = pts
        if pts.ndim != 1 or pts.size < 2:
            raise DomainError("a grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise DomainError("grid points must be finite")
        steps = np.diff(pts)
        if np.any(steps <= 0.0):
            raise DomainError("grid points must be strictly increasing")
        h = (pts[-1] - pts[0]) / (pts.size - 1)
        if np.max(np.abs(steps - h)) > 1e-14 * (pts[-1] - pts[0]):
            raise DomainError("grid spacing is not uniform")

    @classmethod
    def uniform(cls, lo, hi, npoints):
        if npoints < 2:
            raise DomainError("a grid needs at least two points")
        if not hi > lo:
            raise DomainError("grid interval is empty")
        return cls(np.linspace(float(lo), float(hi), int(npoints)))

    @property
    def lo(self):
        return float(self.points[0])

    @property
    def hi(self):
        return float(self.points[-1])

    @property
    def n(self):
        """Number of points."""
        return self.points.size

    @property
    def h(self):
        return (self.hi - self.lo) / (self.n - 1)

    def contains(self, x):
        tol = 1e-12 * (self.hi - self.lo)
        return np.all(np.asarray(x) >= self.lo - tol) and np.all(np.asarray(x) <= self.hi + tol)


@dataclass(eq=False)
class VectorValuedField:
    """Two-component field sampled on a Grid1D; values has shape (n, 2)."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        self.values = vals
        if vals.shape != (self.grid.n, 2):
            raise DomainError(
                f"vector field values must have shape ({self.grid.n}, 2), got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise DomainError("vector field values must be finite")

    @classmethod
    def from_callable(cls, grid, fn):
        x = grid.points
        vals = np.asarray(fn(x), dtype=float)
        if vals.shape == (2, grid.n):
            vals = vals.T
        return cls(grid, vals)

    def __call__(self, x):
        return interpolate(self.values, self.grid, x)


# ---------------------------------------------------------------------------
# finite-difference stencils
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _fd_weights(offsets, order):
    """Weights for d^order/dx^order at offset 0 on unit-spaced nodes.

    Standard Vandermonde moment construction; divide by h**order for an
    actual grid.  The anchor weight is corrected so constants are
    annihilated exactly (order >= 1) in floating point.
    """
    pts = np.asarray(offsets, dtype=float)
    m = pts.size
    A = np.vander(pts, m, increasing=True).T
    b = np.zeros(m)
    b[order] = math.factorial(order)
    w = np.linalg.solve(A, b)
    if order >= 1:
        w[int(np.argmax(np.abs(w)))] -= w.sum()
    return w


def differentiate(values, grid, order=1):
    """Differentiate sampled data; returns an array on the same grid.

    Uses 7-point stencils (5-point if the grid is that small): centered in
    the interior, offset near the ends, giving O(h^6) truncation for first
    and second derivatives on smooth data.
    """
    if order not in (1, 2):
        raise DomainError("order must be 1 or 2")
    vals = np.asarray(values, dtype=float)
    n = grid.n
    if vals.shape[0] != n:
        raise DomainError("values do not match the grid")
    if n < 5:
        raise DomainError("differentiate needs at least 5 grid points")
    m = min(7, n)
    half = m // 2
    h = grid.h
    out = np.zeros_like(vals)

    # anchor subtraction: weights sum to zero, so differencing against the
    # output node's own value keeps constants exact and tames cancellation
    w_int = _fd_weights(tuple(range(-half, half + 1)), order)
    anchor = vals[half : n - half]
    acc = sum(w_int[k] * (vals[k : k + n - 2 * half] - anchor) for k in range(m))
    out[half : n - half] = acc / h**order

    for i in range(half):
        w = _fd_weights(tuple(range(-i, m - i)), order)
        out[i] = np.tensordot(w, vals[0:m] - vals[i], axes=(0, 0)) / h**order
        w = _fd_weights(tuple(range(-(m - 1 - i), i + 1)), order)
        out[n - 1 - i] = np.tensordot(w, vals[n - m : n] - vals[n - 1 - i], axes=(0, 0)) / h**order
    return out


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _composite_weights(m):
    """Composite Simpson weights (unit spacing) for m nodes.

    Even panel counts use plain Simpson; odd panel counts splice a 3/8 rule
    onto the last three panels, keeping the rule O(h^4) throughout.
    """
    if m < 2:
        raise DomainError("need at least two nodes to integrate")
    w = np.zeros(m)
    if m == 2:
        w[:] = 0.5
        return w
    panels = m - 1
    if panels % 2 == 0:
        w[0] = w[-1] = 1.0 / 3.0
        w[1:-1:2] = 4.0 / 3.0
        w[2:-1:2] = 2.0 / 3.0
        return w
    if m == 4:
        w[:] = np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
        return w
    w[: m - 3] += _composite_weights(m - 3)
    w[m - 4 :] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return w


def _partial_panel(values, grid, lo, hi):
    """Integral of the local cubic interpolant over [lo, hi] within one panel."""
    if hi <= lo:
        return np.zeros(values.shape[1:]) if values.ndim > 1 else 0.0
    pts = grid.points
    n = grid.n
    i = int(np.clip(np.searchsorted(pts, lo, side="right") - 1, 0, n - 2))
    base = int(np.clip(i - 1, 0, n - 4)) if n >= 4 else 0
    count = min(4, n)
    xs = pts[base : base + count]
    # moment-matching weights: sum_k w_k xs_k^j = int_lo^hi x^j dx
    scale = grid.h
    xs_s = (xs - lo) / scale
    hi_s = (hi - lo) / scale
    A = np.vander(xs_s, count, increasing=True).T
    b = np.array([hi_s ** (j + 1) / (j + 1) for j in range(count)])
    w = np.linalg.solve(A, b) * scale
    return np.tensordot(w, values[base : base + count], axes=(0, 0))


def integrate(values, grid, a=None, b=None):
    """Integrate sampled data over [a, b] (default: the whole grid span).

    Composite Simpson over the node-aligned part, cubic-interpolant
    integrals for fractional end panels; O(h^4) on smooth data.
    """
    vals = np.asarray(values, dtype=float)
    if vals.shape[0] != grid.n:
        raise DomainError("values do not match the grid")
    if not np.all(np.isfinite(vals)):
        raise DomainError("cannot integrate non-finite samples")
    lo = grid.lo if a is None else float(a)
    hi = grid.hi if b is None else float(b)
    tol = 1e-12 * (grid.hi - grid.lo)
    if lo < grid.lo - tol or hi > grid.hi + tol:
        raise DomainError(f"[{lo}, {hi}] is outside the grid span [{grid.lo}, {grid.hi}]")
    if hi < lo:
        raise DomainError("integration interval is reversed")
    pts = grid.points
    i0 = int(np.searchsorted(pts, lo - tol, side="left"))
    i1 = int(np.searchsorted(pts, hi + tol, side="right")) - 1
    i0 = min(max(i0, 0), grid.n - 1)
    i1 = min(max(i1, 0), grid.n - 1)
    total = np.zeros(vals.shape[1:])
    if i1 > i0:
        w = _composite_weights(i1 - i0 + 1) * grid.h
        total = total + np.tensordot(w, vals[i0 : i1 + 1], axes=(0, 0))
    if i0 <= i1:
        total = total + _partial_panel(vals, grid, lo, min(pts[i0], hi))
        total = total + _partial_panel(vals, grid, max(pts[i1], lo), hi)
    else:
        total = total + _partial_panel(vals, grid, lo, hi)
    return total if total.shape else float(total)


def integrate_samples(values, h):
    """Composite Simpson over an array of equispaced samples along axis 0."""
    vals = np.asarray(values, dtype=float)
    w = _composite_weights(vals.shape[0]) * h
    return np.tensordot(w, vals, axes=(0, 0))


def cumulative_integral(values, h, axis=0):
    """Cumulative integral along an axis of equispaced samples, O(h^4).

    Interval increments come from cubic interpolation through four
    neighbouring nodes (backward stencils after the first two intervals, so
    entry k never depends on samples beyond index max(k, 3)).
    """
    vals = np.asarray(values, dtype=float)
    vals = np.moveaxis(vals, axis, 0)
    n = vals.shape[0]
    out = np.zeros_like(vals)
    if n == 1:
        return np.moveaxis(out, 0, axis)
    if n == 2:
        out[1] = 0.5 * h * (vals[0] + vals[1])
        return np.moveaxis(out, 0, axis)
    if n == 3:
        out[1] = h / 12.0 * (5.0 * vals[0] + 8.0 * vals[1] - vals[2])
        out[2] = out[1] + h / 12.0 * (-vals[0] + 8.0 * vals[1] + 5.0 * vals[2])
        return np.moveaxis(out, 0, axis)
    inc = np.empty_like(vals[1:])
    inc[0] = h / 24.0 * (9.0 * vals[0] + 19.0 * vals[1] - 5.0 * vals[2] + vals[3])
    inc[1] = h / 24.0 * (-vals[0] + 13.0 * vals[1] + 13.0 * vals[2] - vals[3])
    inc[2:] = h / 24.0 * (vals[:-3] - 5.0 * vals[1:-2] + 19.0 * vals[2:-1] + 9.0 * vals[3:])
    np.cumsum(inc, axis=0, out=inc)
    out[1:] = inc
    return np.moveaxis(out, 0, axis)


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------


def interpolate(values, grid, x):
    """Local cubic interpolation; exact at the nodes and on cubics.

    ``x`` may be a scalar or an array; trailing value dimensions are
    preserved.
    """
    vals = np.asarray(values, dtype=float)
    if vals.shape[0] != grid.n:
        raise DomainError("values do not match the grid")
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    if not grid.contains(xs):
        raise DomainError("interpolation point outside the grid span")
    h = grid.h
    n = grid.n
    pos = (xs - grid.lo) / h
    idx = np.clip(np.floor(pos).astype(int), 0, n - 2)
    base = np.clip(idx - 1, 0, max(n - 4, 0))
    count = min(4, n)
    s = pos - base
    # Lagrange weights on offsets 0..count-1 evaluated at s
    offs = np.arange(count)
    w = np.ones((xs.size, count))
    for k in range(count):
        for j in range(count):
            if j != k:
                w[:, k] *= (s - offs[j]) / (offs[k] - offs[j])
    # snap to exact node values where s is (numerically) an integer offset
    snap = np.abs(s - np.round(s)) < 1e-12
    rows = np.where(snap)[0]
    gathered = vals[(base[:, None] + offs[None, :]).ravel()].reshape((xs.size, count) + vals.shape[1:])
    out = np.einsum("pk,pk...->p...", w, gathered)
    if rows.size:
        node = base[rows] + np.round(s[rows]).astype(int)
        out[rows] = vals[np.clip(node, 0, n - 1)]
    if scalar:
        return out[0] if out.ndim > 1 else float(out[0])
    return out


# ---------------------------------------------------------------------------
# triangle lattices
# ---------------------------------------------------------------------------

_EPS = 1e-12


def _domain_axes(tag, n):
    if tag in ("omega", "square", "D"):
        return np.linspace(0.0, 1.0, n + 1), np.linspace(0.0, 1.0, n + 1)
    if tag == "Dtilde":
        return np.linspace(0.0, 2.0, 2 * n + 1), np.linspace(0.0, 1.0, n + 1)
    if tag == "omega1":
        if n % 2:
            raise DomainError("omega1 lattice needs an even resolution")
        return np.linspace(0.0, 1.0, n + 1), np.linspace(0.0, 0.5, n // 2 + 1)
    if tag == "omega2":
        if n % 2:
            raise DomainError("omega2 lattice needs an even resolution")
        return np.linspace(0.5, 1.0, n // 2 + 1), np.linspace(0.0, 1.0, n + 1)
    if tag == "canonical":
        return np.linspace(0.0, 1.0, n + 1), np.linspace(-1.0, 1.0, 2 * n + 1)
    raise DomainError(f"unknown triangle tag {tag!r}")


def _domain_mask(tag, X, Y):
    if tag == "omega":
        return X + Y <= 1.0 + _EPS
    if tag == "square":
        return np.ones_like(X, dtype=bool)
    if tag == "D":
        return Y <= X + _EPS
    if tag == "Dtilde":
        return (Y <= X + _EPS) & (X <= 2.0 - Y + _EPS)
    if tag == "omega1":
        return (Y <= X + _EPS) & (X <= 1.0 - Y + _EPS)
    if tag == "omega2":
        return (Y >= 1.0 - X - _EPS) & (Y <= X + _EPS)
    if tag == "canonical":
        return np.abs(Y) <= X + _EPS
    raise DomainError(f"unknown triangle tag {tag!r}")


@dataclass(eq=False)
class TriangleField:
    """Structured lattice clipped to a triangle, with optional payload.

    ``values`` is indexed [i, j, ...] with i along ``xs`` and j along ``ys``;
    entries outside ``mask`` are NaN and must not be read.
    """

    tag: str
    xs: np.ndarray
    ys: np.ndarray
    mask: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.tag not in TRIANGLE_TAGS:
            raise DomainError(f"unknown triangle tag {self.tag!r}")
        if self.mask.shape != (self.xs.size, self.ys.size):
            raise DomainError("mask shape does not match the axes")
        if self.values is not None:
            vals = np.asarray(self.values, dtype=float)
            if vals.shape[: 2] != self.mask.shape:
                raise DomainError("values shape does not match the lattice")
            if not np.all(np.isfinite(vals[self.mask])):
                raise DomainError("in-domain values must be finite")
            self.values = vals

    @property
    def node_count(self):
        return int(np.count_nonzero(self.mask))

    def nodes(self):
        """(count, 2) array of the in-domain lattice coordinates."""
        ii, jj = np.nonzero(self.mask)
        return np.column_stack([self.xs[ii], self.ys[jj]])

    def with_values(self, values):
        vals = np.asarray(values, dtype=float).copy()
        vals[~self.mask] = np.nan
        return TriangleField(self.tag, self.xs, self.ys, self.mask, vals)

    def sup(self):
        """Max absolute in-domain payload entry."""
        if self.values is None:
            raise DomainError("field has no values")
        return float(np.max(np.abs(self.values[self.mask])))


def triangle_grid(tag, n):
    """Skeleton TriangleField for a domain tag at resolution n.

    ``n`` counts subdivisions per unit length; nodes are the lattice points
    inside the closed domain.
    """
    if n < 2:
        raise DomainError("triangle resolution must be at least 2")
    xs, ys = _domain_axes(tag, int(n))
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return TriangleField(tag, xs, ys, _domain_mask(tag, X, Y))
