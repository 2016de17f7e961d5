"""Characteristic-coordinate Goursat solvers on the unit triangle.

In characteristic coordinates X = (x+y)/2, Y = (x-y)/2 the 4-component
hyperbolic system (d2/dx2 - d2/dy2) K = r K becomes

    d2 k / dX dY = R(X, Y) k,        R(X, Y) = r(X+Y, X-Y),

on omega = {X, Y >= 0, X + Y <= 1} (the image of the triangle with vertices
(1, 1), (1, -1), (0, 0)).  Three boundary layouts are supported:

TWO_SIDES         k(X, 0) = F(X), k(0, Y) = G(Y)
                  [values on both characteristic sides; data determine the
                  solution on the whole unit square, which is where the
                  solver works for this layout]
CAUCHY_ON_AB      k(X, 1-X) = F(X),
                  (kX + kY)(1-Y, Y)/sqrt(2) = G(Y)
                  [values and normal derivative on the hypotenuse]
SIDE_AND_NORMAL   k(X, 0) = F(X),
                  (kX + kY)(1-Y, Y)/sqrt(2) = G(Y)

Each layout has a d'Alembert part k0 and an equivalent Volterra equation
solved by successive approximation; increments decay like M^nu/(nu! nu!)
where M bounds |R| and its first divided differences.  The Cauchy-layout
d'Alembert part printed in the classical derivation is rederived here from
the domain of dependence:

    k0 = (F(X) + F(1-Y))/2 + (int_0^Y G - int_0^{1-X} G)/sqrt(2),

and its Volterra region is {xi > X, eta > Y, xi + eta < 1}; both are
validated by the boundary-reproduction and residual tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PicardDivergenceError
from .fields import Grid1D, TriangleField, cumulative_integral, differentiate, triangle_grid

SQRT2 = np.sqrt(2.0)


class GoursatConfig(enum.Enum):
    TWO_SIDES = "prop1"
    CAUCHY_ON_AB = "prop2"
    SIDE_AND_NORMAL = "prop3"


def to_characteristic(x, y):
    """(x, y) -> (X, Y); maps y=x to Y=0, y=-x to X=0, x=1 to X+Y=1."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 0.5 * (x + y), 0.5 * (x - y)


def from_characteristic(X, Y):
    """Inverse of to_characteristic."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return X + Y, X - Y


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------


class DenseRhs:
    """R sampled as a full (n+1, n+1, 4, 4) array on the lattice."""

    def __init__(self, values):
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 4 or vals.shape[2:] != (4, 4) or vals.shape[0] != vals.shape[1]:
            raise DomainError("dense rhs must have shape (n+1, n+1, 4, 4)")
        self.values = vals

    @classmethod
    def from_callable(cls, fn, n):
        s = np.linspace(0.0, 1.0, n + 1)
        X, Y = np.meshgrid(s, s, indexing="ij")
        vals = np.asarray(fn(X, Y), dtype=float)
        if vals.shape == (4, 4):
            vals = np.broadcast_to(vals, (n + 1, n + 1, 4, 4)).copy()
        elif vals.shape[:2] != (n + 1, n + 1):
            raise DomainError("rhs callable must produce (n+1, n+1, 4, 4) samples")
        return cls(vals)

    def apply(self, k):
        return np.einsum("ijab,ijb->ija", self.values, k)

    def matrix_at_indices(self, I, J):
        return self.values[I, J]

    def entry_stack(self):
        """(m, n+1, n+1) stack of the scalar entry fields, for M."""
        return self.values.reshape(self.values.shape[0], self.values.shape[1], 16).transpose(2, 0, 1)


class PotentialPairRhs:
    """Structured rhs assembled from a potential pair through an affine map.

    The 4x4 coefficient matrix has the fixed sparsity pattern

        [[ q11 - p11, -p12,      q12,       0        ],
         [ -p12,      q11 - p22, 0,         q12      ],
         [ q12,       0,         q22 - p11, -p12     ],
         [ 0,         q12,       -p12,      q22 - p22]]

    with q evaluated along the first original coordinate and p along the
    second; ``x_of`` / ``y_of`` map lattice (X, Y) to those coordinates and
    ``factor`` carries the sign and squared scale of the affine pullback.
    Storing the six scalar fields instead of a dense 4x4 array keeps large
    lattices affordable.
    """

    def __init__(self, q_potential, p_potential, x_of, y_of, factor, n, mask=None):
        s = np.linspace(0.0, 1.0, n + 1)
        X, Y = np.meshgrid(s, s, indexing="ij")
        xq = np.clip(x_of(X, Y), q_potential.domain[0], q_potential.domain[1])
        yp = np.clip(y_of(X, Y), p_potential.domain[0], p_potential.domain[1])
        Q = q_potential(xq)
        P = p_potential(yp)
        self.q11, self.q12, self.q22 = (factor * Q[..., 0, 0], factor * Q[..., 0, 1], factor * Q[..., 1, 1])
        self.p11, self.p12, self.p22 = (factor * P[..., 0, 0], factor * P[..., 0, 1], factor * P[..., 1, 1])

    def apply(self, k):
        k1, k2, k3, k4 = k[..., 0], k[..., 1], k[..., 2], k[..., 3]
        d11 = self.q11 - self.p11
        d12 = self.q11 - self.p22
        d21 = self.q22 - self.p11
        d22 = self.q22 - self.p22
        out = np.empty_like(k)
        out[..., 0] = d11 * k1 - self.p12 * k2 + self.q12 * k3
        out[..., 1] = -self.p12 * k1 + d12 * k2 + self.q12 * k4
        out[..., 2] = self.q12 * k1 + d21 * k3 - self.p12 * k4
        out[..., 3] = self.q12 * k2 - self.p12 * k3 + d22 * k4
        return out

    def matrix_at_indices(self, I, J):
        z = np.zeros_like(self.q11[I, J])
        rows = [
            [self.q11[I, J] - self.p11[I, J], -self.p12[I, J], self.q12[I, J], z],
            [-self.p12[I, J], self.q11[I, J] - self.p22[I, J], z, self.q12[I, J]],
            [self.q12[I, J], z, self.q22[I, J] - self.p11[I, J], -self.p12[I, J]],
            [z, self.q12[I, J], -self.p12[I, J], self.q22[I, J] - self.p22[I, J]],
        ]
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    def entry_stack(self):
        return np.stack(
            [
                self.q11 - self.p11,
                self.q11 - self.p22,
                self.q22 - self.p11,
                self.q22 - self.p22,
                -self.p12,
                self.q12,
            ]
        )


def _coerce_rhs(rhs, n):
    if isinstance(rhs, (DenseRhs, PotentialPairRhs)):
        return rhs
    if callable(rhs):
        return DenseRhs.from_callable(rhs, n)
    return DenseRhs(rhs)


def measure_rhs_bound(rhs, h, mask=None):
    """sup of |R| entries and their first divided differences on the lattice."""
    stack = rhs.entry_stack()
    if mask is None:
        mask = np.ones(stack.shape[1:], dtype=bool)
    vals = np.abs(stack[:, mask])
    M = float(np.max(vals)) if vals.size else 0.0
    dX = np.abs(np.diff(stack, axis=1)) / h
    okX = mask[:-1, :] & mask[1:, :]
    if np.any(okX):
        M = max(M, float(np.max(dX[:, okX])))
    dY = np.abs(np.diff(stack, axis=2)) / h
    okY = mask[:, :-1] & mask[:, 1:]
    if np.any(okY):
        M = max(M, float(np.max(dY[:, okY])))
    return M


# ---------------------------------------------------------------------------
# problem container
# ---------------------------------------------------------------------------


def _coerce_data(data, n, name):
    if data is None:
        return np.zeros((n + 1, 4))
    if callable(data):
        s = np.linspace(0.0, 1.0, n + 1)
        vals = np.asarray(data(s), dtype=float)
        if vals.shape == (4,):
            vals = np.broadcast_to(vals, (n + 1, 4)).copy()
        elif vals.shape == (4, n + 1):
            vals = vals.T
    else:
        vals = np.asarray(data, dtype=float)
        if vals.shape == (4,):
            vals = np.broadcast_to(vals, (n + 1, 4)).copy()
    if vals.shape != (n + 1, 4):
        raise DomainError(f"{name} data must have shape (n+1, 4)")
    if not np.all(np.isfinite(vals)):
        raise DomainError(f"{name} data must be finite")
    return vals


@dataclass(eq=False)
class GoursatProblem:
    """Discretised Goursat problem on the characteristic lattice."""

    config: GoursatConfig
    n: int
    rhs: object
    F: np.ndarray
    G: np.ndarray
    dF: np.ndarray
    dG: np.ndarray
    M: float
    mask: np.ndarray
    domain: str  # 'square' for TWO_SIDES, 'omega' otherwise

    @classmethod
    def build(cls, config, rhs, f, g, n, df=None, dg=None, compat_tol=1e-10):
        if n < 8:
            raise DomainError("solver resolution must be at least 8")
        config = GoursatConfig(config) if not isinstance(config, GoursatConfig) else config
        rhs = _coerce_rhs(rhs, n)
        F = _coerce_data(f, n, "F")
        G = _coerce_data(g, n, "G")
        grid = Grid1D.uniform(0.0, 1.0, n + 1)
        dF = _coerce_data(df, n, "dF") if df is not None else differentiate(F, grid)
        dG = _coerce_data(dg, n, "dG") if dg is not None else differentiate(G, grid)
        if config is GoursatConfig.TWO_SIDES:
            if np.max(np.abs(F[0] - G[0])) > compat_tol:
                raise DomainError(
                    "two-sides data are incompatible at the shared corner: "
                    f"|F - G| = {np.max(np.abs(F[0] - G[0])):.3g}"
                )
            domain = "square"
            mask = np.ones((n + 1, n + 1), dtype=bool)
        else:
            domain = "omega"
            mask = triangle_grid("omega", n).mask
        M = measure_rhs_bound(rhs, 1.0 / n, mask)
        return cls(config, n, rhs, F, G, dF, dG, M, mask, domain)

    @property
    def h(self):
        return 1.0 / self.n


# ---------------------------------------------------------------------------
# triangle-aware cumulative integrals
# ---------------------------------------------------------------------------

_SHORT3A = np.array([5.0, 8.0, -1.0]) / 12.0
_SHORT3B = np.array([-1.0, 8.0, 5.0]) / 12.0


def _cum_axis(W, h, axis, triangle):
    """Cumulative integral along an axis; exact short rules near the apex.

    With ``triangle`` set, row i along the other axis is valid up to index
    n - i; rows of valid length 2 or 3 are recomputed with local rules so
    the vectorised four-point scheme never reads out-of-domain values.
    """
    C = cumulative_integral(W, h, axis=axis)
    if not triangle:
        return C
    n = W.shape[0] - 1
    if axis == 1:
        if n >= 1:
            C[n - 1, 1] = 0.5 * h * (W[n - 1, 0] + W[n - 1, 1])
        if n >= 2:
            C[n - 2, 1] = h * (_SHORT3A @ W[n - 2, :3])
            C[n - 2, 2] = C[n - 2, 1] + h * (_SHORT3B @ W[n - 2, :3])
    else:
        if n >= 1:
            C[1, n - 1] = 0.5 * h * (W[0, n - 1] + W[1, n - 1])
        if n >= 2:
            C[1, n - 2] = h * (_SHORT3A @ W[:3, n - 2])
            C[2, n - 2] = C[1, n - 2] + h * (_SHORT3B @ W[:3, n - 2])
    return C


# ---------------------------------------------------------------------------
# d'Alembert parts
# ---------------------------------------------------------------------------


def _k0_parts(problem):
    """k0 and its X/Y derivatives as (n+1, n+1, 4) arrays."""
    n = problem.n
    h = problem.h
    F, G, dF, dG = problem.F, problem.G, problem.dF, problem.dG
    i = np.arange(n + 1)
    Fi = F[:, None, :]         # F(X)
    Gj = G[None, :, :]         # G(Y)
    Fflip_j = F[::-1][None, :, :]   # F(1-Y)
    cfg = problem.config
    if cfg is GoursatConfig.TWO_SIDES:
        k0 = Fi + Gj - F[0][None, None, :]
        dX = np.broadcast_to(dF[:, None, :], k0.shape).copy()
        dY = np.broadcast_to(dG[None, :, :], k0.shape).copy()
        return k0, dX, dY
    cumG = cumulative_integral(G, h, axis=0)
    if cfg is GoursatConfig.CAUCHY_ON_AB:
        k0 = 0.5 * (Fi + Fflip_j) + (cumG[None, :, :] - cumG[::-1][:, None, :]) / SQRT2
        dX = 0.5 * dF[:, None, :] + G[::-1][:, None, :] / SQRT2
        dY = -0.5 * dF[::-1][None, :, :] + G[None, :, :] / SQRT2
        dX = np.broadcast_to(dX, k0.shape).copy()
        dY = np.broadcast_to(dY, k0.shape).copy()
        return k0, dX, dY
    # SIDE_AND_NORMAL
    k0 = Fi + Fflip_j - F[n][None, None, :] + SQRT2 * cumG[None, :, :]
    dX = np.broadcast_to(dF[:, None, :], k0.shape).copy()
    dY = np.broadcast_to(-dF[::-1][None, :, :] + SQRT2 * G[None, :, :], k0.shape).copy()
    return k0, dX, dY


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------


def _volterra_correction(problem, W):
    """Integral of R k over the layout's domain-of-dependence region."""
    n = problem.n
    h = problem.h
    cfg = problem.config
    tri = problem.domain == "omega"
    if cfg is GoursatConfig.TWO_SIDES:
        C = _cum_axis(W, h, axis=1, triangle=tri)
        return _cum_axis(C, h, axis=0, triangle=tri)
    idx = np.arange(n + 1)
    if cfg is GoursatConfig.CAUCHY_ON_AB:
        C = _cum_axis(W, h, axis=1, triangle=True)
        hyp = C[idx, n - idx]                       # C(xi, 1-xi)
        B = hyp[:, None, :] - C                     # int_Y^{1-xi} W d(eta)
        D = _cum_axis(B, h, axis=0, triangle=True)
        return D[n - idx, idx][None, :, :] - D
    # SIDE_AND_NORMAL
    C = _cum_axis(W, h, axis=1, triangle=True)
    E = _cum_axis(C, h, axis=0, triangle=True)
    S3 = E[n - idx, idx][None, :, :] - E
    Fc = _cum_axis(W, h, axis=0, triangle=True)
    antidiag = Fc[n - idx, idx]                     # int_0^{1-eta} W d(xi) on the hypotenuse
    term1 = cumulative_integral(antidiag, h, axis=0)
    Gc = _cum_axis(Fc, h, axis=1, triangle=True)
    term2 = Gc[n - idx, idx]
    S4 = term1 - term2                              # integral over the corner triangle
    return -S3 - 2.0 * S4[None, :, :]



@dataclass(eq=False)
class GoursatSolution:
    """Converged successive-approximation solution with derivative fields."""

    problem: GoursatProblem
    k: np.ndarray
    k0: np.ndarray
    kX: np.ndarray
    kY: np.ndarray
    kXY: np.ndarray
    increments: list
    iterations: int

    @property
    def mask(self):
        return self.problem.mask

    def sup(self, arr=None):
        arr = self.k if arr is None else arr
        return float(np.max(np.abs(arr[self.mask])))

    def field(self):
        tag = "square" if self.problem.domain == "square" else "omega"
        return triangle_grid(tag, self.problem.n).with_values(self.k)

    def value_at_nodes(self, I, J):
        return self.k[I, J]


def homogeneous_part(problem):
    """The R = 0 solution of the layout's boundary conditions."""
    k0, _, _ = _k0_parts(problem)
    tag = "square" if problem.domain == "square" else "omega"
    return triangle_grid(tag, problem.n).with_values(k0)


def picard_solve(problem, stop_tol=1e-12, max_iter=60):
    """Fixed point of the layout's Volterra equation by iteration.

    Stops when the sup increment over the domain falls below ``stop_tol``;
    raises PicardDivergenceError on five consecutive non-decreasing
    increments.
    """
    k0_full, dk0X, dk0Y = _k0_parts(problem)
    mask = problem.mask
    outside = ~mask
    k0 = k0_full.copy()
    k0[outside] = 0.0
    k = k0.copy()
    increments = [float(np.max(np.abs(k0[mask])))]
    iterations = 0
    if increments[0] > 0.0:
        rising = 0
        prev_inc = increments[0]
        for it in range(1, max_iter + 1):
            W = problem.rhs.apply(k)
            W[outside] = 0.0
            S = _volterra_correction(problem, W)
            k_next = k0 + S
            k_next[outside] = 0.0
            inc = float(np.max(np.abs((k_next - k)[mask])))
            increments.append(inc)
            k = k_next
            iterations = it
            if inc <= stop_tol:
                break
            if inc >= prev_inc:
                rising += 1
                if rising >= 5:
                    raise PicardDivergenceError(
                        f"increments non-decreasing for 5 iterations (last {inc:.3g}); "
                        "check the rhs assembly or the domain"
                    )
            else:
                rising = 0
            prev_inc = inc
        else:
            raise PicardDivergenceError(
                f"no convergence to {stop_tol:.1g} within {max_iter} iterations "
                f"(last increment {increments[-1]:.3g})"
            )

    # converged derivative representations (not numerical differentiation)
    n = problem.n
    h = problem.h
    idx = np.arange(n + 1)
    W = problem.rhs.apply(k)
    W[outside] = 0.0
    tri = problem.domain == "omega"
    C = _cum_axis(W, h, axis=1, triangle=tri)
    Fc = _cum_axis(W, h, axis=0, triangle=tri)
    cfg = problem.config
    if cfg is GoursatConfig.TWO_SIDES:
        kX = dk0X + C
        kY = dk0Y + Fc
    elif cfg is GoursatConfig.CAUCHY_ON_AB:
        B = C[idx, n - idx][:, None, :] - C
        kX = dk0X - B
        kY = dk0Y - (Fc[n - idx, idx][None, :, :] - Fc)
    else:
        kX = dk0X + C
        kY = dk0Y - (Fc[n - idx, idx][None, :, :] - Fc) - C[n - idx, idx][None, :, :]
    kXY = W.copy()
    for arr in (kX, kY, kXY):
        arr[outside] = 0.0
    return GoursatSolution(problem, k, k0_full, kX, kY, kXY, increments, iterations)


def solution_and_derivatives(sol):
    """(k, dX k, dY k, dXdY k) sampled on the lattice."""
    return sol.k, sol.kX, sol.kY, sol.kXY


# ---------------------------------------------------------------------------
# certificates and checks
# ---------------------------------------------------------------------------


def picard_certificate(sol):
    """Factorial-decay certificate for the recorded increments.

    Checks increments[nu] <= 2 * M^nu / (nu! nu!) * ||k0|| for every recorded
    iterate (the 2x absorbs discretisation slack).
    """
    M = sol.problem.M
    norm_k0 = float(np.max(np.abs(sol.k0[sol.mask])))
    bounds = []
    term = norm_k0  # M^0 / (0! 0!) * ||k0||
    for nu in range(len(sol.increments)):
        bounds.append(2.0 * term)
        term *= M / ((nu + 1.0) ** 2)
    ok = all(inc <= b + 1e-300 for inc, b in zip(sol.increments, bounds))
    return {"increments": list(sol.increments), "bounds": bounds, "M": M, "ok": ok}


def _fd2_axis(arr, h, axis, mask):
    """Masked central second differences along one axis; NaN where unusable."""
    out = np.full_like(arr, np.nan)
    if axis == 0:
        ok = mask[1:-1, :] & mask[:-2, :] & mask[2:, :]
        core = (arr[2:, :] - 2.0 * arr[1:-1, :] + arr[:-2, :]) / h**2
        out[1:-1, :][ok] = core[ok]
    else:
        ok = mask[:, 1:-1] & mask[:, :-2] & mask[:, 2:]
        core = (arr[:, 2:] - 2.0 * arr[:, 1:-1] + arr[:, :-2]) / h**2
        out[:, 1:-1][ok] = core[ok]
    return out


def _sup(arr, mask):
    vals = arr[mask]
    vals = vals[np.isfinite(vals)]
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def aposteriori_estimates(sol):
    """Measured C0/C1/C2 norms of k against e^M / 2e^M times those of k0.

    The discrete C2 norm takes first derivatives from the converged integral
    representations and plain second differences for the pure second
    derivatives.
    """
    p = sol.problem
    h = p.h
    mask = sol.mask
    eM = np.exp(p.M)

    c0_k = _sup(sol.k, mask)
    c0_k0 = _sup(sol.k0, mask)
    _, k0_dX, k0_dY = _k0_parts(p)
    c1_k = max(c0_k, _sup(sol.kX, mask), _sup(sol.kY, mask))
    c1_k0 = max(c0_k0, _sup(k0_dX, mask), _sup(k0_dY, mask))

    c2_terms_k = [
        _sup(_fd2_axis(sol.k, h, 0, mask), mask),
        _sup(_fd2_axis(sol.k, h, 1, mask), mask),
        _sup(sol.kXY, mask),
    ]
    full = np.ones_like(mask)
    c2_terms_k0 = [
        _sup(_fd2_axis(sol.k0, h, 0, full), mask),
        _sup(_fd2_axis(sol.k0, h, 1, full), mask),
        0.0,  # k0 is a sum of single-variable profiles: mixed derivative vanishes
    ]
    c2_k = max(c1_k, *c2_terms_k)
    c2_k0 = max(c1_k0, *c2_terms_k0)
    return {
        "M": p.M,
        "c0": (c0_k, c0_k0, bool(c0_k <= eM * c0_k0 + 1e-12)),
        "c1": (c1_k, c1_k0, bool(c1_k <= eM * c1_k0 + 1e-12)),
        "c2": (c2_k, c2_k0, bool(c2_k <= 2.0 * eM * c2_k0 + 1e-12)),
    }


def boundary_residuals(sol):
    """Sup distance between the solved field and its prescribed data."""
    p = sol.problem
    n = p.n
    idx = np.arange(n + 1)
    out = {}
    if p.config is GoursatConfig.TWO_SIDES:
        out["F"] = float(np.max(np.abs(sol.k[:, 0] - p.F)))
        out["G"] = float(np.max(np.abs(sol.k[0, :] - p.G)))
    elif p.config is GoursatConfig.CAUCHY_ON_AB:
        out["F"] = float(np.max(np.abs(sol.k[idx, n - idx] - p.F)))
        normal = (sol.kX[n - idx, idx] + sol.kY[n - idx, idx]) / SQRT2
        out["G"] = float(np.max(np.abs(normal - p.G)))
    else:
        out["F"] = float(np.max(np.abs(sol.k[:, 0] - p.F)))
        normal = (sol.kX[n - idx, idx] + sol.kY[n - idx, idx]) / SQRT2
        out["G"] = float(np.max(np.abs(normal - p.G)))
    return out


# ---------------------------------------------------------------------------
# back transformation to (x, y)
# ---------------------------------------------------------------------------


def back_transform(sol):
    """Solution as a 4-component field on the (x, y) triangle |y| <= x <= 1.

    Output lattice spacing is 1/(n/2) so every (x, y) node maps exactly onto
    a characteristic node; requires even resolution.
    """
    n = sol.problem.n
    if n % 2:
        raise DomainError("back transformation needs an even resolution")
    m = n // 2
    skel = triangle_grid("canonical", m)
    pp, rr = np.meshgrid(np.arange(m + 1), np.arange(2 * m + 1), indexing="ij")
    I = pp + rr - m
    J = pp - rr + m
    inside = skel.mask
    vals = np.zeros((m + 1, 2 * m + 1, 4))
    vals[inside] = sol.k[I[inside], J[inside]]
    return skel.with_values(vals)


def wave_residual(sol, kv_field=None):
    """Sup residual of (d2/dx2 - d2/dy2) K_v = r K_v by central differences.

    Evaluated at interior (x, y) nodes whose four neighbours lie in the
    triangle; r comes from the problem's rhs at the matching characteristic
    nodes.
    """
    field = back_transform(sol) if kv_field is None else kv_field
    m = field.xs.size - 1
    h = 1.0 / m
    vals = field.values
    mask = field.mask
    ok = np.zeros_like(mask)
    ok[1:-1, 1:-1] = (
        mask[1:-1, 1:-1]
        & mask[2:, 1:-1]
        & mask[:-2, 1:-1]
        & mask[1:-1, 2:]
        & mask[1:-1, :-2]
    )
    dxx = np.full_like(vals, np.nan)
    dyy = np.full_like(vals, np.nan)
    dxx[1:-1, :, :] = (vals[2:, :, :] - 2 * vals[1:-1, :, :] + vals[:-2, :, :]) / h**2
    dyy[:, 1:-1, :] = (vals[:, 2:, :] - 2 * vals[:, 1:-1, :] + vals[:, :-2, :]) / h**2
    pp, rr = np.meshgrid(np.arange(m + 1), np.arange(2 * m + 1), indexing="ij")
    I = pp + rr - m
    J = pp - rr + m
    I = np.clip(I, 0, sol.problem.n)
    J = np.clip(J, 0, sol.problem.n)
    R = sol.problem.rhs.matrix_at_indices(I, J)
    resid = dxx - dyy - np.einsum("xyab,xyb->xya", R, np.nan_to_num(vals))
    return _sup(resid, ok)
