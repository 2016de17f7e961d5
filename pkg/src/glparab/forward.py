"""Forward solvers for the 2-component Neumann diffusion system.

The primary solver expands the initial value in the computed eigenbasis and
sums N decaying modes; an independent finite-difference oracle (second-order
centered space with ghost-node Neumann closure, trapezoidal / implicit
midpoint time stepping) cross-validates it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError
from .fields import Grid1D, integrate, interpolate
from .potentials import as_vector_samples
from .spectral import SpectrumTable


@dataclass(eq=False)
class ExpansionSolution:
    """Truncated eigenfunction expansion of the evolution problem."""

    table: SpectrumTable
    a_values: np.ndarray       # (n, 2) initial samples
    coefficients: np.ndarray   # (N,) modal coefficients (a, psi_n) / rho_n

    @property
    def truncation(self):
        return self.table.count


@dataclass(eq=False)
class BoundaryTrace:
    """Sampled boundary values u(0, t), u(1, t) on an increasing time grid."""

    times: np.ndarray
    left: np.ndarray    # (T, 2)
    right: np.ndarray   # (T, 2)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        self.times = t
        self.left = np.asarray(self.left, dtype=float)
        self.right = np.asarray(self.right, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise DomainError("a trace needs at least two samples")
        if t[0] <= 0.0:
            raise DomainError("trace times must be positive")
        if np.any(np.diff(t) <= 0):
            raise DomainError("trace times must increase")
        if self.left.shape != (t.size, 2) or self.right.shape != (t.size, 2):
            raise DomainError("trace values must have shape (T, 2)")
        if not (np.all(np.isfinite(self.left)) and np.all(np.isfinite(self.right))):
            raise DomainError("trace values must be finite")

    def channels(self):
        """(T, 4) stack: left components then right components."""
        return np.hstack([self.left, self.right])


def log_times(t_min, t_max, count):
    """Logarithmically spaced observation times on [t_min, t_max]."""
    if t_min <= 0 or t_max <= t_min or count < 2:
        raise DomainError("need 0 < t_min < t_max and count >= 2")
    return np.geomspace(t_min, t_max, int(count))


def expand_initial(table, a):
    """Modal coefficients c_n = (a, psi_n) / rho_n by quadrature."""
    grid = table.problem.grid
    avals = as_vector_samples(a, grid)
    coeffs = np.array(
        [integrate(np.sum(avals * p.psi, axis=1), grid) / p.rho for p in table.pairs]
    )
    return ExpansionSolution(table, avals, coeffs)


def evaluate_solution(sol, x, t):
    """Sum of the truncated expansion at (x, t); t must be positive.

    ``x`` and ``t`` may be scalars or arrays; the result has shape
    t.shape + x.shape + (2,), squeezed back to (2,) for scalar input.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0.0):
        raise DomainError("the expansion is evaluated for t > 0 only")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    grid = sol.table.problem.grid
    lams = sol.table.lambdas
    psis = np.stack([interpolate(p.psi, grid, xs) for p in sol.table.pairs])  # (N, nx, 2)
    decay = np.exp(-np.outer(ts, lams)) * sol.coefficients  # (T, N)
    out = np.einsum("tn,nxc->txc", decay, psis)
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        out = out[0]
        if np.isscalar(x) or np.asarray(x).ndim == 0:
            out = out[0]
    elif np.isscalar(x) or np.asarray(x).ndim == 0:
        out = out[:, 0]
    return out


def truncation_tail(sol, t):
    """Estimate of the dropped tail at time t.

    Mirrors the convergent-series bound: ||a|| e^{-lam_N t} sqrt(sum over the
    unseen modes of e^{-2(lam_n - lam_N) t}), with the unseen eigenvalues
    continued by the observed pair structure around (k pi)^2.
    """
    ts = np.asarray(t, dtype=float)
    if np.any(ts <= 0):
        raise DomainError("tail bound needs t > 0")
    grid = sol.table.problem.grid
    lams = sol.table.lambdas
    lamN = lams[-1]
    m = int(np.ceil(sol.table.count / 2))
    js = np.arange(1, 201)
    gaps = ((m + np.ceil(js / 2.0)) ** 2 - m**2) * np.pi**2
    S = np.sum(np.exp(-2.0 * np.outer(np.atleast_1d(ts), gaps)), axis=1)
    anorm = np.sqrt(integrate(np.sum(sol.a_values**2, axis=1), grid))
    rho_min = min(p.rho for p in sol.table.pairs)
    bound = anorm / np.sqrt(rho_min) * np.exp(-lamN * np.atleast_1d(ts)) * np.sqrt(S)
    return bound if np.asarray(t).ndim else float(bound[0])


def boundary_traces(sol, times):
    """Trace of the expansion at x = 0 and x = 1 over the given times."""
    ts = np.asarray(times, dtype=float)
    if np.any(ts <= 0.0):
        raise DomainError("trace times must be positive")
    lams = sol.table.lambdas
    decay = np.exp(-np.outer(ts, lams)) * sol.coefficients  # (T, N)
    psi0 = np.stack([p.endpoint0 for p in sol.table.pairs])  # (N, 2)
    psi1 = np.stack([p.endpoint1 for p in sol.table.pairs])
    return BoundaryTrace(ts, decay @ psi0, decay @ psi1)


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------


def _neumann_operator(potential, grid):
    """Sparse -d2/dx2 + P with second-order ghost-node Neumann closure.

    Unknowns are interleaved (u1_0, u2_0, u1_1, u2_1, ...).
    """
    n = grid.n
    h = grid.h
    P = potential.sample(grid)
    size = 2 * n
    main = np.empty(size)
    main[0::2] = 2.0 / h**2 + P[:, 0, 0]
    main[1::2] = 2.0 / h**2 + P[:, 1, 1]
    cross = np.zeros(size - 1)
    cross[0::2] = P[:, 0, 1]
    neigh = np.full(size - 2, -1.0 / h**2)
    A = sp.diags(
        [main, cross, cross, neigh, neigh],
        [0, 1, -1, 2, -2],
        format="lil",
    )
    # ghost nodes double the first/last couplings
    A[0, 2] = -2.0 / h**2
    A[1, 3] = -2.0 / h**2
    A[size - 2, size - 4] = -2.0 / h**2
    A[size - 1, size - 3] = -2.0 / h**2
    return A.tocsc()


def fd_oracle_solve(potential, a, times, nx=401, dt_max=5e-4):
    """Finite-difference boundary traces, independent of the spectral path.

    Marches from t = 0 with the trapezoidal rule at a fixed step, then
    interpolates the stored boundary history cubically at the requested
    times.
    """
    ts = np.asarray(times, dtype=float)
    if np.any(ts <= 0.0) or np.any(np.diff(ts) <= 0):
        raise DomainError("oracle times must be positive and increasing")
    grid = Grid1D.uniform(0.0, 1.0, nx)
    avals = as_vector_samples(a, grid)
    L = _neumann_operator(potential, grid)
    T = float(ts[-1])
    nsteps = max(int(np.ceil(T / dt_max)), 8)
    dt = T / nsteps
    ident = sp.identity(2 * grid.n, format="csc")
    try:
        solver = spla.splu((ident + 0.5 * dt * L).tocsc())
    except RuntimeError as exc:  # pragma: no cover - singular configuration
        raise DomainError(f"oracle linear solve failed: {exc}") from exc
    M2 = (ident - 0.5 * dt * L).tocsr()

    u = avals.reshape(-1).copy()
    hist = np.empty((nsteps + 1, 4))
    hist[0] = [u[0], u[1], u[-2], u[-1]]
    for k in range(nsteps):
        u = solver.solve(M2 @ u)
        hist[k + 1] = [u[0], u[1], u[-2], u[-1]]

    tgrid = Grid1D.uniform(0.0, T, nsteps + 1)
    vals = interpolate(hist, tgrid, ts)
    return BoundaryTrace(ts, vals[:, :2], vals[:, 2:])
