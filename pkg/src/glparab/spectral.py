"""Neumann spectra of the vector Sturm-Liouville operator -d2/dx2 + P(x).

The characteristic function is det Psi'(1; lambda) where Psi is the matrix
solution of -Y'' + P Y = lambda Y with Y(0) = I, Y'(0) = 0, marched by a
classical fixed-step fourth-order one-step scheme (vectorised over lambda).
Eigenvalues are located by sign-change bracketing on a sqrt(lambda)-uniform
scan followed by bisection; tangential (double) roots are detected separately
and reported as simplicity violations rather than silently skipped.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DomainError,
    ScanRangeError,
    SimplicityViolation,
    StepSizeError,
)
from .fields import Grid1D, integrate
from .potentials import MatrixPotential, as_vector_samples

_I2 = np.eye(2)


@dataclass(eq=False)
class SpectralProblem:
    """Neumann problem for -d2/dx2 + P(x) on [0, 1].

    ``substeps`` subdivides each grid interval for the integrator; the
    default ties the integrator step to the grid spacing.
    """

    potential: MatrixPotential
    grid: Grid1D = None
    substeps: int = 1

    def __post_init__(self):
        if self.grid is None:
            self.grid = Grid1D.uniform(0.0, 1.0, 401)
        if abs(self.grid.lo) > 1e-14 or abs(self.grid.hi - 1.0) > 1e-14:
            raise DomainError("spectral problems live on [0, 1]")
        if self.substeps < 1:
            raise DomainError("substeps must be >= 1")

    @cached_property
    def _pvals(self):
        """P at half-substep resolution: index 2k is step k's left node."""
        nsteps = (self.grid.n - 1) * self.substeps
        xs = np.linspace(self.grid.lo, self.grid.hi, 2 * nsteps + 1)
        return self.potential(xs)

    @cached_property
    def _prange(self):
        return self.potential.eig_range(self.grid)


@dataclass(eq=False)
class FundamentalSolution:
    """Matrix solution Psi(.; lambda) with Psi(0)=I, Psi'(0)=0, on the grid."""

    lam: float
    Psi: np.ndarray
    dPsi: np.ndarray


@dataclass(eq=False)
class EigenPair:
    index: int
    lam: float
    psi: np.ndarray         # (n, 2) eigenfunction samples
    dpsi: np.ndarray        # (n, 2) derivative samples
    rho: float              # squared L2 norm
    endpoint0: np.ndarray   # psi(0), unit Euclidean norm
    endpoint1: np.ndarray   # psi(1)
    neumann_residual: float


@dataclass(eq=False)
class SpectrumTable:
    problem: SpectralProblem
    pairs: list

    @property
    def count(self):
        return len(self.pairs)

    @property
    def lambdas(self):
        return np.array([p.lam for p in self.pairs])

    def psi_matrix(self):
        """(N, n, 2) stack of eigenfunction samples."""
        return np.stack([p.psi for p in self.pairs])


def _check_step(problem, lams):
    hsub = problem.grid.h / problem.substeps
    pmin, pmax = problem._prange
    omega = np.sqrt(max(np.max(np.abs(lams)) + max(abs(pmin), abs(pmax)), 1.0))
    if omega * hsub > 1.0:
        raise StepSizeError(
            f"integrator step {hsub:.3g} too large for |lambda| up to "
            f"{np.max(np.abs(lams)):.3g}",
            suggested_step=0.5 / omega,
        )


def _march(problem, lams, store=False):
    """Vectorised fixed-step RK4 for the matrix initial-value problem.

    Returns (Psi1, dPsi1) of shape (L, 2, 2); with ``store`` also the full
    node history (L, n, 2, 2) for Psi and Psi'.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    _check_step(problem, lams)
    L = lams.size
    grid = problem.grid
    sub = problem.substeps
    nsteps = (grid.n - 1) * sub
    h = grid.h / sub
    P = problem._pvals
    lam = lams[:, None, None]

    Y = np.broadcast_to(_I2, (L, 2, 2)).copy()
    Z = np.zeros((L, 2, 2))
    if store:
        Ynodes = np.empty((L, grid.n, 2, 2))
        Znodes = np.empty((L, grid.n, 2, 2))
        Ynodes[:, 0] = Y
        Znodes[:, 0] = Z

    def apply_A(Pk, V):
        return np.matmul(Pk, V) - lam * V

    for k in range(nsteps):
        P0, Pm, P1 = P[2 * k], P[2 * k + 1], P[2 * k + 2]
        k1y = Z
        k1z = apply_A(P0, Y)
        k2y = Z + 0.5 * h * k1z
        k2z = apply_A(Pm, Y + 0.5 * h * k1y)
        k3y = Z + 0.5 * h * k2z
        k3z = apply_A(Pm, Y + 0.5 * h * k2y)
        k4y = Z + h * k3z
        k4z = apply_A(P1, Y + h * k3y)
        Y = Y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        Z = Z + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        if store and (k + 1) % sub == 0:
            node = (k + 1) // sub
            Ynodes[:, node] = Y
            Znodes[:, node] = Z

    if store:
        return Y, Z, Ynodes, Znodes
    return Y, Z


def fundamental_matrix(problem, lam):
    """Matrix solution of the initial-value problem at a single lambda."""
    _, _, Yn, Zn = _march(problem, [float(lam)], store=True)
    return FundamentalSolution(float(lam), Yn[0], Zn[0])


def characteristic_value(problem, lam):
    """det Psi'(1; lambda); zero exactly at Neumann eigenvalues."""
    return float(characteristic_values(problem, [float(lam)])[0])


def characteristic_values(problem, lams):
    """Vectorised characteristic function over an array of lambdas."""
    _, Z = _march(problem, lams)
    return np.linalg.det(Z)


def _bisect(problem, los, his, rtol):
    """Batched bisection on brackets with a characteristic sign change."""
    los = np.asarray(los, dtype=float).copy()
    his = np.asarray(his, dtype=float).copy()
    flo = characteristic_values(problem, los)
    for _ in range(200):
        mids = 0.5 * (los + his)
        if np.all(his - los <= rtol * (1.0 + np.abs(mids))):
            break
        fm = characteristic_values(problem, mids)
        take_left = flo * fm <= 0.0
        his = np.where(take_left, mids, his)
        los = np.where(take_left, los, mids)
        flo = np.where(take_left, flo, fm)
    return 0.5 * (los + his)


def _refine_abs_minimum(problem, a, b, iters=80):
    """Golden-section minimisation of |det Psi'(1;.)| on [a, b]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = abs(characteristic_value(problem, c))
    fd = abs(characteristic_value(problem, d))
    for _ in range(iters):
        if b - a < 1e-13 * (1.0 + abs(a)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = abs(characteristic_value(problem, c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = abs(characteristic_value(problem, d))
    x = 0.5 * (a + b)
    return x, abs(characteristic_value(problem, x))


def _eigenpair(problem, index, lam, sign_tol=1e-8):
    _, _, Yn, Zn = _march(problem, [lam], store=True)
    B = Zn[0, -1]
    _, svals, Vh = np.linalg.svd(B)
    xi = Vh[-1]
    if abs(xi[0]) > sign_tol:
        xi = xi * np.sign(xi[0])
    else:
        xi = xi * np.sign(xi[1])
    psi = Yn[0] @ xi
    dpsi = Zn[0] @ xi
    rho = float(integrate(np.sum(psi**2, axis=1), problem.grid))
    return EigenPair(
        index=index,
        lam=float(lam),
        psi=psi,
        dpsi=dpsi,
        rho=rho,
        endpoint0=psi[0].copy(),
        endpoint1=psi[-1].copy(),
        neumann_residual=float(svals[-1]),
    )


def find_spectrum(
    problem,
    count,
    *,
    scan_density=40.0,
    bisect_rtol=1e-10,
    simplicity_rtol=1e-6,
    margin=2.0,
):
    """First ``count`` Neumann eigenvalues with eigenfunctions.

    The scan window is [min spec P - margin, (count*pi)^2 + max spec P +
    margin] sampled uniformly in sqrt(lambda - lower); the single-index
    asymptotic sqrt(lambda_n) ~ n*pi is used only to size this window.
    Raises SimplicityViolation when a double root or a sub-tolerance gap is
    detected, ScanRangeError when fewer than ``count`` roots are found.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    pmin, pmax = problem._prange
    lam_lo = pmin - margin
    lam_hi = (count * np.pi) ** 2 + pmax + margin
    span = np.sqrt(lam_hi - lam_lo)
    ns = int(np.ceil(scan_density * span)) + 2
    s = np.linspace(0.0, span, ns)
    lams = lam_lo + s**2
    d = characteristic_values(problem, lams)

    sign_change = d[:-1] * d[1:] < 0.0
    exact_zero = d == 0.0
    brackets = [(lams[i], lams[i + 1]) for i in np.nonzero(sign_change)[0]]
    roots = [float(lams[i]) for i in np.nonzero(exact_zero)[0]]

    if brackets:
        los, his = zip(*brackets)
        roots.extend(float(r) for r in _bisect(problem, los, his, bisect_rtol))
    roots = sorted(roots)

    # tangential double roots: interior |d| minima with no sign change
    clusters = []
    absd = np.abs(d)
    for i in range(1, ns - 1):
        if sign_change[i - 1] or sign_change[i]:
            continue
        if not (absd[i] < absd[i - 1] and absd[i] < absd[i + 1]):
            continue
        window = absd[max(0, i - 10) : min(ns, i + 11)]
        scale = max(float(np.max(window)), 1e-300)
        if absd[i] > 1e-2 * scale:
            continue
        lam_min, d_min = _refine_abs_minimum(problem, lams[i - 1], lams[i + 1])
        if d_min <= 1e-8 * scale:
            clusters.append((float(lam_min), float(lam_min)))

    for a, b in zip(roots[:-1], roots[1:]):
        if b - a < simplicity_rtol * (1.0 + abs(b)):
            clusters.append((a, b))

    cutoff = roots[count - 1] + 1.0 if len(roots) >= count else lam_hi
    relevant = [c for c in clusters if c[0] <= cutoff]
    if relevant:
        desc = ", ".join(f"({a:.9g}, {b:.9g})" for a, b in relevant)
        raise SimplicityViolation(
            f"eigenvalue clusters below the simplicity tolerance: {desc}",
            clusters=relevant,
        )
    if len(roots) < count:
        raise ScanRangeError(
            f"found {len(roots)} eigenvalues in [{lam_lo:.6g}, {lam_hi:.6g}], "
            f"needed {count}; widen the scan or refine the grid"
        )

    pairs = [_eigenpair(problem, i + 1, lam) for i, lam in enumerate(roots[:count])]
    return SpectrumTable(problem, pairs)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SimplicityReport:
    min_gap: float | None
    clusters: list
    simple: bool
    constant_criterion: dict | None
    sqrt_over_pi: np.ndarray | None


def _constant_criterion(const, lam_max, rtol):
    """Exact disjoint-spectra test for a constant potential.

    Diagonalising a constant symmetric P gives two scalar Neumann problems
    with spectra alpha + (k*pi)^2 and beta + (k*pi)^2; the full spectrum is
    simple exactly when those sets are disjoint.
    """
    alpha, beta = np.linalg.eigvalsh(const)
    kmax = int(np.ceil(np.sqrt(max(lam_max, 0.0)) / np.pi)) + 1
    ks = np.arange(kmax + 1)
    sp_a = alpha + (ks * np.pi) ** 2
    sp_b = beta + (ks * np.pi) ** 2
    collisions = []
    for la in sp_a:
        for lb in sp_b:
            if abs(la - lb) < rtol * (1.0 + abs(la)):
                collisions.append((float(la), float(lb)))
    return {
        "scalar_eigs": (float(alpha), float(beta)),
        "collisions": collisions,
        "disjoint": not collisions,
    }


def check_simplicity(table_or_problem, rtol=1e-6, lam_max=None):
    """Report minimal gaps and clusters; exact criterion for constant P.

    Accepts a SpectrumTable, or a SpectralProblem / MatrixPotential with a
    constant potential (for which the disjointness test needs no spectrum).
    """
    table = None
    if isinstance(table_or_problem, SpectrumTable):
        table = table_or_problem
        problem = table.problem
    elif isinstance(table_or_problem, SpectralProblem):
        problem = table_or_problem
    elif isinstance(table_or_problem, MatrixPotential):
        problem = SpectralProblem(table_or_problem)
    else:
        raise DomainError("expected a SpectrumTable, SpectralProblem or MatrixPotential")

    const = problem.potential.constant_value()
    if table is None and const is None:
        raise DomainError("a SpectrumTable is required for non-constant potentials")

    min_gap = None
    clusters = []
    sqrt_over_pi = None
    if table is not None:
        lams = table.lambdas
        if lams.size >= 2:
            gaps = np.diff(lams)
            min_gap = float(np.min(gaps))
            for a, b in zip(lams[:-1], lams[1:]):
                if b - a < rtol * (1.0 + abs(b)):
                    clusters.append((float(a), float(b)))
        sqrt_over_pi = np.sqrt(np.maximum(lams, 0.0)) / np.pi
        if lam_max is None:
            lam_max = float(lams[-1])

    criterion = None
    if const is not None:
        criterion = _constant_criterion(const, lam_max if lam_max is not None else 500.0, rtol)
        clusters.extend(c for c in criterion["collisions"] if c not in clusters)

    return SimplicityReport(
        min_gap=min_gap,
        clusters=clusters,
        simple=not clusters,
        constant_criterion=criterion,
        sqrt_over_pi=sqrt_over_pi,
    )


@dataclass(eq=False)
class GeneratingElementReport:
    products: np.ndarray
    normalized: np.ndarray
    tol: float
    verdict: bool
    first_vanishing: int | None


def generating_element_check(table, a, tol=1e-6):
    """Inner products (a, psi_n) for every table mode, with a verdict.

    ``normalized`` divides by ||a|| * sqrt(rho_n); the verdict requires every
    normalised product to exceed ``tol``.
    """
    grid = table.problem.grid
    avals = as_vector_samples(a, grid)
    anorm = float(np.sqrt(integrate(np.sum(avals**2, axis=1), grid)))
    products = np.array(
        [integrate(np.sum(avals * p.psi, axis=1), grid) for p in table.pairs]
    )
    denom = np.array([max(anorm * np.sqrt(p.rho), 1e-300) for p in table.pairs])
    normalized = np.abs(products) / denom
    small = np.nonzero(normalized <= tol)[0]
    first = int(small[0]) + 1 if small.size else None
    return GeneratingElementReport(
        products=products,
        normalized=normalized,
        tol=tol,
        verdict=first is None,
        first_vanishing=first,
    )
