"""Transformation kernel between two Neumann potentials, and its uses.

The kernel K(x, y) on the triangle D = {0 <= y <= x <= 1} satisfies

    K_xx - K_yy + K P(y) = Q(x) K,
    K(x, x)  = (1/2) int_0^x (Q - P) ds,
    K_y(x, 0) = 0,

and turns any solution psi of -psi'' + P psi = lam psi with psi'(0) = 0 into
a solution Phi = psi + int_0^x K(x, y) psi(y) dy of the Q-equation at the
same lam.  K is built by vectorising the matrix system (row-major components
K11, K12, K21, K22, matching the displayed 4x4 coefficient matrix), extending
Q to [0, 2], and solving a side-plus-normal Goursat problem on the extended
triangle in characteristic coordinates; the construction is independent of
the extension on D itself.

Lattice bookkeeping: with D-resolution m the characteristic solve runs at
2m so every D node (p/m, q/m) maps exactly onto the characteristic node
(i, j) = (2m - p - q, p - q); no interpolation is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError
from .fields import Grid1D, _composite_weights, differentiate, triangle_grid
from .goursat import (
    GoursatConfig,
    GoursatProblem,
    PotentialPairRhs,
    picard_solve,
)
from .potentials import MatrixPotential
from .spectral import SpectralProblem, _march


def assemble_r(P, Q):
    """Callable (x, y) -> 4x4 coupling matrix of the vectorised system.

    Entry layout (row-major vectorisation of 2x2 K):

        [[ q11(x)-p11(y), -p12(y),       q12(x),        0            ],
         [ -p12(y),       q11(x)-p22(y), 0,             q12(x)       ],
         [ q12(x),        0,             q22(x)-p11(y), -p12(y)      ],
         [ 0,             q12(x),        -p12(y),       q22(x)-p22(y)]]
    """
    for pot in (P, Q):
        if not isinstance(pot, MatrixPotential):
            raise DomainError("assemble_r expects MatrixPotential arguments")

    def r(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        Qv = Q(x)
        Pv = P(y)
        q11, q12, q22 = Qv[..., 0, 0], Qv[..., 0, 1], Qv[..., 1, 1]
        p11, p12, p22 = Pv[..., 0, 0], Pv[..., 0, 1], Pv[..., 1, 1]
        z = np.zeros_like(q11)
        rows = [
            [q11 - p11, -p12, q12, z],
            [-p12, q11 - p22, z, q12],
            [q12, z, q22 - p11, -p12],
            [z, q12, -p12, q22 - p22],
        ]
        return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)

    return r


def extend_potential(Q):
    """C^1 extension of a potential from [0, 1] to [0, 2]."""
    return Q.extended()


def _half_trace_vec(P, Q, xs):
    """Row-major vectorisation of (1/2) int_0^x (Q - P) ds at xs."""
    H = Q.half_integral(xs) - P.half_integral(xs)
    return H.reshape(H.shape[:-2] + (4,))


def _half_trace_vec_derivative(P, Q, xs):
    H = 0.5 * (Q(xs) - P(xs))
    return H.reshape(H.shape[:-2] + (4,))


@dataclass(eq=False)
class KernelField:
    """Kernel and its first derivatives on the D lattice, plus checks."""

    P: MatrixPotential
    Q: MatrixPotential
    m: int
    grid: Grid1D
    K: np.ndarray    # (m+1, m+1, 2, 2), first index x, second y
    Kx: np.ndarray
    Ky: np.ndarray
    mask: np.ndarray
    char_solution: object
    checks: dict

    def K_at_diag(self):
        idx = np.arange(self.m + 1)
        return self.K[idx, idx]

    def K_on_right_edge(self):
        """K(1, y) sampled over the y lattice."""
        return self.K[self.m, :]

    def Kx_on_right_edge(self):
        return self.Kx[self.m, :]

    def sup(self):
        return float(np.max(np.abs(self.K[self.mask])))

    def field(self):
        return triangle_grid("D", self.m).with_values(self.K.reshape(self.m + 1, self.m + 1, 4))


def _kernel_checks(P, Q, K, Kx, Ky, mask, grid):
    m = grid.n - 1
    idx = np.arange(m + 1)
    xs = grid.points
    trace_exact = Q.half_integral(xs) - P.half_integral(xs)
    trace_res = float(np.max(np.abs(K[idx, idx] - trace_exact)))
    normal_res = float(np.max(np.abs(Ky[:, 0][mask[:, 0]])))
    sym_defect = float(np.max(np.abs((K - np.swapaxes(K, -1, -2))[mask])))

    # interior residual of the matrix hyperbolic system by second differences
    h = grid.h
    ok = np.zeros_like(mask)
    ok[1:-1, 1:-1] = (
        mask[1:-1, 1:-1] & mask[2:, 1:-1] & mask[:-2, 1:-1] & mask[1:-1, 2:] & mask[1:-1, :-2]
    )
    Kxx = np.zeros_like(K)
    Kyy = np.zeros_like(K)
    Kxx[1:-1] = (K[2:] - 2 * K[1:-1] + K[:-2]) / h**2
    Kyy[:, 1:-1] = (K[:, 2:] - 2 * K[:, 1:-1] + K[:, :-2]) / h**2
    Qx = Q(xs)
    Py = P(xs)
    QK = np.einsum("iab,ijbc->ijac", Qx, K)
    KP = np.einsum("ijab,jbc->ijac", K, Py)
    resid = Kxx - Kyy - QK + KP
    pde_res = float(np.max(np.abs(resid[ok]))) if np.any(ok) else 0.0
    return {
        "trace_residual": trace_res,
        "normal_residual": normal_res,
        "pde_residual": pde_res,
        "symmetry_defect": sym_defect,
    }


def build_kernel(P, Q, resolution=400, stop_tol=1e-12):
    """Construct the transformation kernel for the pair (P, Q).

    ``resolution`` is the D-lattice subdivision count (must be even); the
    characteristic solve runs at twice that.  The returned field carries
    trace / normal / interior residuals and the successive-approximation
    report of the underlying Goursat solve.
    """
    m = int(resolution)
    if m % 2 or m < 8:
        raise DomainError("kernel resolution must be even and at least 8")
    for pot in (P, Q):
        if abs(pot.domain[0]) > 0 or abs(pot.domain[1] - 1.0) > 1e-14:
            raise DomainError("kernel construction expects potentials on [0, 1]")
    n = 2 * m
    Qext = Q.extended()
    # characteristic frame of the extended triangle: X = 1-(x+y)/2, Y = (x-y)/2,
    # i.e. x = 1-X+Y, y = 1-X-Y; the axis swap flips the sign of the coupling
    rhs = PotentialPairRhs(
        Qext,
        P,
        x_of=lambda X, Y: 1.0 - X + Y,
        y_of=lambda X, Y: 1.0 - X - Y,
        factor=-1.0,
        n=n,
    )
    s = np.linspace(0.0, 1.0, n + 1)
    F = _half_trace_vec(P, Q, 1.0 - s)
    dF = -_half_trace_vec_derivative(P, Q, 1.0 - s)
    problem = GoursatProblem.build(
        GoursatConfig.SIDE_AND_NORMAL,
        rhs,
        F,
        np.zeros((n + 1, 4)),
        n,
        df=dF,
        dg=np.zeros((n + 1, 4)),
    )
    sol = picard_solve(problem, stop_tol=stop_tol)

    # pull back to the D lattice: node (p, q) -> characteristic (2m-p-q, p-q)
    pp, qq = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    mask = qq <= pp
    I = np.where(mask, n - pp - qq, 0)
    J = np.where(mask, pp - qq, 0)
    kvals = sol.k[I, J]
    kX = sol.kX[I, J]
    kY = sol.kY[I, J]
    K = kvals.reshape(m + 1, m + 1, 2, 2)
    Kx = (-0.5 * kX + 0.5 * kY).reshape(m + 1, m + 1, 2, 2)
    Ky = (-0.5 * kX - 0.5 * kY).reshape(m + 1, m + 1, 2, 2)
    for arr in (K, Kx, Ky):
        arr[~mask] = 0.0

    grid = Grid1D.uniform(0.0, 1.0, m + 1)
    checks = _kernel_checks(P, Q, K, Kx, Ky, mask, grid)
    checks["picard_iterations"] = sol.iterations
    checks["picard_increments"] = list(sol.increments)
    checks["rhs_bound"] = problem.M
    return KernelField(P, Q, m, grid, K, Kx, Ky, mask, sol, checks)


# ---------------------------------------------------------------------------
# transformation operator
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TransformedSolution:
    lam: float
    xi: np.ndarray
    phi: np.ndarray    # (m+1, 2)
    dphi: np.ndarray
    residual: float    # sup |-phi'' + Q phi - lam phi| over interior nodes


def _row_quadrature_weights(m, h):
    """Weights w[p] (length p+1) for integrating over [0, p*h] per row."""
    return [None] + [_composite_weights(p + 1) * h for p in range(1, m + 1)]


def transform_solution(kernel, psi, dpsi, lam, residual_tol=1e-5, check_input=True):
    """Apply Phi = psi + int_0^x K(x, y) psi(y) dy on the kernel lattice.

    ``psi``/``dpsi`` must be sampled on the kernel grid and satisfy the
    P-equation at ``lam`` with psi'(0) = 0 (verified unless ``check_input``
    is disabled).  Phi' uses the derivative representation
    psi' + K(x, x) psi + int K_x(x, y) psi dy, not finite differences.
    """
    grid = kernel.grid
    psi = np.asarray(psi, dtype=float)
    dpsi = np.asarray(dpsi, dtype=float)
    if psi.shape != (grid.n, 2) or dpsi.shape != (grid.n, 2):
        raise DomainError("psi and dpsi must be sampled on the kernel grid")
    if check_input:
        Pv = kernel.P(grid.points)
        resid = -differentiate(psi, grid, order=2) + np.einsum("nab,nb->na", Pv, psi) - lam * psi
        sup = float(np.max(np.abs(resid[3:-3])))
        if sup > residual_tol * (1.0 + abs(lam)):
            raise PreconditionError(
                f"input does not solve the source equation at lam={lam:.6g}: "
                f"residual {sup:.3g}"
            )
        if np.linalg.norm(dpsi[0]) > 1e-6:
            raise PreconditionError("input derivative does not vanish at x = 0")
    m = kernel.m
    h = grid.h
    phi = psi.copy()
    dphi = dpsi.copy()
    idx = np.arange(m + 1)
    Kdiag = kernel.K[idx, idx]
    dphi += np.einsum("pab,pb->pa", Kdiag, psi)
    for p in range(1, m + 1):
        w = _composite_weights(p + 1) * h
        seg = psi[: p + 1]
        phi[p] += np.einsum("q,qab,qb->a", w, kernel.K[p, : p + 1], seg)
        dphi[p] += np.einsum("q,qab,qb->a", w, kernel.Kx[p, : p + 1], seg)

    Qv = kernel.Q(grid.points)
    resid = -differentiate(phi, grid, order=2) + np.einsum("nab,nb->na", Qv, phi) - lam * phi
    residual = float(np.max(np.abs(resid[3:-3])))
    return TransformedSolution(float(lam), psi[0].copy(), phi, dphi, residual)


# ---------------------------------------------------------------------------
# eigenvalue transport
# ---------------------------------------------------------------------------


def transported_characteristic_values(kernel, lams, chunk=64):
    """det Phi'(1; lam) of the transformed fundamental solutions.

    Phi'(1) = Psi'(1) + K(1,1) Psi(1) + int_0^1 K_x(1, y) Psi(y) dy column
    by column; its roots are the Neumann eigenvalues of the target
    potential.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    prob = SpectralProblem(kernel.P, grid=kernel.grid)
    m = kernel.m
    w = _composite_weights(m + 1) * kernel.grid.h
    Kx1 = kernel.Kx[m]
    K11 = kernel.K[m, m]
    out = np.empty(lams.size)
    for lo in range(0, lams.size, chunk):
        batch = lams[lo : lo + chunk]
        _, _, Yn, Zn = _march(prob, batch, store=True)
        integral = np.einsum("q,qab,lqbc->lac", w, Kx1, Yn)
        Phi1 = Zn[:, -1] + np.matmul(K11, Yn[:, -1]) + integral
        out[lo : lo + chunk] = np.linalg.det(Phi1)
    return out


def transported_spectrum(kernel, count, scan_density=40.0, bisect_rtol=1e-10, margin=2.0):
    """First ``count`` roots of the transported characteristic function."""
    pminP, pmaxP = kernel.P.eig_range()
    pminQ, pmaxQ = kernel.Q.eig_range()
    lam_lo = min(pminP, pminQ) - margin
    lam_hi = (count * np.pi) ** 2 + max(pmaxP, pmaxQ) + margin
    span = np.sqrt(lam_hi - lam_lo)
    ns = int(np.ceil(scan_density * span)) + 2
    lams = lam_lo + np.linspace(0.0, span, ns) ** 2
    d = transported_characteristic_values(kernel, lams)
    roots = []
    sign_change = np.nonzero(d[:-1] * d[1:] < 0.0)[0]
    los = lams[sign_change].copy()
    his = lams[sign_change + 1].copy()
    flo = d[sign_change].copy()
    for _ in range(200):
        if los.size == 0:
            break
        mids = 0.5 * (los + his)
        if np.all(his - los <= bisect_rtol * (1.0 + np.abs(mids))):
            break
        fm = transported_characteristic_values(kernel, mids)
        left = flo * fm <= 0.0
        his = np.where(left, mids, his)
        los = np.where(left, los, mids)
        flo = np.where(left, flo, fm)
    roots = np.sort(0.5 * (los + his))
    if roots.size < count:
        raise DomainError(
            f"only {roots.size} transported roots found below {lam_hi:.4g}"
        )
    return roots[:count]
