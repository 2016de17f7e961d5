import math

import numpy as np
import pytest

from glparab.errors import DomainError, PicardDivergenceError
from glparab.goursat import (
    DenseRhs,
    GoursatConfig,
    GoursatProblem,
    aposteriori_estimates,
    back_transform,
    boundary_residuals,
    from_characteristic,
    homogeneous_part,
    picard_certificate,
    picard_solve,
    solution_and_derivatives,
    to_characteristic,
    wave_residual,
)


def series_I0like(z, terms=60):
    """Brute-force sum of z^k / (k!)^2 (= I0(2 sqrt(z)))."""
    return sum(z**k / math.factorial(k) ** 2 for k in range(terms))


def series_I1like(z, terms=60):
    """Brute-force sum of z^k / (k! (k+1)!)."""
    return sum(z**k / (math.factorial(k) * math.factorial(k + 1)) for k in range(terms))


def comp1(vals):
    n = vals.shape[0] - 1
    out = np.zeros((n + 1, 4))
    out[:, 0] = vals
    return out


def zero_rhs(X, Y):
    return np.zeros(X.shape + (4, 4))


def identity_rhs(X, Y):
    return np.broadcast_to(np.eye(4), X.shape + (4, 4)).copy()


class TestCharacteristicMap:
    def test_vertices(self):
        assert to_characteristic(1.0, 1.0) == (1.0, 0.0)
        assert to_characteristic(1.0, -1.0) == (0.0, 1.0)

    def test_round_trip(self):
        X, Y = to_characteristic(0.4, 0.1)
        x, y = from_characteristic(X, Y)
        assert abs(x - 0.4) < 1e-15 and abs(y - 0.1) < 1e-15

    def test_lines(self):
        # y = x maps to Y = 0; x = 1 maps to X + Y = 1
        X, Y = to_characteristic(0.7, 0.7)
        assert Y == 0.0
        X, Y = to_characteristic(1.0, 0.33)
        assert X + Y == pytest.approx(1.0, abs=1e-15)


class TestHomogeneousPart:
    def test_two_sides_polynomial(self):
        n = 32
        s = np.linspace(0, 1, n + 1)
        prob = GoursatProblem.build(
            GoursatConfig.TWO_SIDES, zero_rhs, comp1(s), comp1(s**2), n
        )
        k0 = homogeneous_part(prob)
        X, Y = np.meshgrid(s, s, indexing="ij")
        assert np.max(np.abs(k0.values[..., 0] - (X + Y**2))) < 1e-13

    def test_two_sides_constant(self):
        n = 16
        c = np.array([2.5, 0.0, -1.0, 0.5])
        prob = GoursatProblem.build(GoursatConfig.TWO_SIDES, zero_rhs, c, c, n)
        k0 = homogeneous_part(prob)
        assert np.max(np.abs(k0.values - c)) < 1e-14

    def test_side_and_normal_polynomial(self):
        n = 32
        s = np.linspace(0, 1, n + 1)
        prob = GoursatProblem.build(
            GoursatConfig.SIDE_AND_NORMAL, zero_rhs, comp1(s**2), None, n
        )
        k0 = homogeneous_part(prob)
        X, Y = np.meshgrid(s, s, indexing="ij")
        expected = X**2 + (1 - Y) ** 2 - 1.0
        err = np.abs(k0.values[..., 0] - expected)
        assert np.max(err[prob.mask]) < 1e-13


class TestPicardSolve:
    def test_zero_rhs_returns_k0(self):
        n = 16
        s = np.linspace(0, 1, n + 1)
        prob = GoursatProblem.build(GoursatConfig.TWO_SIDES, zero_rhs, comp1(s), comp1(s), n)
        sol = picard_solve(prob)
        assert sol.iterations == 1  # first sweep confirms the fixed point
        assert np.max(np.abs(sol.k - sol.k0)) == 0.0

    def test_bessel_value_and_certificate(self):
        n = 400
        f = np.array([1.0, 0.0, 0.0, 0.0])
        prob = GoursatProblem.build(
            GoursatConfig.TWO_SIDES, identity_rhs, f, f, n,
            df=np.zeros((n + 1, 4)), dg=np.zeros((n + 1, 4)),
        )
        assert prob.M == pytest.approx(1.0)
        sol = picard_solve(prob)
        assert sol.k[-1, -1, 0] == pytest.approx(series_I0like(1.0), abs=1e-6)
        assert np.max(np.abs(sol.k[..., 1:])) == 0.0
        cert = picard_certificate(sol)
        assert cert["ok"]
        # C0 bound: e^M * ||k0|| = e >= I0(2)
        est = aposteriori_estimates(sol)
        assert est["c0"][2] and est["c0"][0] <= np.e

    def test_bessel_derivative(self):
        n = 400
        f = np.array([1.0, 0.0, 0.0, 0.0])
        prob = GoursatProblem.build(
            GoursatConfig.TWO_SIDES, identity_rhs, f, f, n,
            df=np.zeros((n + 1, 4)), dg=np.zeros((n + 1, 4)),
        )
        sol = picard_solve(prob)
        _, kX, _, kXY = solution_and_derivatives(sol)
        assert kX[-1, -1, 0] == pytest.approx(series_I1like(1.0), abs=1e-6)
        # mixed derivative equals R k pointwise by construction of the sweep
        assert np.max(np.abs(kXY - sol.k)) < 1e-12

    def test_increment_decay_dominated(self):
        n = 200
        f = np.array([1.0, 0.0, 0.0, 0.0])
        prob = GoursatProblem.build(
            GoursatConfig.TWO_SIDES, identity_rhs, f, f, n,
            df=np.zeros((n + 1, 4)), dg=np.zeros((n + 1, 4)),
        )
        sol = picard_solve(prob)
        norm_k0 = 1.0
        for nu, inc in enumerate(sol.increments):
            if inc == 0.0:
                continue
            bound = prob.M**nu / math.factorial(nu) ** 2 * norm_k0
            assert np.log(inc) <= np.log(bound) + np.log(2.0)

    def test_manufactured_cauchy(self):
        # k1 = exp(aX + bY) solves the system with R = a*b*I4
        a, b, n = 0.8, -0.6, 128
        s = np.linspace(0, 1, n + 1)
        rhs = lambda X, Y: np.broadcast_to(a * b * np.eye(4), X.shape + (4, 4)).copy()
        exact = lambda X, Y: np.exp(a * X + b * Y)
        F = comp1(exact(s, 1 - s))
        dF = comp1((a - b) * exact(s, 1 - s))
        G = comp1((a + b) * exact(1 - s, s) / np.sqrt(2))
        prob = GoursatProblem.build(GoursatConfig.CAUCHY_ON_AB, rhs, F, G, n, df=dF)
        sol = picard_solve(prob)
        X, Y = np.meshgrid(s, s, indexing="ij")
        err = np.abs(sol.k[..., 0] - exact(X, Y))
        assert np.max(err[prob.mask]) < 5e-8
        res = boundary_residuals(sol)
        assert res["F"] < 1e-9 and res["G"] < 1e-9

    def test_manufactured_side_and_normal(self):
        a, b, n = 0.5, 0.9, 128
        s = np.linspace(0, 1, n + 1)
        rhs = lambda X, Y: np.broadcast_to(a * b * np.eye(4), X.shape + (4, 4)).copy()
        exact = lambda X, Y: np.exp(a * X + b * Y)
        F = comp1(exact(s, 0 * s))
        dF = comp1(a * exact(s, 0 * s))
        G = comp1((a + b) * exact(1 - s, s) / np.sqrt(2))
        prob = GoursatProblem.build(GoursatConfig.SIDE_AND_NORMAL, rhs, F, G, n, df=dF)
        sol = picard_solve(prob)
        X, Y = np.meshgrid(s, s, indexing="ij")
        err = np.abs(sol.k[..., 0] - exact(X, Y))
        assert np.max(err[prob.mask]) < 5e-8
        res = boundary_residuals(sol)
        assert res["F"] < 1e-9 and res["G"] < 1e-9

    def test_cauchy_homogeneous_data_zero_solution(self):
        n = 64
        rhs = lambda X, Y: np.broadcast_to(0.7 * np.eye(4), X.shape + (4, 4)).copy()
        prob = GoursatProblem.build(GoursatConfig.CAUCHY_ON_AB, rhs, None, None, n)
        sol = picard_solve(prob)
        assert sol.sup() == 0.0

    def test_linearity(self):
        n = 64
        s = np.linspace(0, 1, n + 1)
        rhs = lambda X, Y: np.broadcast_to(0.5 * np.eye(4), X.shape + (4, 4)).copy()
        F1, G1 = comp1(s), comp1(s**2)
        F2, G2 = comp1(np.cos(np.pi * s) - 1.0 + s[0] * 0 + 1.0), comp1(np.ones_like(s))
        # shared corner: F(0) must equal G(0) for each problem
        F1[0] = G1[0]
        sol1 = picard_solve(GoursatProblem.build(GoursatConfig.TWO_SIDES, rhs, F1, G1, n))
        sol2 = picard_solve(GoursatProblem.build(GoursatConfig.TWO_SIDES, rhs, F2, G2, n))
        sol12 = picard_solve(
            GoursatProblem.build(GoursatConfig.TWO_SIDES, rhs, F1 + F2, G1 + G2, n)
        )
        assert np.max(np.abs(sol12.k - sol1.k - sol2.k)) < 1e-9

    def test_divergence_guard(self):
        n = 32
        # enormous R makes the discrete iteration blow up before contraction
        rhs = lambda X, Y: np.broadcast_to(5e3 * np.eye(4), X.shape + (4, 4)).copy()
        f = np.array([1.0, 0, 0, 0])
        prob = GoursatProblem.build(
            GoursatConfig.TWO_SIDES, rhs, f, f, n, df=np.zeros((n + 1, 4)), dg=np.zeros((n + 1, 4))
        )
        with pytest.raises(PicardDivergenceError):
            picard_solve(prob, max_iter=25)

    def test_corner_compatibility_enforced(self):
        n = 16
        s = np.linspace(0, 1, n + 1)
        with pytest.raises(DomainError):
            GoursatProblem.build(
                GoursatConfig.TWO_SIDES, zero_rhs, comp1(s + 1.0), comp1(s), n
            )


class TestCrossConfigConsistency:
    def test_two_sides_on_subtriangle_of_side_and_normal(self):
        # Solve SIDE_AND_NORMAL, restrict its values to the characteristic
        # sides of a sub-square at (X0, Y0), re-solve with TWO_SIDES there,
        # and compare interiors.
        a, b, n = 0.6, -0.4, 128
        s = np.linspace(0, 1, n + 1)
        R = a * b * np.eye(4)
        rhs = lambda X, Y: np.broadcast_to(R, X.shape + (4, 4)).copy()
        exact = lambda X, Y: np.exp(a * X + b * Y)
        F = comp1(exact(s, 0 * s))
        G = comp1((a + b) * exact(1 - s, s) / np.sqrt(2))
        sol3 = picard_solve(
            GoursatProblem.build(GoursatConfig.SIDE_AND_NORMAL, rhs, F, G, n)
        )

        # sub-square with corner (X0, Y0) = (1/4, 1/4), side L = 1/2
        i0 = n // 4
        L = 0.5
        m = n // 2
        sub_rhs = lambda X, Y: np.broadcast_to(L**2 * R, X.shape + (4, 4)).copy()
        Fsub = sol3.k[i0 : i0 + m + 1, i0]
        Gsub = sol3.k[i0, i0 : i0 + m + 1]
        prob1 = GoursatProblem.build(GoursatConfig.TWO_SIDES, sub_rhs, Fsub, Gsub, m)
        sol1 = picard_solve(prob1)
        # compare on the part of the sub-square that stays inside omega
        sub = sol3.k[i0 : i0 + m + 1, i0 : i0 + m + 1]
        ii, jj = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        inside = (ii + i0) + (jj + i0) <= n
        diff = np.abs(sol1.k - sub)[inside]
        assert np.max(diff) < 1e-7


class TestBackTransform:
    def test_constant_field(self):
        n = 64
        c = np.array([1.0, -2.0, 0.5, 3.0])
        prob = GoursatProblem.build(GoursatConfig.TWO_SIDES, zero_rhs, c, c, n)
        sol = picard_solve(prob)
        kv = back_transform(sol)
        assert np.max(np.abs(kv.values[kv.mask] - c)) < 1e-14

    def test_bessel_wave_residual(self):
        n = 400
        f = np.array([1.0, 0.0, 0.0, 0.0])
        prob = GoursatProblem.build(
            GoursatConfig.TWO_SIDES, identity_rhs, f, f, n,
            df=np.zeros((n + 1, 4)), dg=np.zeros((n + 1, 4)),
        )
        sol = picard_solve(prob)
        assert wave_residual(sol) < 1e-4

    def test_odd_resolution_rejected(self):
        n = 17
        c = np.array([1.0, 0, 0, 0])
        prob = GoursatProblem.build(GoursatConfig.TWO_SIDES, zero_rhs, c, c, n)
        sol = picard_solve(prob)
        with pytest.raises(DomainError):
            back_transform(sol)


class TestDenseRhs:
    def test_shape_validation(self):
        with pytest.raises(DomainError):
            DenseRhs(np.zeros((5, 6, 4, 4)))

    def test_apply_matches_matmul(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(9, 9, 4, 4))
        k = rng.normal(size=(9, 9, 4))
        out = DenseRhs(vals).apply(k)
        assert np.allclose(out, np.einsum("ijab,ijb->ija", vals, k))
