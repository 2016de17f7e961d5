import numpy as np
import pytest

from glparab.errors import ScanRangeError, SimplicityViolation, StepSizeError
from glparab.fields import Grid1D, differentiate, integrate
from glparab.potentials import MatrixPotential, Term
from glparab.spectral import (
    SpectralProblem,
    characteristic_value,
    check_simplicity,
    find_spectrum,
    fundamental_matrix,
    generating_element_check,
)

DIAG12 = MatrixPotential.constant([[1.0, 0.0], [0.0, 2.0]])
COUPLED = MatrixPotential.constant([[1.0, 0.3], [0.3, 1.0]])


@pytest.fixture(scope="module")
def table12():
    return find_spectrum(SpectralProblem(DIAG12), 6)


def diag12_exact(n_each=3):
    ks = (np.arange(n_each) * np.pi) ** 2
    return np.sort(np.concatenate([1.0 + ks, 2.0 + ks]))


class TestFundamentalMatrix:
    def test_zero_potential_cosine(self):
        prob = SpectralProblem(MatrixPotential.constant(np.zeros((2, 2))))
        fs = fundamental_matrix(prob, np.pi**2)
        expected = np.cos(np.pi * prob.grid.points)[:, None, None] * np.eye(2)
        assert np.max(np.abs(fs.Psi - expected)) < 1e-8
        assert np.max(np.abs(fs.dPsi[-1])) < 1e-8

    def test_diag_cosh_at_lambda_zero(self):
        prob = SpectralProblem(DIAG12)
        fs = fundamental_matrix(prob, 0.0)
        x = prob.grid.points
        assert np.max(np.abs(fs.Psi[:, 0, 0] - np.cosh(x))) < 1e-9
        assert np.max(np.abs(fs.Psi[:, 1, 1] - np.cosh(np.sqrt(2) * x))) < 1e-9
        assert np.max(np.abs(fs.Psi[:, 0, 1])) < 1e-12

    def test_identity_at_zero(self):
        prob = SpectralProblem(MatrixPotential.constant(np.zeros((2, 2))))
        fs = fundamental_matrix(prob, 0.0)
        assert np.max(np.abs(fs.Psi - np.eye(2))) < 1e-12
        assert np.max(np.abs(fs.dPsi)) < 1e-12

    def test_step_size_guard(self):
        prob = SpectralProblem(DIAG12, grid=Grid1D.uniform(0, 1, 21))
        with pytest.raises(StepSizeError) as exc:
            fundamental_matrix(prob, 2.0e3)
        assert exc.value.suggested_step is not None


class TestCharacteristicValue:
    def test_zero_at_eigenvalues(self):
        prob = SpectralProblem(DIAG12)
        assert abs(characteristic_value(prob, 1.0)) < 1e-9
        assert abs(characteristic_value(prob, np.pi**2 + 1.0)) < 1e-8

    def test_nonzero_between(self):
        # closed form: det = (-sqrt(l-1) sin sqrt(l-1)) * (-sqrt(l-2) sin sqrt(l-2))
        prob = SpectralProblem(DIAG12)
        val = characteristic_value(prob, 5.0)
        exact = (-2.0 * np.sin(2.0)) * (-np.sqrt(3.0) * np.sin(np.sqrt(3.0)))
        assert abs(val) > 1e-3
        assert val == pytest.approx(exact, rel=1e-8)


class TestFindSpectrum:
    def test_diag_spectrum(self, table12):
        exact = diag12_exact()
        assert np.all(np.abs(table12.lambdas - exact) / exact < 1e-8)

    def test_diag_norming_constants(self, table12):
        rhos = np.array([p.rho for p in table12.pairs])
        assert np.max(np.abs(rhos - [1, 1, 0.5, 0.5, 0.5, 0.5])) < 1e-8

    def test_coupled_spectrum_via_rotation(self):
        # U = rotation by pi/4 diagonalises [[1,.3],[.3,1]] to diag(0.7, 1.3)
        table = find_spectrum(SpectralProblem(COUPLED), 6)
        ks = (np.arange(3) * np.pi) ** 2
        exact = np.sort(np.concatenate([0.7 + ks, 1.3 + ks]))
        assert np.max(np.abs(table.lambdas - exact) / exact) < 1e-8

    def test_scan_range_error(self, monkeypatch):
        # a characteristic function with no roots at all must trip the guard
        import glparab.spectral as sp

        monkeypatch.setattr(
            sp, "characteristic_values", lambda prob, lams: np.exp(-np.asarray(lams) * 0.01) + 1.0
        )
        with pytest.raises(ScanRangeError):
            sp.find_spectrum(SpectralProblem(DIAG12), 2)

    def test_endpoint_normalization(self, table12):
        for p in table12.pairs:
            assert np.linalg.norm(p.endpoint0) == pytest.approx(1.0, abs=1e-10)

    def test_neumann_residual(self, table12):
        for p in table12.pairs:
            assert np.linalg.norm(p.dpsi[0]) < 1e-7
            assert np.linalg.norm(p.dpsi[-1]) < 1e-7

    def test_eigen_residual(self, table12):
        prob = table12.problem
        P = prob.potential.sample(prob.grid)
        for p in table12.pairs:
            d2 = differentiate(p.psi, prob.grid, order=2)
            resid = -d2 + np.einsum("nab,nb->na", P, p.psi) - p.lam * p.psi
            sup = np.max(np.abs(resid[3:-3]))
            assert sup < 1e-5 * (1.0 + abs(p.lam))

    def test_orthogonality(self, table12):
        grid = table12.problem.grid
        for i in range(table12.count):
            for j in range(i):
                prod = integrate(
                    np.sum(table12.pairs[i].psi * table12.pairs[j].psi, axis=1), grid
                )
                assert abs(prod) < 1e-7

    def test_shift_covariance(self):
        # P -> P + cI shifts lambda by c and leaves eigenfunctions unchanged
        c = 0.7
        shifted = MatrixPotential.constant([[1.0 + c, 0.3], [0.3, 1.0 + c]])
        t0 = find_spectrum(SpectralProblem(COUPLED), 4)
        t1 = find_spectrum(SpectralProblem(shifted), 4)
        assert np.max(np.abs(t1.lambdas - t0.lambdas - c)) < 1e-9
        for p0, p1 in zip(t0.pairs, t1.pairs):
            assert np.max(np.abs(p0.psi - p1.psi)) < 1e-8

    def test_smooth_potential_residuals(self):
        P = MatrixPotential.from_entries(
            [1.0, Term("cos", 0.4, m=1)],
            [Term("sin", 0.2, m=1)],
            [2.0, Term("cos", -0.3, m=2)],
        )
        prob = SpectralProblem(P)
        table = find_spectrum(prob, 8)
        assert np.all(np.diff(table.lambdas) > 0)
        Pv = P.sample(prob.grid)
        for p in table.pairs:
            d2 = differentiate(p.psi, prob.grid, order=2)
            resid = -d2 + np.einsum("nab,nb->na", Pv, p.psi) - p.lam * p.psi
            assert np.max(np.abs(resid[3:-3])) < 1e-5 * (1.0 + abs(p.lam))
            assert np.linalg.norm(p.dpsi[0]) < 1e-7
            assert np.linalg.norm(p.dpsi[-1]) < 1e-7


class TestSimplicity:
    def test_zero_potential_flagged(self):
        with pytest.raises(SimplicityViolation) as exc:
            find_spectrum(SpectralProblem(MatrixPotential.constant(np.zeros((2, 2)))), 4)
        lows = sorted(c[0] for c in exc.value.clusters)
        assert lows[1] == pytest.approx(np.pi**2, abs=1e-5)

    def test_near_degenerate_cluster(self):
        P = MatrixPotential.constant([[1.0, 0.0], [0.0, 1.0 + 1e-12]])
        with pytest.raises(SimplicityViolation) as exc:
            find_spectrum(SpectralProblem(P), 4)
        assert any(abs(c[0] - 1.0) < 1e-6 for c in exc.value.clusters)

    def test_report_diag(self):
        table = find_spectrum(SpectralProblem(DIAG12), 6)
        rep = check_simplicity(table)
        assert rep.simple
        assert rep.min_gap == pytest.approx(1.0, abs=1e-8)
        assert rep.constant_criterion["disjoint"]

    def test_constant_criterion_degenerate(self):
        rep = check_simplicity(MatrixPotential.constant(np.zeros((2, 2))))
        assert not rep.simple
        assert any(abs(a - np.pi**2) < 1e-9 for a, _ in rep.constant_criterion["collisions"])


class TestGeneratingElement:
    def test_constant_a_fails_on_cosine_modes(self, table12):
        rep = generating_element_check(table12, lambda x: np.stack([np.ones_like(x)] * 2, axis=1))
        assert not rep.verdict
        assert rep.first_vanishing == 3

    def test_linear_a_products_match_analytic(self, table12):
        # (a, psi) for a = (1+x, 1+x): int (1+x) dx = 3/2 on constant modes,
        # int (1+x) cos(k pi x) dx = ((-1)^k - 1)/(k pi)^2 on cosine modes,
        # which vanishes for even k: modes 5, 6 are exactly silent.
        rep = generating_element_check(table12, lambda x: np.stack([1 + x, 1 + x], axis=1))
        expected = np.array([1.5, 1.5, -2 / np.pi**2, -2 / np.pi**2, 0.0, 0.0])
        assert np.max(np.abs(rep.products - expected)) < 1e-9
        assert not rep.verdict
        assert rep.first_vanishing == 5

    def test_zero_a(self, table12):
        rep = generating_element_check(table12, lambda x: np.zeros((x.size, 2)))
        assert not rep.verdict
        assert np.max(np.abs(rep.products)) == 0.0
