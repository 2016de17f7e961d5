import numpy as np
import pytest

from glparab.errors import DomainError
from glparab.fields import Grid1D
from glparab.potentials import MatrixPotential, Term, TermSum, VectorFunction


class TestTerm:
    def test_value_kinds(self):
        x = np.array([0.0, 0.25, 1.0])
        assert Term("const", 2.0).value(x) == pytest.approx([2, 2, 2])
        assert Term("power", 3.0, k=2).value(x) == pytest.approx(3 * x**2)
        assert Term("cos", 1.0, m=2).value(x) == pytest.approx(np.cos(2 * np.pi * x))
        assert Term("exp", 1.5, b=-1.0).value(x) == pytest.approx(1.5 * np.exp(-x))

    def test_antiderivative_matches_quadrature(self):
        terms = [
            Term("const", 0.7),
            Term("power", -1.2, k=3),
            Term("cos", 0.5, m=1),
            Term("sin", 2.0, m=3),
            Term("exp", 0.3, b=2.0),
        ]
        xs = np.linspace(0, 1, 7)
        for t in terms:
            for x in xs:
                grid = Grid1D.uniform(0.0, max(x, 1e-3), 201)
                approx = np.trapz(t.value(grid.points), grid.points) if x > 0 else 0.0
                assert t.antiderivative(x) == pytest.approx(approx, abs=1e-4)

    def test_validation(self):
        with pytest.raises(DomainError):
            Term("power", 1.0, k=0)
        with pytest.raises(DomainError):
            Term("cos", 1.0, m=0)
        with pytest.raises(DomainError):
            Term("exp", 1.0, b=0.0)
        with pytest.raises(DomainError):
            Term("tan", 1.0)

    def test_derivative(self):
        t = Term("sin", 2.0, m=2)
        x = np.linspace(0, 1, 11)
        eps = 1e-6
        fd = (t.value(x + eps) - t.value(x - eps)) / (2 * eps)
        assert t.derivative(x) == pytest.approx(fd, abs=1e-4)


class TestMatrixPotential:
    def test_constant(self):
        P = MatrixPotential.constant([[1.0, 0.3], [0.3, 2.0]])
        out = P(np.array([0.0, 0.5]))
        assert out.shape == (2, 2, 2)
        assert np.allclose(out[0], [[1, 0.3], [0.3, 2]])
        assert np.allclose(P.constant_value(), [[1, 0.3], [0.3, 2]])

    def test_closed_form_symmetry(self):
        P = MatrixPotential.from_entries(
            [Term("cos", 0.4, m=1), 1.0], [Term("sin", 0.2, m=1)], 2.0
        )
        vals = P(np.linspace(0, 1, 9))
        assert np.allclose(vals[:, 0, 1], vals[:, 1, 0])
        assert P.constant_value() is None

    def test_sampled_requires_symmetry(self):
        g = Grid1D.uniform(0, 1, 11)
        vals = np.zeros((11, 2, 2))
        vals[:, 0, 1] = 1.0
        with pytest.raises(DomainError):
            MatrixPotential.from_samples(g, vals)

    def test_half_integral_closed_form(self):
        P = MatrixPotential.from_entries([Term("power", 1.0, k=1)], 0.0, 1.0)
        out = P.half_integral(np.array([1.0]))
        assert out[0, 0, 0] == pytest.approx(0.25, abs=1e-15)
        assert out[0, 1, 1] == pytest.approx(0.5, abs=1e-15)

    def test_half_integral_sampled(self):
        g = Grid1D.uniform(0, 1, 201)
        vals = np.zeros((201, 2, 2))
        vals[:, 0, 0] = g.points**2
        vals[:, 1, 1] = 1.0
        P = MatrixPotential.from_samples(g, vals)
        out = P.half_integral(np.array([0.5]))
        assert out[0, 0, 0] == pytest.approx(0.5 * 0.125 / 3, abs=1e-9)

    def test_eig_range(self):
        P = MatrixPotential.constant([[1.0, 0.3], [0.3, 1.0]])
        lo, hi = P.eig_range()
        assert lo == pytest.approx(0.7, abs=1e-12)
        assert hi == pytest.approx(1.3, abs=1e-12)


class TestExtension:
    def test_constant_extends_to_itself(self):
        P = MatrixPotential.constant([[2.0, 0.0], [0.0, 2.0]])
        Q = P.extended()
        assert Q.domain == (0.0, 2.0)
        assert Q(np.array([1.7]))[0, 0, 0] == pytest.approx(2.0)

    def test_closed_form_formula_extension(self):
        P = MatrixPotential.from_entries([Term("cos", 1.0, m=1)], 0.0, 0.0)
        Q = P.extended()
        assert Q(np.array([1.5]))[0, 0, 0] == pytest.approx(np.cos(1.5 * np.pi), abs=1e-14)

    def test_sampled_extension_is_c1_at_seam(self):
        g = Grid1D.uniform(0, 1, 401)
        vals = np.zeros((401, 2, 2))
        vals[:, 0, 0] = g.points
        vals[:, 1, 1] = g.points**2
        P = MatrixPotential.from_samples(g, vals)
        Q = P.extended()
        h = Q.grid.h
        s = Q.samples[:, 0, 0]
        # one-sided slopes across the seam agree for a C1 extension
        i = 400
        left = (s[i] - s[i - 1]) / h
        right = (s[i + 1] - s[i]) / h
        assert left == pytest.approx(right, abs=1e-8)
        assert Q.samples[i, 0, 0] == pytest.approx(1.0, abs=1e-12)


class TestVectorFunction:
    def test_eval(self):
        a = VectorFunction([1.0, Term("power", 1.0, k=1)], [1.0, Term("power", -1.0, k=1)])
        out = a(np.array([0.0, 0.5]))
        assert np.allclose(out, [[1, 1], [1.5, 0.5]])
