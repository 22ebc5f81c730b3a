# coding: utf-8
import numpy as np
import pytest
import scipy.io
from numpy.testing import assert_allclose

from laboratory.exceptions import InvalidParameter, InvalidSize, SizeMismatch
from laboratory.operators import (
    assemble_laplacian,
    assemble_operator,
    bessel_reference,
    build_grid,
    export,
    gradient_norm,
    interpolate,
    laplacian_eigenvalues,
    radau_rule,
    random_smooth,
    region_integral,
    weighted_inner,
    weighted_norm,
)
from laboratory.profiles import VelocityProfile

PIPE = VelocityProfile((1, 0, -1))


class TestGrid:
    @pytest.mark.parametrize("beta", [0, 1])
    def test_radau_rule(self, beta):
        nodes, weights = radau_rule(16, beta)
        assert nodes[-1] == 1.0
        assert np.all(np.diff(nodes) > 0)
        assert np.all(weights > 0)
        assert weights.sum() == pytest.approx(2.0)

    @pytest.mark.parametrize("ell", [0, 1])
    def test_scaling(self, ell):
        unit, double = build_grid(1.0, 32, ell), build_grid(2.0, 32, ell)
        assert_allclose(double.nodes, 2 * unit.nodes, rtol=1e-15)
        assert_allclose(double.quad_weights, 4 * unit.quad_weights, rtol=1e-14)

    @pytest.mark.parametrize("ell", [0, 1])
    def test_quadrature(self, ell):
        grid = build_grid(1.0, 128, ell)
        assert grid.quad_weights.sum() == pytest.approx(0.5, rel=1e-12)
        assert np.sum(grid.quad_weights * grid.nodes**2) == pytest.approx(0.25, rel=1e-12)
        assert np.all(grid.nodes > 0) and grid.nodes[-1] == pytest.approx(1.0)

    def test_size(self):
        with pytest.raises(InvalidSize):
            build_grid(1.0, 4)
        with pytest.raises(InvalidParameter):
            build_grid(-1.0, 16)

    def test_size_mismatch(self):
        grid = build_grid(1.0, 16)
        with pytest.raises(SizeMismatch):
            weighted_norm(np.ones(17), grid)


class TestInnerProduct:
    def test_pairings(self):
        grid = build_grid(1.0, 64, ell=1)
        one, r = np.ones(grid.size), grid.nodes
        assert weighted_inner(one, one, grid) == pytest.approx(0.5)
        assert weighted_inner(r, r, grid) == pytest.approx(0.25)
        assert weighted_inner(one, r, grid) == pytest.approx(1 / 3)

    def test_conjugate_symmetry(self):
        grid = build_grid(1.0, 32)
        f, g = random_smooth(grid, 2, np.random.default_rng(1))
        assert weighted_inner(f, g, grid) == pytest.approx(np.conj(weighted_inner(g, f, grid)))

    def test_random_smooth_normalized(self):
        grid = build_grid(1.0, 32, ell=2)
        for g in random_smooth(grid, 5, np.random.default_rng(2)):
            assert weighted_norm(g, grid) == pytest.approx(1.0)


class TestLaplacian:
    def test_constants_in_kernel(self):
        grid = build_grid(1.0, 128)
        laplacian = assemble_laplacian(grid, 0)
        residual = np.linalg.norm(laplacian @ np.ones(grid.size)) / np.linalg.norm(laplacian)
        assert residual <= 1e-8

    @pytest.mark.parametrize("ell", [0, 1])
    def test_bessel_eigenvalues(self, ell):
        grid = build_grid(1.0, 128, ell)
        computed = laplacian_eigenvalues(grid, ell)[:10]
        reference = bessel_reference(ell, 10)
        assert_allclose(computed, reference, rtol=1e-6, atol=1e-6)

    def test_bessel_reference(self):
        reference = bessel_reference(0, 3)
        assert reference[0] == 0
        assert reference[1] == pytest.approx(3.8317059702075125**2)
        assert bessel_reference(1, 1)[0] == pytest.approx(1.8411837813406593**2)
        assert bessel_reference(1, 1, radius=2)[0] == pytest.approx(1.8411837813406593**2 / 4)

    def test_gradient_norm(self):
        even, odd = build_grid(1.0, 32, 0), build_grid(1.0, 32, 1)
        assert gradient_norm(even, np.ones(even.size), 0) == pytest.approx(0.0, abs=1e-6)
        # |grad r^2|^2 = int 4 r^2 r dr = 1
        assert gradient_norm(even, even.nodes**2, 0) == pytest.approx(1.0)
        # g = r: int |g'|^2 r dr + ell^2 int |g|^2 / r dr
        assert gradient_norm(odd, odd.nodes, 1) ** 2 == pytest.approx(1.0)
        assert gradient_norm(odd, odd.nodes, 2) ** 2 == pytest.approx(2.5)


class TestOperator:
    def test_no_advection(self):
        grid = build_grid(1.0, 32)
        op = assemble_operator(grid, PIPE, 1e-2, 0.0, 0)
        assert_allclose(op.matrix, -1e-2 * op.laplacian)
        matrix = op.symmetrized()
        assert_allclose(matrix, matrix.conj().T)

    def test_constant_datum(self):
        grid = build_grid(1.0, 32)
        op = assemble_operator(grid, PIPE, 1e-3, 2.0, 0)
        one = np.ones(grid.size)
        scale = 1e-3 * np.linalg.norm(op.laplacian)
        assert_allclose(op.apply(one), 2j * PIPE(grid.nodes), atol=1e-8 * scale)

    @pytest.mark.parametrize("ell", [0, 1, 3])
    def test_accretive(self, ell):
        grid = build_grid(1.0, 64, ell)
        op = assemble_operator(grid, PIPE, 1e-3, 1.0, ell)
        for g in random_smooth(grid, 10, np.random.default_rng(ell)):
            energy = op.nu * op.gradient_norm(g) ** 2
            assert weighted_inner(g, op.apply(g), grid).real == pytest.approx(energy, rel=1e-10)

    @pytest.mark.parametrize("ell", [0, 2])
    @pytest.mark.parametrize("k", [1.0, -0.5])
    def test_advection_is_imaginary_part(self, ell, k):
        grid = build_grid(1.0, 64, ell)
        op = assemble_operator(grid, PIPE, 1e-3, k, ell)
        for g in random_smooth(grid, 5, np.random.default_rng(3)):
            advection = k * weighted_inner(g, op.velocity * g, grid).real
            assert weighted_inner(g, op.apply(g), grid).imag == pytest.approx(advection, rel=1e-9, abs=1e-12)

    def test_shift(self):
        grid = build_grid(1.0, 16)
        op = assemble_operator(grid, PIPE, 1e-3, 2.0, 0)
        g = random_smooth(grid, 1)[0]
        assert_allclose(op.apply(g, 0.5), op.apply(g) - 1j * 2.0 * 0.5 * g)

    def test_invalid(self):
        grid = build_grid(1.0, 16)
        with pytest.raises(InvalidParameter):
            assemble_operator(grid, PIPE, 0.0, 1.0, 0)
        with pytest.raises(InvalidParameter):
            assemble_operator(grid, PIPE, 1e-3, 1.0, 1)
        with pytest.raises(InvalidParameter):
            assemble_operator(grid, VelocityProfile((1, 0, -1), radius=2), 1e-3, 1.0, 0)

    def test_export(self, tmp_path):
        op = assemble_operator(build_grid(1.0, 16), PIPE, 1e-3, 1.0, 0)
        path = tmp_path / "operator.mtx"
        export(op, str(path))
        matrix = scipy.io.mmread(str(path))
        assert_allclose(matrix.toarray(), op.matrix)


class TestInterpolation:
    def test_nodes(self):
        grid = build_grid(1.0, 32, 1)
        g = random_smooth(grid, 1, np.random.default_rng(3))[0]
        assert_allclose(interpolate(grid, g, grid.nodes), g, rtol=1e-10, atol=1e-12)

    def test_polynomial(self):
        grid = build_grid(1.0, 32)
        values = interpolate(grid, 1 - grid.nodes**2, np.array([0.0, 0.3, 0.75]))
        assert_allclose(values, [1.0, 0.91, 1 - 0.5625], atol=1e-12)

    def test_region_integral(self):
        grid = build_grid(1.0, 32)
        one = np.ones(grid.size)
        assert region_integral(grid, one, [(0.0, 1.0)]) == pytest.approx(0.5)
        assert region_integral(grid, one, [(0.5, 1.0)]) == pytest.approx(0.375)
        assert region_integral(grid, one, [(0.0, 0.25), (0.5, 1.0)]) == pytest.approx(0.375 + 0.03125)
        assert region_integral(grid, one, []) == 0
