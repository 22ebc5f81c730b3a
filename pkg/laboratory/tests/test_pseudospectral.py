# coding: utf-8
import math

import numpy as np
import pytest

from laboratory.exceptions import InvalidMode, InvalidParameter
from laboratory.operators import (
    assemble_operator,
    bessel_reference,
    build_grid,
    laplacian_eigenvalues,
    random_smooth,
)
from laboratory.profiles import VelocityProfile
from laboratory.pseudospectral import (
    enhanced_rate_constant,
    golden_section,
    optimal_delta,
    poincare_check,
    proof_constant,
    proof_rate_constant,
    pseudo_abscissa,
    resolvent_lower_bound,
    sigma_min_at,
    split_bound,
    verify_away_bound,
    verify_near_bound,
)
from laboratory.semigroup import lambda_rate

PIPE = VelocityProfile((1, 0, -1))


def pipe_operator(nu, k=1.0, ell=0, n=96, profile=PIPE):
    return assemble_operator(build_grid(profile.radius, n, ell), profile, nu, k, ell)


class TestGoldenSection:
    def test_parabola(self):
        result = golden_section(lambda x: (x - 0.3) ** 2 + 1, -1, 2, tol=1e-10)
        assert result["converged"]
        assert result["argmin"] == pytest.approx(0.3, abs=1e-8)
        assert result["minimum"] == pytest.approx(1.0)

    def test_minimum_at_bound(self):
        result = golden_section(lambda x: x, 0.0, 1.0)
        assert result["argmin"] == 0.0

    def test_iterations(self):
        result = golden_section(lambda x: x**2, -1, 1, tol=1e-12, max_iterations=5)
        assert result["iterations"] == 5
        assert not result["converged"]


class TestSigmaMin:
    def test_hermitian_kernel(self):
        op = pipe_operator(1e-3, k=0.0, n=32)
        assert sigma_min_at(op, 0.7) == pytest.approx(0.0, abs=1e-8)

    def test_distance_to_range(self):
        op = pipe_operator(1e-3, k=2.0, n=32)
        # dist(lambda, [0, 1]) = 0.5
        assert sigma_min_at(op, 1.5) >= 2.0 * 0.5 * (1 - 1e-12)
        assert sigma_min_at(op, -0.5) >= 2.0 * 0.5 * (1 - 1e-12)

    def test_lipschitz_in_lambda(self):
        # |sigma(l1) - sigma(l2)| <= |k| |l1 - l2| since H_lambda moves by i k (l2 - l1)
        op = pipe_operator(1e-3, k=1.5, n=48)
        lambdas = np.linspace(-0.2, 1.2, 57)
        sigmas = np.array([sigma_min_at(op, lam) for lam in lambdas])
        assert np.all(np.abs(np.diff(sigmas)) <= 1.5 * np.diff(lambdas) * (1 + 1e-9) + 1e-9)
        curve = pseudo_abscissa(op).curve
        assert np.all(np.abs(np.diff(curve.sigmas)) <= 1.5 * np.diff(curve.lambdas) * (1 + 1e-9) + 1e-9)

    @pytest.mark.slow
    def test_refinement(self):
        coarse, fine = pipe_operator(1e-3, n=128), pipe_operator(1e-3, n=256)
        assert sigma_min_at(coarse, 0.5) == pytest.approx(sigma_min_at(fine, 0.5), rel=1e-6)


class TestPseudoAbscissa:
    def test_heat_mode(self):
        op = pipe_operator(1e-2, k=0.0, ell=1, n=64)
        result = pseudo_abscissa(op)
        assert result.psi == pytest.approx(1e-2 * bessel_reference(1, 1)[0], rel=1e-6)
        assert result.c1_effective is None

    def test_constant_mode(self):
        result = pseudo_abscissa(pipe_operator(1e-2, k=0.0, n=32))
        assert result.psi == pytest.approx(0.0, abs=1e-8)

    def test_below_spectrum(self):
        op = pipe_operator(1e-3, n=64)
        result = pseudo_abscissa(op, value_range=PIPE.value_range(), order=2)
        eigenvalues = np.linalg.eigvals(op.symmetrized())
        assert result.psi <= eigenvalues.real.min() * (1 + 1e-3)
        assert result.c1_effective == pytest.approx(result.psi / math.sqrt(1e-3))
        assert len(result.curve.rows()) == 129
        assert result.psi <= result.curve.sigmas.min()

    def test_scaling(self):
        psi = [pseudo_abscissa(pipe_operator(nu), value_range=PIPE.value_range()).psi for nu in (1e-3, 1e-4)]
        # Exponent m / (m + 2) = 1/2
        assert psi[0] / psi[1] == pytest.approx(math.sqrt(10), rel=0.2)

    def test_joint_scaling(self):
        # H(2 nu, 2 k) = 2 H(nu, k) so the abscissa doubles
        base = pseudo_abscissa(pipe_operator(1e-3, n=64), value_range=PIPE.value_range()).psi
        doubled = pseudo_abscissa(pipe_operator(2e-3, k=2.0, n=64), value_range=PIPE.value_range()).psi
        assert doubled == pytest.approx(2 * base, rel=1e-6)

    def test_grid_count(self):
        with pytest.raises(InvalidParameter):
            pseudo_abscissa(pipe_operator(1e-3, n=16), grid_count=16)
        with pytest.raises(InvalidParameter):
            pseudo_abscissa(pipe_operator(1e-3, n=16), refine_tol=0)

    def test_resolvent_bound_guard(self):
        with pytest.raises(InvalidMode):
            resolvent_lower_bound(pipe_operator(1e-3, k=0.0, n=16), 2)

    @pytest.mark.slow
    def test_uniform_constant(self):
        constants = [resolvent_lower_bound(pipe_operator(nu, n=128), 2) for nu in (1e-3, 1e-4, 1e-5)]
        assert max(constants) / min(constants) <= 3

    def test_crossover_branch(self):
        op = pipe_operator(0.1, k=0.01, n=32)
        c1 = resolvent_lower_bound(op, 2)
        psi = pseudo_abscissa(op).psi
        assert c1 == pytest.approx(psi / (0.01**2 / 0.1))

    def test_taylor_rate(self):
        # Poiseuille flow in the diffusive branch decays at the Taylor rate k^2 / (192 nu)
        op = pipe_operator(0.1, k=0.01, n=64)
        psi = pseudo_abscissa(op).psi
        assert psi == pytest.approx(0.01**2 / (192 * 0.1), rel=0.03)
        crossover = psi / lambda_rate(0.1, 0.01, 2)
        enhanced = pseudo_abscissa(pipe_operator(1e-4, n=64)).psi / lambda_rate(1e-4, 1.0, 2)
        assert crossover <= 0.1 * enhanced


class TestAudits:
    @pytest.fixture(scope="class")
    def operator(self):
        return pipe_operator(1e-3, n=64)

    def test_zero(self, operator):
        zero = np.zeros(operator.size)
        assert verify_away_bound(operator, PIPE, 0.5, 0.1, zero).residual == 0
        assert verify_near_bound(operator, PIPE, 0.5, 0.1, zero).residual == 0

    def test_empty_neighborhood(self, operator):
        g = random_smooth(operator.grid, 1, np.random.default_rng(4))[0]
        result = verify_near_bound(operator, PIPE, 3.0, 0.1, g)
        assert result.lhs == 0
        assert result.residual == pytest.approx(result.rhs)
        assert result.holds
        away = verify_away_bound(operator, PIPE, 3.0, 0.1, g)
        assert away.lhs == pytest.approx(1.0)
        assert away.holds

    @pytest.mark.parametrize("delta", [0.05, 0.1])
    def test_random_smooth(self, operator, delta):
        rng = np.random.default_rng(5)
        for lam in (0.25, 0.75, 1.0):
            for g in random_smooth(operator.grid, 20, rng):
                assert verify_away_bound(operator, PIPE, lam, delta, g).holds
                assert verify_near_bound(operator, PIPE, lam, delta, g).holds

    def test_eigenvector(self, operator):
        values, vectors = np.linalg.eig(operator.symmetrized())
        g = operator.from_euclidean(vectors[:, np.argmin(values.real)])
        g = g / np.sqrt(np.sum(np.abs(g) ** 2 * operator.grid.quad_weights))
        lam = float(values.imag[np.argmin(values.real)])
        assert verify_away_bound(operator, PIPE, lam, 0.1, g).residual >= -1e-8
        assert split_bound(operator, PIPE, lam, 0.1, g).holds

    def test_guard(self):
        with pytest.raises(InvalidMode):
            verify_away_bound(pipe_operator(1e-3, k=0.0, n=16), PIPE, 0.5, 0.1, np.ones(16))


class TestPoincare:
    def test_zero(self):
        grid = build_grid(1.0, 32)
        assert poincare_check(grid, np.zeros(grid.size), 0.2, 0.8) == (0.0, 0.0)

    def test_constant_counterexample(self):
        grid = build_grid(1.0, 32)
        lhs, rhs = poincare_check(grid, np.ones(grid.size), 0.0, 1.0)
        assert lhs == pytest.approx(0.5)
        assert rhs == pytest.approx(0.0, abs=1e-6)

    def test_vanishing_at_boundary(self):
        grid = build_grid(1.0, 64, ell=1)
        lhs, rhs = poincare_check(grid, 1.0 - grid.nodes, 0.5, 1.0)
        assert lhs <= rhs

    def test_radii(self):
        with pytest.raises(InvalidParameter):
            poincare_check(build_grid(1.0, 16), np.ones(16), 0.8, 0.2)


class TestProofConstant:
    def test_optimal_delta(self):
        assert optimal_delta(1e-4, 1.0, 2) == pytest.approx(0.1)
        assert optimal_delta(0.1, 0.01, 2, delta_tilde=0.5) == 0.5
        with pytest.raises(InvalidMode):
            optimal_delta(1e-4, 0.0, 2)

    def test_constant(self):
        constant, delta = proof_constant(2, 2.0)
        objective = 4 * (delta**-2 + delta**-6 + 2.0 * delta**2)
        assert constant == pytest.approx(objective)
        for other in (0.5 * delta, 2 * delta):
            assert constant <= 4 * (other**-2 + other**-6 + 2.0 * other**2)

    def test_proof_rate_constant(self):
        levels = np.linspace(0.0, 1.0, 21)
        c1_proof, delta_tilde, c0 = proof_rate_constant(PIPE, levels, [0.1, 0.01])
        constant, expected_delta = proof_constant(2, 2 * c0**2)
        assert c1_proof == pytest.approx(1 / constant)
        assert delta_tilde == pytest.approx(expected_delta)
        assert c1_proof < resolvent_lower_bound(pipe_operator(1e-4, n=64), 2)
        with pytest.raises(InvalidParameter):
            proof_rate_constant(PIPE, [5.0], [0.1])

    def test_split_bound(self):
        op = pipe_operator(1e-4, n=64)
        _, delta_tilde, _ = proof_rate_constant(PIPE, np.linspace(0.0, 1.0, 21), [0.1, 0.01])
        delta = optimal_delta(1e-4, 1.0, 2, delta_tilde)
        for g in random_smooth(op.grid, 5, np.random.default_rng(8)):
            result = split_bound(op, PIPE, 0.5, delta, g)
            assert result.holds
            assert result.lhs == pytest.approx(1.0)


class TestEnhancedRateConstant:
    def test_explicit(self):
        assert enhanced_rate_constant(PIPE, [1e-3], 1.0, c1=0.3) == 0.3

    def test_minimum_over_enhanced(self):
        nus = [1.0, 1e-2, 1e-3]
        constant = enhanced_rate_constant(PIPE, nus, 1.0, grid_size=48, grid_count=65)
        expected = [resolvent_lower_bound(pipe_operator(nu, n=48), 2, 65) for nu in nus[1:]]
        # nu = 1 > |k| is left out even though it has its own constant
        assert constant == pytest.approx(min(expected))

    def test_guards(self):
        with pytest.raises(InvalidParameter):
            enhanced_rate_constant(PIPE, [1e-3], 0.0)
        with pytest.raises(InvalidParameter):
            enhanced_rate_constant(PIPE, [2.0], 1.0)

    def test_laplacian_consistency(self):
        # Psi of the heat mode matches the first Neumann eigenvalue of the same grid
        grid = build_grid(1.0, 32, 2)
        op = assemble_operator(grid, PIPE, 1.0, 0.0, 2)
        assert pseudo_abscissa(op).psi == pytest.approx(laplacian_eigenvalues(grid, 2)[0], rel=1e-9)
