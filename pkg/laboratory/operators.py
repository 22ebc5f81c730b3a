# coding: utf-8
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.integrate
import scipy.io
import scipy.linalg
import scipy.sparse
from scipy.special import jnp_zeros, roots_jacobi

from laboratory.exceptions import InvalidParameter, InvalidSize, SizeMismatch
from laboratory.profiles import VelocityProfile

logger = logging.getLogger(__name__)

MIN_GRID_SIZE = 8


@lru_cache(maxsize=32)
def radau_rule(n: int, beta: int):
    """
    Gauss-Radau rule on [-1, 1] for the weight (1 + x)^beta with the node x = 1 fixed
    :param n: Number of nodes
    :param beta: Exponent of the weight (0 or 1)
    :return: Increasing nodes and positive weights
    """
    # Interior nodes are Gauss nodes for the weight (1 - x)(1 + x)^beta
    interior, gauss_weights = roots_jacobi(n - 1, 1.0, float(beta))
    weights = gauss_weights / (1.0 - interior)
    nodes = np.append(interior, 1.0)
    # Total mass of (1 + x)^beta on [-1, 1] is 2 for beta in {0, 1}
    weights = np.append(weights, 2.0 - weights.sum())
    return nodes, weights


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """
    Barycentric weights 1 / prod(x_j - x_k), rescaled to avoid overflow
    """
    differences = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(differences, 1.0)
    logs = -np.sum(np.log(np.abs(differences)), axis=1)
    signs = np.prod(np.sign(differences), axis=1)
    return signs * np.exp(logs - logs.max())


def differentiation_matrix(nodes: np.ndarray) -> np.ndarray:
    """
    First derivative matrix of the polynomial interpolant on the given nodes
    """
    weights = barycentric_weights(nodes)
    differences = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(differences, 1.0)
    matrix = (weights[None, :] / weights[:, None]) / differences
    np.fill_diagonal(matrix, 0.0)
    # Rows annihilate constants
    np.fill_diagonal(matrix, -matrix.sum(axis=1))
    return matrix


def barycentric_evaluate(nodes: np.ndarray, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """
    Evaluate the polynomial interpolant of (nodes, values) at arbitrary points
    """
    weights = barycentric_weights(nodes)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    differences = points[:, None] - nodes[None, :]
    exact = differences == 0
    differences[exact] = 1.0
    kernel = weights[None, :] / differences
    result = (kernel @ values) / kernel.sum(axis=1)
    rows, columns = np.nonzero(exact)
    result[rows] = values[columns]
    return result


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """
    Quadrature grid on (0, R] for the measure r dr

    Even grids (angular wavenumber 0) carry polynomials in s = r^2 on Legendre-Radau nodes in s,
    odd grids carry functions r * q(r) with q polynomial on Jacobi-Radau nodes for the weight r.
    """

    nodes: np.ndarray
    quad_weights: np.ndarray
    size: int
    radius: float
    even: bool
    # Nodes of the interpolation variable (s = r^2 for even grids, r otherwise)
    variable: np.ndarray
    derivative: np.ndarray

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.quad_weights)

    def check(self, g) -> np.ndarray:
        g = np.asarray(g)
        if g.shape[-1] != self.size:
            raise SizeMismatch(f"Vector of size {g.shape[-1]} does not match grid of size {self.size}")
        return g


def build_grid(radius: float, n: int, ell: int = 0) -> RadialGrid:
    """
    Build the radial quadrature grid
    :param radius: Radius R of the domain
    :param n: Number of nodes
    :param ell: Angular wavenumber (selects the regularity treatment at the origin)
    :return: Grid
    """
    if n < MIN_GRID_SIZE:
        raise InvalidSize(f"Grid size must be at least {MIN_GRID_SIZE}: {n}")
    if not radius > 0:
        raise InvalidParameter(f"Radius must be positive: {radius}")
    even = int(ell) == 0
    x, omega = radau_rule(n, 0 if even else 1)
    unit = (1.0 + x) / 2.0
    if even:
        # s = R^2 (1 + x) / 2 and r dr = ds / 2
        nodes = radius * np.sqrt(unit)
        variable = radius**2 * unit
        derivative = differentiation_matrix(x) * (2.0 / radius**2)
    else:
        # r = R (1 + x) / 2 and r dr = (R / 2)^2 (1 + x) dx
        nodes = radius * unit
        variable = nodes
        derivative = differentiation_matrix(x) * (2.0 / radius)
    weights = (radius**2 / 4.0) * omega
    logger.debug(f"Radial grid: R={radius}, n={n}, {'even' if even else 'odd'}")
    return RadialGrid(
        nodes=nodes,
        quad_weights=weights,
        size=n,
        radius=float(radius),
        even=even,
        variable=variable,
        derivative=derivative,
    )


def _check_parity(grid: RadialGrid, ell: int):
    if (int(ell) == 0) != grid.even:
        raise InvalidParameter(f"Grid built for {'ell=0' if grid.even else 'ell!=0'} cannot carry ell={ell}")


def stiffness_matrix(grid: RadialGrid, ell: int) -> np.ndarray:
    """
    Symmetric positive semidefinite matrix A with g* A g = |grad g|^2 (per mode, r dr measure)
    """
    _check_parity(grid, ell)
    D, w, r = grid.derivative, grid.quad_weights, grid.nodes
    if grid.even:
        # |g_r|^2 r dr = 2 s |g_s|^2 ds and the s-weights are twice the r dr weights
        stiffness = 4.0 * D.T @ ((w * grid.variable)[:, None] * D)
    else:
        # g = r q: energy (l^2 - 1) int r|q|^2 + R^2 |q(R)|^2 + int r^3 |q'|^2
        stiffness = D.T @ ((w * r**2)[:, None] * D) + (ell**2 - 1) * np.diag(w)
        stiffness[-1, -1] += grid.radius**2
        stiffness = stiffness / r[:, None] / r[None, :]
    return (stiffness + stiffness.T) / 2


def assemble_laplacian(grid: RadialGrid, ell: int) -> np.ndarray:
    """
    Discrete (1/r) d/dr (r d/dr) - l^2/r^2 with Neumann condition at r = R
    """
    return -stiffness_matrix(grid, ell) / grid.quad_weights[:, None]


@dataclass(frozen=True, eq=False)
class ModeOperator:
    """
    H = -nu Laplacian + i k v(r) restricted to the Fourier mode (k, ell)
    """

    matrix: np.ndarray
    nu: float
    k: float
    ell: int
    grid: RadialGrid
    laplacian: np.ndarray
    stiffness: np.ndarray
    velocity: np.ndarray

    @property
    def size(self) -> int:
        return self.grid.size

    def symmetrized(self) -> np.ndarray:
        """
        M = W^(1/2) H W^(-1/2), the operator in coordinates where the weighted norm is Euclidean
        """
        root = self.grid.sqrt_weights
        matrix = self.nu * self.stiffness / root[:, None] / root[None, :]
        matrix = (matrix + matrix.T) / 2
        return matrix + 1j * self.k * np.diag(self.velocity)

    def to_euclidean(self, g) -> np.ndarray:
        return self.grid.sqrt_weights * self.grid.check(g)

    def from_euclidean(self, h) -> np.ndarray:
        return np.asarray(h) / self.grid.sqrt_weights

    def apply(self, g, lam: float = 0.0) -> np.ndarray:
        """
        H_lambda g = (H - i k lambda) g
        """
        g = self.grid.check(g)
        return self.matrix @ g - 1j * self.k * lam * g

    def gradient_norm(self, g) -> float:
        return gradient_norm(self.grid, g, self.ell)


def assemble_operator(grid: RadialGrid, profile: VelocityProfile, nu: float, k: float, ell: int) -> ModeOperator:
    """
    Assemble the mode operator
    :param grid: Radial grid
    :param profile: Velocity profile
    :param nu: Diffusivity (positive)
    :param k: Axial wavenumber
    :param ell: Angular wavenumber
    :return: Operator
    """
    if not nu > 0:
        raise InvalidParameter(f"Diffusivity must be positive: {nu}")
    if abs(grid.radius - profile.radius) > 1e-12 * profile.radius:
        raise InvalidParameter(f"Grid radius {grid.radius} differs from profile radius {profile.radius}")
    stiffness = stiffness_matrix(grid, ell)
    laplacian = -stiffness / grid.quad_weights[:, None]
    velocity = np.asarray(profile(grid.nodes), dtype=float)
    matrix = -nu * laplacian + 1j * k * np.diag(velocity)
    return ModeOperator(
        matrix=matrix,
        nu=float(nu),
        k=float(k),
        ell=int(ell),
        grid=grid,
        laplacian=laplacian,
        stiffness=stiffness,
        velocity=velocity,
    )


def weighted_inner(g1, g2, grid: RadialGrid) -> complex:
    """
    Per-mode pairing sum conj(g1) g2 w, approximating the integral of conj(g1) g2 r dr (no 2 pi factor)
    """
    g1, g2 = grid.check(g1), grid.check(g2)
    return complex(np.sum(np.conj(g1) * g2 * grid.quad_weights))


def weighted_norm(g, grid: RadialGrid) -> float:
    return float(np.sqrt(abs(weighted_inner(g, g, grid))))


def gradient_norm(grid: RadialGrid, g, ell: int) -> float:
    g = grid.check(g)
    energy = np.real(np.conj(g) @ stiffness_matrix(grid, ell) @ g)
    return float(np.sqrt(max(energy, 0.0)))


def interpolate(grid: RadialGrid, g, r) -> np.ndarray:
    """
    Evaluate the discrete function g between the nodes
    :param grid: Grid
    :param g: Nodal values
    :param r: Radii in [0, R]
    :return: Values at r
    """
    g = grid.check(g)
    r = np.asarray(r, dtype=float)
    if grid.even:
        return barycentric_evaluate(grid.variable, g, r**2)
    return r * barycentric_evaluate(grid.nodes, g / grid.nodes, r)


def random_smooth(grid: RadialGrid, count: int, rng: Optional[np.random.Generator] = None, degree: int = 6):
    """
    Smooth random complex functions with unit weighted norm
    :param grid: Grid
    :param count: Number of functions
    :param rng: Random generator
    :param degree: Number of polynomial terms
    :return: Array of shape (count, n)
    """
    rng = rng or np.random.default_rng(0)
    scales = 1.0 / (1.0 + np.arange(degree))
    coefficients = (rng.standard_normal((count, degree)) + 1j * rng.standard_normal((count, degree))) * scales
    unit = grid.nodes / grid.radius
    if grid.even:
        basis = unit[None, :] ** (2 * np.arange(degree))[:, None]
    else:
        basis = unit[None, :] ** (1 + np.arange(degree))[:, None]
    samples = coefficients @ basis
    norms = np.sqrt(np.sum(np.abs(samples) ** 2 * grid.quad_weights, axis=1))
    return samples / norms[:, None]


def bessel_reference(ell: int, count: int, radius: float = 1.0) -> np.ndarray:
    """
    Neumann eigenvalues of the radial Laplacian, squared zeros of J'_ell over R^2 (the zero root first for ell=0)
    """
    ell = abs(int(ell))
    if ell == 0:
        roots = np.append(0.0, jnp_zeros(0, count - 1)) if count > 1 else np.zeros(1)
    else:
        roots = jnp_zeros(ell, count)
    return (roots / radius) ** 2


def laplacian_eigenvalues(grid: RadialGrid, ell: int) -> np.ndarray:
    """
    Eigenvalues of -Laplacian in increasing order (generalized symmetric problem A x = mu W x)
    """
    return scipy.linalg.eigh(stiffness_matrix(grid, ell), np.diag(grid.quad_weights), eigvals_only=True)


def export(op: ModeOperator, path: str, symmetrized: bool = False):
    """
    Write the operator as a matrix-market coordinate file (row, col, re, im)
    """
    matrix = op.symmetrized() if symmetrized else op.matrix
    comment = f" nu={op.nu:g} k={op.k:g} ell={op.ell} n={op.size} R={op.grid.radius:g}"
    scipy.io.mmwrite(path, scipy.sparse.coo_matrix(matrix), comment=comment, field="complex")
    logger.info(f"Operator written to {path}")


def region_integral(grid: RadialGrid, g, intervals, points: Optional[int] = None) -> float:
    """
    Integral of |g|^2 r dr over a union of sub-intervals of [0, R]
    :param grid: Grid
    :param g: Nodal values
    :param intervals: Iterable of (lo, hi) pairs
    :param points: Gauss-Legendre points per interval (default: twice the grid size)
    :return: Integral value
    """
    g = grid.check(g)
    points = points or 2 * grid.size

    def density(r):
        return np.abs(interpolate(grid, g, r)) ** 2 * r

    total = 0.0
    for lo, hi in intervals:
        if hi > lo:
            value, _ = scipy.integrate.fixed_quad(density, lo, hi, n=points)
            total += float(value)
    return total
