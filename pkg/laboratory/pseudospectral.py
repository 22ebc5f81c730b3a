# coding: utf-8
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from tqdm.auto import tqdm

from laboratory.exceptions import DecompositionFailure, InvalidMode, InvalidParameter
from laboratory.operators import (
    ModeOperator,
    RadialGrid,
    assemble_operator,
    build_grid,
    gradient_norm,
    region_integral,
    weighted_norm,
)
from laboratory.profiles import DELTA_ZERO, VelocityProfile, covering, covering_constant, neighborhood_sets
from laboratory.semigroup import lambda_rate

logger = logging.getLogger(__name__)

tqdm = partial(tqdm, bar_format="{l_bar:.>40}{bar}{r_bar:.<40}")

PHI_RATIO = 2 / (1 + math.sqrt(5))
LAMBDA_SAMPLES = 129
MIN_LAMBDA_SAMPLES = 33
REFINED_MINIMA = 4


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-8, max_iterations: int = 100):
    """
    Golden-section search for a minimum of a unimodal function on [lo, hi]
    :param f: Function
    :param lo: Lower bound
    :param hi: Upper bound
    :param tol: Width of the final bracket
    :param max_iterations: Maximum number of iterations
    :return: Dictionary with iterations, argmin, minimum and convergence flag
    """
    iteration = 0
    x1, x2 = hi - PHI_RATIO * (hi - lo), lo + PHI_RATIO * (hi - lo)
    f1, f2 = f(x1), f(x2)
    f_lo, f_hi, lo0, hi0 = f(lo), f(hi), lo, hi
    while iteration < max_iterations and abs(hi - lo) > tol:
        if f2 > f1:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - PHI_RATIO * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + PHI_RATIO * (hi - lo)
            f2 = f(x2)
        iteration += 1
    argmin, minimum = (x1, f1) if f1 <= f2 else (x2, f2)
    if f_lo < minimum:
        argmin, minimum = lo0, f_lo
    if f_hi < minimum:
        argmin, minimum = hi0, f_hi
    return dict(
        iterations=iteration,
        argmin=argmin,
        minimum=minimum,
        converged=not (math.isnan(f1) or math.isnan(f2) or iteration == max_iterations),
    )


def _sigma_min(matrix: np.ndarray, shift: complex) -> float:
    try:
        values = scipy.linalg.svdvals(matrix - shift * np.eye(len(matrix)))
    except (np.linalg.LinAlgError, ValueError) as error:
        raise DecompositionFailure(f"Singular value decomposition failed at shift {shift}") from error
    return float(values[-1])


def sigma_min_at(op: ModeOperator, lam: float, matrix: Optional[np.ndarray] = None) -> float:
    """
    Smallest singular value of H - i k lambda in the weighted norm
    :param op: Operator
    :param lam: Real shift
    :param matrix: Symmetrized matrix of the operator (computed when missing)
    :return: sigma_min
    """
    matrix = op.symmetrized() if matrix is None else matrix
    return _sigma_min(matrix, 1j * op.k * lam)


@dataclass(frozen=True)
class SigmaCurve:
    lambdas: np.ndarray
    sigmas: np.ndarray
    refined_min: Tuple[float, float]

    def rows(self):
        return [dict(lam=float(lam), sigma_min=float(sigma)) for lam, sigma in zip(self.lambdas, self.sigmas)]


@dataclass(frozen=True)
class PsaResult:
    psi: float
    argmin: float
    curve: SigmaCurve
    # None when the axial wavenumber vanishes (no enhancement rate)
    c1_effective: Optional[float] = None


def lambda_window(op: ModeOperator, value_range: Optional[Tuple[float, float]] = None) -> Tuple[float, float]:
    low, high = value_range or (float(op.velocity.min()), float(op.velocity.max()))
    margin = (high - low) / 4
    return low - margin, high + margin


def pseudo_abscissa(
    op: ModeOperator,
    grid_count: int = LAMBDA_SAMPLES,
    refine_tol: Optional[float] = None,
    order: Optional[int] = None,
    value_range: Optional[Tuple[float, float]] = None,
    progress: bool = False,
) -> PsaResult:
    """
    Pseudospectral abscissa Psi(H) = min over real lambda of sigma_min(H - i k lambda)
    :param op: Operator
    :param grid_count: Number of lambda samples
    :param refine_tol: Width of the refined lambda bracket (default: 1e-6 |k| range(v))
    :param order: Nondegeneracy order m of the profile (to report c1_effective)
    :param value_range: Range of the profile (default: range of the nodal velocities)
    :param progress: Show a progress bar
    :return: Result
    """
    if grid_count < MIN_LAMBDA_SAMPLES:
        raise InvalidParameter(f"At least {MIN_LAMBDA_SAMPLES} lambda samples are required: {grid_count}")
    if refine_tol is not None and not refine_tol > 0:
        raise InvalidParameter(f"Refinement tolerance must be positive: {refine_tol}")
    matrix = op.symmetrized()
    low, high = lambda_window(op, value_range)
    if op.k == 0 or high == low:
        # No dependence on lambda
        sigma = _sigma_min(matrix, 0.0)
        lambdas = np.linspace(low - 1.0, high + 1.0, grid_count) if high == low else np.linspace(low, high, grid_count)
        curve = SigmaCurve(lambdas, np.full(grid_count, sigma), (float(lambdas[grid_count // 2]), sigma))
        return PsaResult(psi=sigma, argmin=curve.refined_min[0], curve=curve)

    refine_tol = refine_tol or 1e-6 * abs(op.k) * (high - low) / 1.5
    lambdas = np.linspace(low, high, grid_count)
    samples = tqdm(lambdas, desc="Lambda scan", leave=False) if progress else lambdas
    sigmas = np.array([_sigma_min(matrix, 1j * op.k * lam) for lam in samples])

    # Local minima of the sampled curve, the lowest ones are refined
    interior = np.arange(1, grid_count - 1)
    minima = interior[(sigmas[interior] <= sigmas[interior - 1]) & (sigmas[interior] <= sigmas[interior + 1])]
    candidates = sorted(minima, key=lambda i: sigmas[i])[:REFINED_MINIMA] or [int(np.argmin(sigmas))]
    best_index = int(np.argmin(sigmas))
    best = (float(lambdas[best_index]), float(sigmas[best_index]))
    for index in candidates:
        lo, hi = lambdas[max(index - 1, 0)], lambdas[min(index + 1, grid_count - 1)]
        result = golden_section(lambda lam: _sigma_min(matrix, 1j * op.k * lam), lo, hi, tol=refine_tol)
        if not result["converged"]:
            logger.warning(f"Golden-section refinement around lambda={lambdas[index]:g} did not converge")
        if result["minimum"] < best[1]:
            best = (float(result["argmin"]), float(result["minimum"]))
    curve = SigmaCurve(lambdas, sigmas, best)
    c1_effective = best[1] / lambda_rate(op.nu, op.k, order) if order else None
    logger.debug(f"Psi={best[1]:g} at lambda={best[0]:g} (nu={op.nu:g}, k={op.k:g}, ell={op.ell})")
    return PsaResult(psi=best[1], argmin=best[0], curve=curve, c1_effective=c1_effective)


def resolvent_lower_bound(op: ModeOperator, m: int, grid_count: int = LAMBDA_SAMPLES) -> float:
    """
    Effective constant c1 in sigma_min(H - i k lambda) >= c1 Lambda(nu, k)
    """
    if op.k == 0:
        raise InvalidMode("The enhancement rate is undefined for k=0")
    return pseudo_abscissa(op, grid_count=grid_count, order=m).c1_effective


@dataclass(frozen=True)
class AuditResult:
    lhs: float
    rhs: float
    residual: float
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.residual >= -1e-8 * max(1.0, abs(self.rhs))


def multiplier(profile: VelocityProfile, near, lam: float, delta: float, r) -> np.ndarray:
    """
    Smooth sign-like multiplier phi(sign(v - lambda) dist(r, E) / delta^m), equal to -1 or 1 far from E
    """
    r = np.asarray(r, dtype=float)
    thickness = delta**profile.order
    distance = np.full(r.shape, np.inf)
    for lo, hi in near:
        distance = np.minimum(distance, np.maximum(0.0, np.maximum(lo - r, r - hi)))
    argument = np.clip(np.sign(profile(r) - lam) * distance / thickness, -1.0, 1.0)
    return np.sin(np.pi / 2 * argument)


def _prepare(op: ModeOperator, g, lam: float):
    g = op.grid.check(g)
    norm = weighted_norm(g, op.grid)
    residual = weighted_norm(op.apply(g, lam), op.grid)
    return g, norm, residual


def verify_away_bound(op: ModeOperator, profile: VelocityProfile, lam: float, delta: float, g) -> AuditResult:
    """
    Mass of g away from the level set:
    int_{[0,R] minus E~} |g|^2 <= 1/4 |g|^2 + (1/(|k| delta^m) + nu/(k^2 delta^(2m+2))) |H_lambda g| |g|
    """
    if op.k == 0:
        raise InvalidMode("The away-from-level-set bound needs k != 0")
    g, norm, residual = _prepare(op, g, lam)
    m = profile.order
    near, inflated = neighborhood_sets(profile, lam, delta)
    if norm == 0:
        return AuditResult(0.0, 0.0, 0.0, dict(measure_inflated=inflated.measure))
    lhs = max(0.0, norm**2 - region_integral(op.grid, g, inflated))
    factor = 1 / (abs(op.k) * delta**m) + op.nu / (op.k**2 * delta ** (2 * m + 2))
    rhs = norm**2 / 4 + factor * residual * norm
    chi = multiplier(profile, near, lam, delta, op.grid.nodes)
    weights = op.grid.quad_weights
    diagnostics = dict(
        measure_inflated=inflated.measure,
        advective=float(op.k * np.sum((op.velocity - lam) * chi * np.abs(g) ** 2 * weights)),
        pairing=float(np.imag(np.sum(np.conj(chi * g) * op.apply(g, lam) * weights))),
        factor=factor,
    )
    return AuditResult(lhs, rhs, rhs - lhs, diagnostics)


def verify_near_bound(
    op: ModeOperator,
    profile: VelocityProfile,
    lam: float,
    delta: float,
    g,
    c0: Optional[float] = None,
    delta_zero: float = DELTA_ZERO,
) -> AuditResult:
    """
    Mass of g near the level set: int_{E~} |g|^2 <= 1/2 |g|^2 + (C delta^2 / nu) |H_lambda g| |g| with C = 2 C0^2
    :param c0: Covering constant (default: total cover length over delta at this level)
    """
    g, norm, residual = _prepare(op, g, lam)
    _, inflated = neighborhood_sets(profile, lam, delta)
    if c0 is None:
        c0 = covering(profile, lam, delta, delta_zero=delta_zero).constant
    c_tilde = 2 * c0**2
    if norm == 0:
        return AuditResult(0.0, 0.0, 0.0, dict(c_tilde=c_tilde))
    lhs = region_integral(op.grid, g, inflated) if inflated else 0.0
    rhs = norm**2 / 2 + c_tilde * delta**2 / op.nu * residual * norm
    diagnostics = dict(
        c_tilde=c_tilde,
        measure_inflated=inflated.measure,
        gradient=gradient_norm(op.grid, g, op.ell),
    )
    return AuditResult(lhs, rhs, rhs - lhs, diagnostics)


def poincare_check(grid: RadialGrid, g, r1: float, r2: float, ell: Optional[int] = None) -> Tuple[float, float]:
    """
    Both sides of int_{r1 <= r <= r2} |g|^2 <= 2 (r2 - r1) |g| |grad g|
    Constants violate the inequality on the whole disc, callers only assert it for functions vanishing in [r1, r2].
    """
    if not 0 <= r1 <= r2 <= grid.radius:
        raise InvalidParameter(f"Invalid radii: 0 <= {r1} <= {r2} <= {grid.radius} expected")
    ell = (0 if grid.even else 1) if ell is None else ell
    g = grid.check(g)
    lhs = region_integral(grid, g, [(r1, r2)])
    rhs = 2 * (r2 - r1) * weighted_norm(g, grid) * gradient_norm(grid, g, ell)
    return lhs, rhs


def split_bound(
    op: ModeOperator,
    profile: VelocityProfile,
    lam: float,
    delta: float,
    g,
    c0: Optional[float] = None,
    delta_zero: float = DELTA_ZERO,
) -> AuditResult:
    """
    Sum of both localized bounds: |g|^2 <= 4 (1/(|k| delta^m) + nu/(k^2 delta^(2m+2)) + C delta^2/nu) |H_lambda g| |g|
    """
    away = verify_away_bound(op, profile, lam, delta, g)
    near = verify_near_bound(op, profile, lam, delta, g, c0=c0, delta_zero=delta_zero)
    g, norm, residual = _prepare(op, g, lam)
    factor = away.diagnostics.get("factor", 0.0) + near.diagnostics["c_tilde"] * delta**2 / op.nu
    lhs, rhs = norm**2, 4 * factor * residual * norm
    return AuditResult(lhs, rhs, rhs - lhs, dict(away=away.residual, near=near.residual, factor=factor))


def optimal_delta(nu: float, k: float, m: int, delta_tilde: float = 1.0) -> float:
    """
    Thickness balancing the localized bounds: delta_tilde (nu/|k|)^(1/(m+2)) if nu <= |k|, delta_tilde otherwise
    """
    if k == 0:
        raise InvalidMode("The thickness is undefined for k=0")
    if nu <= abs(k):
        return delta_tilde * (nu / abs(k)) ** (1 / (m + 2))
    return delta_tilde


def proof_constant(m: int, c_tilde: float) -> Tuple[float, float]:
    """
    Minimize 4 (d^-m + d^-(2m+2) + C d^2) over d, so that |g|^2 <= constant |H_lambda g| |g| / Lambda
    :return: Constant and minimizing delta_tilde
    """

    def objective(log_delta):
        delta = math.exp(log_delta)
        return 4 * (delta**-m + delta ** -(2 * m + 2) + c_tilde * delta**2)

    result = golden_section(objective, math.log(1e-3), math.log(1e3), tol=1e-10)
    return result["minimum"], math.exp(result["argmin"])


def proof_rate_constant(
    profile: VelocityProfile,
    lambdas: Sequence[float],
    deltas: Sequence[float],
    delta_zero: float = DELTA_ZERO,
) -> Tuple[float, float, float]:
    """
    Rate constant guaranteed by the localized bounds: sigma_min(H - i k lambda) >= c1 Lambda(nu, k)
    :param lambdas: Levels used to estimate the covering constant
    :param deltas: Thickness parameters used to estimate the covering constant
    :return: Constant c1, minimizing delta_tilde and covering constant C0
    """
    c0, _ = covering_constant(profile, lambdas, deltas, delta_zero=delta_zero)
    if not c0 > 0:
        raise InvalidParameter(f"Covering constant must be positive: {c0}")
    constant, delta_tilde = proof_constant(profile.order, 2 * c0**2)
    logger.debug(f"Proof constant {1 / constant:.6g} with C0={c0:.6g}, delta_tilde={delta_tilde:.6g}")
    return 1 / constant, delta_tilde, c0


def enhanced_rate_constant(
    profile: VelocityProfile,
    nu_list: Sequence[float],
    k: float,
    ell: int = 0,
    grid_size: int = 128,
    grid_count: int = LAMBDA_SAMPLES,
    c1: Optional[float] = None,
) -> float:
    """
    Smallest effective constant c1 of the profile over the diffusivities of the enhanced regime nu <= |k|
    :param c1: Explicit constant returned as is
    :return: Constant c1
    """
    if c1 is not None:
        return c1
    nus = [nu for nu in nu_list if nu <= abs(k)]
    if not k or not nus:
        raise InvalidParameter("Constant c1 needs k != 0 and at least one nu <= |k|, or an explicit c1")
    grid = build_grid(profile.radius, grid_size, ell)
    constants = [
        resolvent_lower_bound(assemble_operator(grid, profile, nu, k, ell), profile.order, grid_count)
        for nu in tqdm(nus, desc="Constant c1")
    ]
    logger.info(f"Effective c1 between {min(constants):.6g} and {max(constants):.6g}")
    return min(constants)
