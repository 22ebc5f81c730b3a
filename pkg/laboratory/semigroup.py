# coding: utf-8
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.stats import linregress
from tqdm.auto import tqdm

from laboratory.exceptions import InvalidMode, InvalidParameter, NonConvergence, WindowTooSmall
from laboratory.operators import ModeOperator, RadialGrid, assemble_operator, build_grid, laplacian_eigenvalues
from laboratory.profiles import VelocityProfile

logger = logging.getLogger(__name__)

tqdm = partial(tqdm, bar_format="{l_bar:.>40}{bar}{r_bar:.<40}")

FIT_WINDOW = (1e-6, 1e-2)
MIN_FIT_SAMPLES = 10
MIN_SWEEP_ROWS = 4
MIN_SWEEP_DECADES = 2.0
TIME_SAMPLES = 600
RANDOM_SAMPLES = 20
# Propagation methods must agree to this fraction of the initial norm
CROSS_CHECK_TOLERANCE = 1e-5
# Crank-Nicolson substeps satisfy h |M| <= SUBSTEP_BOUND
SUBSTEP_BOUND = 1e-2


def lambda_rate(nu: float, k: float, m: int) -> float:
    """
    Enhanced dissipation rate: nu^(m/(m+2)) |k|^(2/(m+2)) if nu <= |k|, k^2/nu otherwise
    :param nu: Diffusivity
    :param k: Axial wavenumber
    :param m: Nondegeneracy order
    :return: Rate
    """
    if k == 0:
        raise InvalidMode("The enhancement rate is undefined for k=0")
    if not nu > 0 or m < 1:
        raise InvalidParameter(f"Rate needs nu > 0 and m >= 1: nu={nu}, m={m}")
    if nu <= abs(k):
        return nu ** (m / (m + 2)) * abs(k) ** (2 / (m + 2))
    return k**2 / nu


@dataclass(frozen=True)
class DecayTrace:
    times: np.ndarray
    norms: np.ndarray
    fit_rate: float = math.nan
    fit_prefactor: float = math.nan
    fit_residual: float = math.nan
    window: Tuple[float, float] = (math.nan, math.nan)
    # State at the last time (weighted coordinates of the grid), absent for operator norm traces
    final: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def rows(self):
        return [dict(t=float(t), norm=float(norm)) for t, norm in zip(self.times, self.norms)]


def _check_times(t_grid) -> np.ndarray:
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or len(times) < 2 or times[0] != 0 or np.any(np.diff(times) <= 0):
        raise InvalidParameter("Time grid must be increasing and start at 0")
    return times


def _step_key(dt: float) -> float:
    return float(f"{dt:.12e}")


def _exponential_step(matrix: np.ndarray, dt: float) -> np.ndarray:
    return scipy.linalg.expm(-dt * matrix)


def _crank_nicolson_step(matrix: np.ndarray, dt: float) -> np.ndarray:
    """
    Crank-Nicolson map over dt: 2^q substeps with h |M| <= SUBSTEP_BOUND share one LU factorization,
    the substep map is raised to the power 2^q by repeated squaring
    """
    bound = max(np.linalg.norm(matrix, 1), np.linalg.norm(matrix, np.inf))
    halvings = max(0, math.ceil(math.log2(dt * bound / SUBSTEP_BOUND))) if bound > 0 else 0
    h = dt / 2**halvings
    identity = np.eye(len(matrix))
    factor = scipy.linalg.lu_factor(identity + h / 2 * matrix)
    step = scipy.linalg.lu_solve(factor, identity - h / 2 * matrix)
    for _ in range(halvings):
        step = step @ step
    return step


def _evolve(matrix: np.ndarray, states: np.ndarray, times: np.ndarray, step=_exponential_step):
    """
    Steps of d/dt h = -M h for the rows of states, yielded at every time
    :param step: One-step map for a given dt (exact exponential by default)
    """
    steps: Dict[float, np.ndarray] = {}
    current = states.astype(complex)
    yield current
    for dt in np.diff(times):
        key = _step_key(dt)
        if key not in steps:
            steps[key] = step(matrix, key)
        current = current @ steps[key].T
        yield current
    logger.debug(f"Propagation with {len(steps)} distinct step(s) by {step.__name__.strip('_')}")


def propagate_many(
    op: ModeOperator,
    initial,
    t_grid,
    include_axial: bool = False,
) -> List[DecayTrace]:
    """
    Norms of e^(-tH) g0 for several initial data sharing the step exponentials
    :param op: Operator
    :param initial: Array (count, n) of initial data
    :param t_grid: Increasing times starting at 0
    :param include_axial: Multiply the norms by e^(-nu k^2 t)
    :return: One trace per initial datum
    """
    times = _check_times(t_grid)
    initial = np.atleast_2d(op.grid.check(initial))
    states = initial * op.grid.sqrt_weights
    if np.any(np.linalg.norm(states, axis=1) == 0):
        raise InvalidParameter("Initial data must be nonzero")
    norms, current = [], states
    for current in _evolve(op.symmetrized(), states, times):
        norms.append(np.linalg.norm(current, axis=1))
    norms = np.array(norms)
    if include_axial:
        norms = norms * np.exp(-op.nu * op.k**2 * times)[:, None]
    return [
        DecayTrace(times=times, norms=norms[:, index], final=op.from_euclidean(current[index]))
        for index in range(len(initial))
    ]


def propagate(op: ModeOperator, g0, t_grid, include_axial: bool = False, cross_check: bool = True) -> DecayTrace:
    """
    Norms of e^(-tH) g0 by exact exponential steps, cross-checked against Crank-Nicolson stepping
    :param op: Operator
    :param g0: Initial datum
    :param t_grid: Increasing times starting at 0
    :param include_axial: Multiply the norms by e^(-nu k^2 t)
    :param cross_check: Compare with Crank-Nicolson stepping
    :return: Trace
    """
    (trace,) = propagate_many(op, [g0], t_grid, include_axial=include_axial)
    if cross_check:
        state = op.to_euclidean(g0).astype(complex)[None, :]
        evolution = _evolve(op.symmetrized(), state, trace.times, step=_crank_nicolson_step)
        reference = np.array([np.linalg.norm(current) for current in evolution])
        if include_axial:
            reference = reference * np.exp(-op.nu * op.k**2 * trace.times)
        disagreement = float(np.max(np.abs(reference - trace.norms)) / trace.norms[0])
        if disagreement > CROSS_CHECK_TOLERANCE:
            raise NonConvergence(f"Propagation methods disagree by {disagreement:.2e}")
        logger.debug(f"Crank-Nicolson cross-check agreement {disagreement:.2e}")
    return trace


def operator_norm_trace(op: ModeOperator, t_grid) -> DecayTrace:
    """
    Weighted operator norm of e^(-tH) (worst case over all initial data)
    """
    times = _check_times(t_grid)
    evolution = _evolve(op.symmetrized(), np.eye(op.size, dtype=complex), times)
    norms = np.array([scipy.linalg.norm(state, 2) for state in evolution])
    return DecayTrace(times=times, norms=norms)


def _fit_mask(trace: DecayTrace, drop_fraction: Optional[float], window: Sequence[float]) -> np.ndarray:
    norms = np.asarray(trace.norms)
    positive = norms > 0
    ratio = np.where(positive, norms / norms[0], 0.0)
    if drop_fraction is not None:
        decades = -np.log10(np.where(positive, ratio, 1.0))
        return positive & (decades >= drop_fraction * decades.max())
    return positive & (ratio >= window[0]) & (ratio <= window[1])


def fit_decay(
    trace: DecayTrace,
    drop_fraction: Optional[float] = None,
    window: Sequence[float] = FIT_WINDOW,
    min_samples: int = MIN_FIT_SAMPLES,
) -> Tuple[float, float, float]:
    """
    Least-squares fit of log(norm) = log(C) - rate t on a window of the trace
    :param trace: Trace
    :param drop_fraction: Discard samples whose decay (in decades) is below this fraction of the total decay
    :param window: Relative norm window used when no drop fraction is given
    :param min_samples: Minimum number of samples in the window
    :return: Rate, prefactor C and maximal relative deviation of the fit
    """
    times, norms = np.asarray(trace.times), np.asarray(trace.norms)
    mask = _fit_mask(trace, drop_fraction, window)
    if np.count_nonzero(mask) < min_samples:
        raise WindowTooSmall(f"Only {np.count_nonzero(mask)} sample(s) in the fit window, {min_samples} required")
    result = linregress(times[mask], np.log(norms[mask]))
    rate, prefactor = -float(result.slope), math.exp(result.intercept)
    fitted = prefactor * np.exp(-rate * times[mask])
    residual = float(np.max(np.abs(fitted - norms[mask]) / norms[mask]))
    return rate, prefactor, residual


def with_fit(
    trace: DecayTrace,
    drop_fraction: Optional[float] = None,
    window: Sequence[float] = FIT_WINDOW,
) -> DecayTrace:
    """
    Copy of the trace carrying its fitted rate, prefactor, residual and window
    """
    rate, prefactor, residual = fit_decay(trace, drop_fraction=drop_fraction, window=window)
    inside = np.asarray(trace.times)[_fit_mask(trace, drop_fraction, window)]
    return replace(
        trace,
        fit_rate=rate,
        fit_prefactor=prefactor,
        fit_residual=residual,
        window=(float(inside[0]), float(inside[-1])),
    )


def decay_grid(psi: float, samples: int = TIME_SAMPLES, floor: float = 1e-7) -> np.ndarray:
    """
    Time grid long enough for every norm to fall below floor according to |e^(-tH)| <= e^(-t Psi + pi/2)
    """
    if not psi > 0:
        raise InvalidParameter(f"Pseudospectral abscissa must be positive: {psi}")
    horizon = (math.pi / 2 + math.log(1 / floor)) / psi
    return np.linspace(0.0, horizon, samples)


def random_data(size: int, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((count, size)) + 1j * rng.standard_normal((count, size))


def slowest_decay(
    op: ModeOperator,
    t_grid,
    count: int = RANDOM_SAMPLES,
    seed: int = 0,
    window: Sequence[float] = FIT_WINDOW,
    include_axial: bool = False,
) -> Tuple[DecayTrace, List[float]]:
    """
    Fit the decay of random complex initial data and keep the slowest one
    :return: Slowest fitted trace and every fitted rate
    """
    traces = propagate_many(op, random_data(op.size, count, seed), t_grid, include_axial=include_axial)
    fitted = [with_fit(trace, window=window) for trace in traces]
    slowest = min(fitted, key=lambda trace: trace.fit_rate)
    return slowest, [trace.fit_rate for trace in fitted]


def wei_bound_check(trace: DecayTrace, psi: float) -> float:
    """
    Largest excess of |g(t)| / |g(0)| over e^(-t Psi + pi/2) (nonpositive when the bound holds)
    """
    ratio = np.asarray(trace.norms) / trace.norms[0]
    return float(np.max(ratio - np.exp(-np.asarray(trace.times) * psi + math.pi / 2)))


@dataclass(frozen=True)
class SweepRow:
    nu: float
    k: float
    ell: int
    m: int
    Lambda: float
    rate: float
    c_effective: float
    psi: float


@dataclass(frozen=True)
class SweepReport:
    rows: List[SweepRow]
    exponent_alpha: float
    alpha_stderr: float
    mode: str = "pipe"

    def as_rows(self):
        return [dict(asdict(row), alpha=self.exponent_alpha) for row in self.rows]


def sweep_row(
    profile: VelocityProfile,
    nu: float,
    k: float,
    ell: int,
    grid_size: int = 128,
    lambda_samples: int = 129,
    time_samples: int = TIME_SAMPLES,
    random_samples: int = RANDOM_SAMPLES,
    seed: int = 0,
    window: Sequence[float] = FIT_WINDOW,
) -> SweepRow:
    """
    Fitted worst-case decay rate of a single mode
    """
    from laboratory.pseudospectral import pseudo_abscissa

    grid = build_grid(profile.radius, grid_size, ell)
    op = assemble_operator(grid, profile, nu, k, ell)
    psa = pseudo_abscissa(op, grid_count=lambda_samples, value_range=profile.value_range())
    t_grid = decay_grid(psa.psi, time_samples)
    slowest, _ = slowest_decay(op, t_grid, count=random_samples, seed=seed, window=window)
    rate = lambda_rate(nu, k, profile.order)
    logger.info(f"nu={nu:g}, k={k:g}, ell={ell}: rate={slowest.fit_rate:g}, Psi={psa.psi:g}, Lambda={rate:g}")
    return SweepRow(
        nu=float(nu),
        k=float(k),
        ell=int(ell),
        m=profile.order,
        Lambda=rate,
        rate=slowest.fit_rate,
        c_effective=slowest.fit_rate / rate,
        psi=psa.psi,
    )


def exponent_fit(rows: Sequence[SweepRow]) -> Tuple[float, float]:
    """
    Slope of log(rate) against log(nu)
    """
    if len(rows) < MIN_SWEEP_ROWS:
        raise WindowTooSmall(f"Exponent regression needs at least {MIN_SWEEP_ROWS} rows: {len(rows)}")
    result = linregress(np.log([row.nu for row in rows]), np.log([row.rate for row in rows]))
    return float(result.slope), float(result.stderr)


def _dispatch(parameters: List[dict], jobs: int = 1, use_celery: bool = False) -> List[SweepRow]:
    if use_celery:
        from celery import group

        from dissipationlab.celery import app  # noqa: F401
        from laboratory.tasks import sweep_row as sweep_task

        results = group(sweep_task.s(**params) for params in parameters).apply_async()
        return [SweepRow(**row) for row in results.get()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(sweep_row, **params) for params in parameters]
            return [future.result() for future in tqdm(futures, desc="Sweep")]
    return [sweep_row(**params) for params in tqdm(parameters, desc="Sweep")]


def scaling_sweep(
    profile: VelocityProfile,
    k: float,
    ell: int,
    nu_list: Sequence[float],
    mode: str = "pipe",
    jobs: int = 1,
    use_celery: bool = False,
    **options,
) -> SweepReport:
    """
    Fitted decay rates over a range of diffusivities and the exponent of rate against nu
    :param profile: Profile
    :param k: Axial wavenumber (the angular wavenumber in disc mode)
    :param ell: Angular wavenumber (ignored in disc mode)
    :param nu_list: Diffusivities (at least 4, spanning 2 decades, all <= |k|)
    :param mode: pipe or disc
    :param jobs: Number of worker processes
    :param use_celery: Dispatch rows to celery workers
    :param options: Numerical options passed to sweep_row
    :return: Report
    """
    nu_list = sorted(float(nu) for nu in nu_list)
    if len(nu_list) < MIN_SWEEP_ROWS:
        raise WindowTooSmall(f"Exponent regression needs at least {MIN_SWEEP_ROWS} values of nu: {len(nu_list)}")
    if math.log10(nu_list[-1] / nu_list[0]) < MIN_SWEEP_DECADES:
        raise InvalidParameter(f"Values of nu must span at least {MIN_SWEEP_DECADES:g} decades")
    if any(nu > abs(k) for nu in nu_list):
        raise InvalidParameter(f"Every nu must lie in the enhanced branch nu <= |k|={abs(k):g}")
    if mode == "disc":
        if k != int(k) or k == 0:
            raise InvalidMode(f"Disc sweeps identify ell with a nonzero integer k: {k}")
        ell = int(k)
    elif mode != "pipe":
        raise InvalidParameter(f"Unknown sweep mode: {mode}")
    parameters = [dict(profile=profile, nu=nu, k=k, ell=ell, **options) for nu in nu_list]
    rows = sorted(_dispatch(parameters, jobs=jobs, use_celery=use_celery), key=lambda row: (row.nu, row.k, row.ell))
    alpha, stderr = exponent_fit(rows)
    logger.info(f"Exponent alpha={alpha:.4f} +/- {stderr:.4f} over {len(rows)} values of nu")
    return SweepReport(rows=rows, exponent_alpha=alpha, alpha_stderr=stderr, mode=mode)


def _disc_operator(profile: VelocityProfile, nu: float, ell: int, grid_size: int) -> ModeOperator:
    if ell == 0:
        raise InvalidMode("The ell=0 disc mode follows the heat equation and has no enhancement")
    if not nu < 1 <= abs(ell):
        raise InvalidParameter(f"Disc decay needs nu < 1 <= |ell|: nu={nu}, ell={ell}")
    return assemble_operator(build_grid(profile.radius, grid_size, ell), profile, nu, ell, ell)


def disc_decay(
    profile: VelocityProfile,
    nu: float,
    ell: int,
    t_grid,
    g0=None,
    grid_size: int = 128,
    count: int = RANDOM_SAMPLES,
    seed: int = 0,
    fit: bool = True,
) -> DecayTrace:
    """
    Decay of the angular mode ell of the disc, which is the pipe operator with k = ell
    :param g0: Initial datum (default: slowest of random initial data)
    """
    op = _disc_operator(profile, nu, ell, grid_size)
    if g0 is None:
        trace, _ = slowest_decay(op, t_grid, count=count, seed=seed)
        return trace
    trace = propagate(op, g0, t_grid)
    return with_fit(trace) if fit else trace


def disc_physical_decay(
    profile: VelocityProfile,
    nu: float,
    ells: Sequence[int],
    t_grid,
    grid_size: int = 128,
    seed: int = 0,
) -> Tuple[DecayTrace, float]:
    """
    Decay of disc data with zero angular mean, summed over angular modes (Parseval)
    :return: Fitted trace and the ratio of its rate to nu^(m/(m+2))
    """
    squares = np.zeros(len(_check_times(t_grid)))
    for index, ell in enumerate(ells):
        op = _disc_operator(profile, nu, ell, grid_size)
        (data,) = random_data(op.size, 1, seed + index)
        squares += propagate(op, data, t_grid, cross_check=False).norms ** 2
    trace = with_fit(DecayTrace(times=np.asarray(t_grid, dtype=float), norms=np.sqrt(squares)))
    m = profile.order
    return trace, trace.fit_rate / nu ** (m / (m + 2))


def heat_mode_rate(grid: RadialGrid, nu: float) -> float:
    """
    Decay rate of mean-free data in the ell=0 disc mode: nu times the first nonzero Neumann eigenvalue
    """
    if not grid.even:
        raise InvalidParameter("The heat mode lives on the ell=0 grid")
    return float(nu * laplacian_eigenvalues(grid, 0)[1])
