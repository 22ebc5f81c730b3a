# coding: utf-8
import logging
import math
import warnings
from dataclasses import dataclass
from functools import partial
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq
from scipy.special import erf, gamma, gammaincc
from tqdm.auto import tqdm

from laboratory.exceptions import EnvelopeViolation, InvalidParameter, QuadratureFailure

logger = logging.getLogger(__name__)

tqdm = partial(tqdm, bar_format="{l_bar:.>40}{bar}{r_bar:.<40}")

RELATIVE_TOLERANCE = 1e-8
# The high-wavenumber integrand is cut where it falls below this fraction of its maximum
TRUNCATION = 1e-16
ENVELOPE_FACTOR = 3.0
# Quadrature slack on the high-wavenumber bound
HIGH_SLACK = 1e-6


def _exponents(m: int) -> Tuple[float, float]:
    """
    Exponents (a, b) of Lambda = nu^a |k|^b in the enhanced branch
    """
    return m / (m + 2), 2 / (m + 2)


def _integrate(function, lo: float, hi: float, **options) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = quad(function, lo, hi, epsrel=RELATIVE_TOLERANCE, epsabs=0.0, limit=200, **options)
        except IntegrationWarning as error:
            raise QuadratureFailure(f"Quadrature on [{lo:g}, {hi:g}] failed: {error}") from error
    if not math.isfinite(value):
        raise QuadratureFailure(f"Quadrature on [{lo:g}, {hi:g}] is not finite")
    return value


def k_integral(nu: float, t: float, m: int, c1: float) -> Tuple[float, float]:
    """
    Integral over k of e^(-c1 Lambda(nu, k) t), split at |k| = nu
    :param nu: Diffusivity
    :param t: Time
    :param m: Nondegeneracy order
    :param c1: Rate constant
    :return: Integrals over |k| <= nu and |k| > nu
    """
    if not (nu > 0 and t > 0 and c1 > 0):
        raise InvalidParameter(f"k-integral needs positive nu, t and c1: nu={nu}, t={t}, c1={c1}")
    low = 2 * _integrate(lambda k: math.exp(-c1 * k * k * t / nu), 0.0, nu)

    # With eta = k^b the integrand is (1/b) eta^(1/b - 1) e^(-c eta) on eta > nu^b
    a, b = _exponents(m)
    c = c1 * nu**a * t
    power = 1 / b - 1
    start = nu**b
    peak = max(start, power / c)

    def log_density(eta):
        return power * math.log(eta) - c * eta

    cutoff = log_density(peak) + math.log(TRUNCATION)
    end = peak + 1 / c
    while log_density(end) > cutoff:
        end = peak + 2 * (end - peak)
    end = brentq(lambda eta: log_density(eta) - cutoff, peak, end)

    def density(eta):
        return math.exp(log_density(eta)) / b

    points = [peak] if start < peak < end else None
    high = 2 * _integrate(density, start, end, points=points)
    return low, high


def low_closed_form(nu: float, t: float, c1: float) -> float:
    """
    Gaussian integral over |k| <= nu: sqrt(pi nu / (c1 t)) erf(sqrt(c1 nu t))
    """
    return math.sqrt(math.pi * nu / (c1 * t)) * erf(math.sqrt(c1 * nu * t))


def high_closed_form(nu: float, t: float, m: int, c1: float) -> float:
    """
    Integral over |k| > nu through the upper incomplete gamma function
    """
    a, b = _exponents(m)
    return (2 / b) * (c1 * nu**a * t) ** (-1 / b) * gamma(1 / b) * gammaincc(1 / b, c1 * nu * t)


def dispersion_envelope(nu: float, t, c2: float, C2: float):
    """
    Taylor dispersion envelope C2 (sqrt(nu / t) + e^(-c2 nu t) / t)
    """
    t = np.asarray(t, dtype=float)
    return C2 * (np.sqrt(nu / t) + np.exp(-c2 * nu * t) / t)


@dataclass(frozen=True)
class DispersionReport:
    nu: float
    m: int
    times: np.ndarray
    I_low: np.ndarray
    I_high: np.ndarray
    envelope: np.ndarray
    max_ratio: float
    constants: Tuple[float, float, float]
    # Largest value of I_high t e^(c1 nu t / 2) normalized at the first time, and its admissible bound
    high_ratio: float = math.nan
    high_limit: float = math.nan

    @property
    def total(self) -> np.ndarray:
        return self.I_low + self.I_high

    def rows(self):
        return [
            dict(t=float(t), I_low=float(low), I_high=float(high), envelope=float(env), ratio=float((low + high) / env))
            for t, low, high, env in zip(self.times, self.I_low, self.I_high, self.envelope)
        ]

    def summary(self):
        c1, c2, C2 = self.constants
        return dict(
            nu=self.nu,
            m=self.m,
            c1=c1,
            c2=c2,
            C2_fit=C2,
            max_ratio=self.max_ratio,
            high_ratio=self.high_ratio,
            high_limit=self.high_limit,
        )


def dispersion_times(nu: float, samples: int = 121, start: float = 0.1) -> np.ndarray:
    """
    Logarithmic time grid over [start, 10 / nu]
    """
    return np.geomspace(start, 10 / nu, samples)


def verify_dispersion(
    nu: float,
    m: int,
    c1: float,
    c2: Optional[float] = None,
    t_grid: Optional[Sequence[float]] = None,
    factor: float = ENVELOPE_FACTOR,
    high_limit: Optional[float] = None,
    progress: bool = False,
) -> DispersionReport:
    """
    Compare the k-integral against the envelope with C2 fitted at the first time
    :param nu: Diffusivity
    :param m: Nondegeneracy order
    :param c1: Rate constant
    :param c2: Envelope rate (default c1 / 2, never above)
    :param t_grid: Increasing times (default: logarithmic over [0.1, 10 / nu])
    :param factor: Allowed ratio between the integral and the fitted envelope
    :param high_limit: Allowed growth of I_high t e^(c1 nu t / 2) over its first value (default: the value at the
        first time of t times the closed form at rate c1 / 2, which bounds the product and decreases in t)
    :param progress: Show a progress bar
    :return: Report
    """
    c2 = c1 / 2 if c2 is None else c2
    if c2 > c1 / 2:
        raise InvalidParameter(f"Envelope rate c2={c2:g} must not exceed c1/2={c1 / 2:g}")
    times = dispersion_times(nu) if t_grid is None else np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0) or times[0] <= 0:
        raise InvalidParameter("Dispersion time grid must hold at least two increasing positive times")
    samples = tqdm(times, desc="Dispersion", leave=False) if progress else times
    integrals = np.array([k_integral(nu, t, m, c1) for t in samples])
    low, high = integrals[:, 0], integrals[:, 1]
    unit = dispersion_envelope(nu, times, c2, 1.0)
    C2 = float((low[0] + high[0]) / unit[0])
    envelope = C2 * unit
    ratios = (low + high) / envelope
    worst = int(np.argmax(ratios))
    high_scaled = high * times * np.exp(c1 * nu * times / 2)
    if high_limit is None:
        high_limit = times[0] * high_closed_form(nu, times[0], m, c1 / 2) / high_scaled[0] * (1 + HIGH_SLACK)
    peak = int(np.argmax(high_scaled))
    report = DispersionReport(
        nu=nu,
        m=m,
        times=times,
        I_low=low,
        I_high=high,
        envelope=envelope,
        max_ratio=float(ratios[worst]),
        constants=(c1, c2, C2),
        high_ratio=float(high_scaled[peak] / high_scaled[0]),
        high_limit=float(high_limit),
    )
    logger.debug(f"Dispersion nu={nu:g}, m={m}: C2={C2:g}, max ratio {report.max_ratio:.3f}")
    if report.max_ratio > factor:
        raise EnvelopeViolation(
            f"Integral exceeds {factor:g} times the envelope at t={times[worst]:g} (ratio {report.max_ratio:.3f})",
            time=float(times[worst]),
        )
    if report.high_ratio > high_limit:
        raise EnvelopeViolation(
            f"High-wavenumber part grows {report.high_ratio:.3f}-fold, above {high_limit:.3f}, at t={times[peak]:g}",
            time=float(times[peak]),
        )
    return report


def scaled_profile(report: DispersionReport, c2: Optional[float] = None) -> np.ndarray:
    """
    Dimensionless form (I_low + I_high) min(sqrt(t / nu), t e^(c2 nu t)), bounded when the envelope holds
    """
    c2 = report.constants[1] if c2 is None else c2
    t, nu = report.times, report.nu
    return report.total * np.minimum(np.sqrt(t / nu), t * np.exp(c2 * nu * t))
