# coding: utf-8
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.cluster.hierarchy import fclusterdata
from scipy.optimize import brentq

from laboratory.exceptions import (
    CoverageFailure,
    DegenerateProfile,
    InvalidParameter,
    NoValidOrder,
)

logger = logging.getLogger(__name__)

ORDER_CAP = 8
DELTA_ZERO = 0.25
# Relative threshold under which a derivative value is considered to vanish
DERIVATIVE_TOLERANCE = 1e-8
# Roots of v' are accepted when their imaginary part is below this fraction of the radius
ROOT_IMAGINARY_TOLERANCE = 1e-4
# Merge radius of root clusters in units of eps^(1/degree)
RING_FACTOR = 4.0
COVERAGE_SAMPLES = 10_000
COVERAGE_DOUBLINGS = 6
# Closed covers absorb rounding of the interval ends
COVERAGE_SLACK = 1e-12


def _polynomial_scale(poly: Polynomial, radius: float) -> float:
    """
    Magnitude bound of a polynomial on [0, R] used for relative comparisons
    """
    powers = max(1.0, radius) ** np.arange(len(poly.coef))
    return float(np.sum(np.abs(poly.coef) * powers))


def _root_clusters(coef: np.ndarray) -> List[np.ndarray]:
    """
    Complex roots grouped so that the ring left by rounding around a multiple root forms one group
    :param coef: Coefficients (nonconstant polynomial)
    :return: Groups of roots
    """
    roots = Polynomial(coef).roots()
    if len(roots) == 1:
        return [roots]
    # A root of multiplicity j is split into a ring of radius about eps^(1/j), j is at most the degree
    radius = RING_FACTOR * np.finfo(float).eps ** (1 / len(roots))
    labels = fclusterdata(np.column_stack([roots.real, roots.imag]), t=radius, criterion="distance", method="single")
    return [roots[labels == label] for label in np.unique(labels)]


def _real_roots(poly: Polynomial, lo: float, hi: float) -> List[float]:
    """
    Real roots of a polynomial inside [lo, hi], multiple roots counted once
    :param poly: Polynomial
    :param lo: Lower bound
    :param hi: Upper bound
    :return: Sorted list of roots
    """
    coef = np.trim_zeros(poly.coef, "b")
    if len(coef) <= 1:
        return []
    # Roots are searched in r / span so that the tolerances are relative
    span = max(abs(lo), abs(hi), np.finfo(float).tiny)
    scaled = Polynomial(coef * span ** np.arange(len(coef)))
    scale = float(np.sum(np.abs(scaled.coef)))
    start, end = lo / span - ROOT_IMAGINARY_TOLERANCE, hi / span + ROOT_IMAGINARY_TOLERANCE

    def accepted(root):
        return (
            abs(root.imag) <= ROOT_IMAGINARY_TOLERANCE
            and start <= root.real <= end
            and abs(scaled(root.real)) <= DERIVATIVE_TOLERANCE * scale
        )

    roots = []
    for group in _root_clusters(scaled.coef):
        center = complex(np.mean(group))
        if accepted(center):
            roots.append(center.real)
        else:
            # Distinct roots closer than the merge radius
            roots.extend(root.real for root in group if accepted(root))
    return sorted({float(np.clip(x * span, lo, hi)) for x in roots})


@dataclass(frozen=True)
class VelocityProfile:
    """
    Polynomial radial velocity profile v(r) = sum(coeffs[i] * r**i) on [0, R]
    """

    coeffs: Tuple[float, ...]
    radius: float = 1.0
    order: Optional[int] = None
    order_cap: int = ORDER_CAP

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs or not np.all(np.isfinite(self.coeffs)):
            raise InvalidParameter(f"Profile coefficients must be finite and nonempty: {self.coeffs}")
        if not self.radius > 0:
            raise InvalidParameter(f"Profile radius must be positive: {self.radius}")
        if self.order_cap < 1:
            raise InvalidParameter(f"Order cap must be at least 1: {self.order_cap}")
        if self.order is None:
            object.__setattr__(self, "order", detect_order(self))
        elif not 1 <= self.order <= self.order_cap:
            raise InvalidParameter(f"Order {self.order} outside [1, {self.order_cap}]")

    @property
    def polynomial(self) -> Polynomial:
        return Polynomial(self.coeffs)

    def __call__(self, r):
        return self.polynomial(r)

    def derivative(self, n: int = 1) -> Polynomial:
        return self.polynomial.deriv(n)

    def critical_points(self) -> List[float]:
        """
        Real zeros of v' in [0, R]
        A zero of v' of multiplicity j is a simple zero of v^(j), so every derivative up to the cap contributes
        candidates and the candidates of one zero are merged into the one of highest local order
        """
        first = self.derivative(1)
        degree = len(np.trim_zeros(first.coef, "b")) - 1
        if degree < 1:
            return []
        tolerance = DERIVATIVE_TOLERANCE * _polynomial_scale(first, self.radius)
        candidates = sorted(
            {
                root
                for n in range(1, min(self.order_cap, degree) + 1)
                for root in _real_roots(self.derivative(n), 0.0, self.radius)
                if abs(first(root)) <= tolerance
            }
        )
        merge = RING_FACTOR * np.finfo(float).eps ** (1 / degree) * self.radius
        groups = []
        for root in candidates:
            if groups and root - groups[-1][-1] <= merge:
                groups[-1].append(root)
            else:
                groups.append([root])
        return [max(group, key=lambda r: self.local_order(r) or self.order_cap + 1) for group in groups]

    def breakpoints(self) -> List[float]:
        """
        Ends of the monotone pieces of v on [0, R]
        """
        points = [0.0, *self.critical_points(), self.radius]
        return sorted(set(points))

    def value_range(self) -> Tuple[float, float]:
        values = self(np.asarray(self.breakpoints()))
        return float(np.min(values)), float(np.max(values))

    def sup_norm(self) -> float:
        low, high = self.value_range()
        return max(abs(low), abs(high))

    def local_order(self, r0: float, cap: Optional[int] = None) -> int:
        """
        Smallest n >= 1 such that the n-th derivative does not vanish at r0
        :param r0: Radius
        :param cap: Maximum order searched (default: order cap of the profile)
        :return: Local order or 0 if every derivative up to the cap vanishes
        """
        cap = cap or self.order_cap
        for n in range(1, cap + 1):
            derivative = self.derivative(n)
            if abs(derivative(r0)) > DERIVATIVE_TOLERANCE * _polynomial_scale(derivative, self.radius):
                return n
        return 0

    def to_dict(self):
        return dict(coeffs=list(self.coeffs), radius=self.radius, order=self.order)


def detect_order(profile: VelocityProfile) -> int:
    """
    Nondegeneracy order m: smallest m such that v', ..., v^(m) have no common zero on [0, R]
    :param profile: Profile (the cached order is ignored)
    :return: Order m
    """
    first = profile.derivative(1)
    scale = _polynomial_scale(profile.polynomial - profile.coeffs[0], profile.radius)
    if scale == 0 or _polynomial_scale(first, profile.radius) <= DERIVATIVE_TOLERANCE * scale:
        raise NoValidOrder(f"Profile {list(profile.coeffs)} is constant")
    order = 1
    for root in profile.critical_points():
        local = profile.local_order(root)
        if not local:
            raise NoValidOrder(
                f"Derivatives up to order {profile.order_cap} vanish at r={root:g} for profile {list(profile.coeffs)}"
            )
        order = max(order, local)
    logger.debug(f"Order of profile {list(profile.coeffs)} on [0, {profile.radius}]: m={order}")
    return order


def level_set(profile: VelocityProfile, lam: float, tol: float = 1e-12) -> List[float]:
    """
    Level set E_lambda = v^-1(lambda) on [0, R]
    :param profile: Profile
    :param lam: Level
    :param tol: Absolute accuracy of the roots
    :return: Sorted roots (empty if lambda is not a value of v)
    """
    if not tol > 0:
        raise InvalidParameter(f"Tolerance must be positive: {tol}")
    value_tolerance = tol * max(1.0, profile.sup_norm())

    def shifted(r):
        return float(profile(r)) - lam

    roots = []
    points = profile.breakpoints()
    for point in points:
        # Tangent roots at critical points and endpoints
        if abs(shifted(point)) <= value_tolerance:
            roots.append(point)
    for lo, hi in zip(points[:-1], points[1:]):
        f_lo, f_hi = shifted(lo), shifted(hi)
        if f_lo * f_hi < 0 and abs(f_lo) > value_tolerance and abs(f_hi) > value_tolerance:
            roots.append(brentq(shifted, lo, hi, xtol=tol))
    roots.sort()
    unique = []
    for root in roots:
        if not unique or root - unique[-1] > tol:
            unique.append(root)
    return unique


@dataclass(frozen=True)
class IntervalSet:
    """
    Finite union of disjoint sorted intervals inside [0, R]
    """

    intervals: Tuple[Tuple[float, float], ...] = ()
    measure: float = field(init=False)

    def __post_init__(self):
        intervals = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        for (lo, hi), following in zip(intervals, intervals[1:] + ((np.inf, np.inf),)):
            if not lo < hi or not hi < following[0]:
                raise InvalidParameter(f"Intervals must be sorted, disjoint and nonempty: {intervals}")
        object.__setattr__(self, "intervals", intervals)
        object.__setattr__(self, "measure", float(sum(hi - lo for lo, hi in intervals)))

    @classmethod
    def merged(cls, intervals: Sequence[Tuple[float, float]], lo: float = -np.inf, hi: float = np.inf):
        """
        Build a set from arbitrary intervals, clipped to [lo, hi], touching ones merged
        """
        clipped = sorted((max(a, lo), min(b, hi)) for a, b in intervals)
        result: List[List[float]] = []
        for a, b in clipped:
            if not a < b:
                continue
            if result and a <= result[-1][1]:
                result[-1][1] = max(result[-1][1], b)
            else:
                result.append([a, b])
        return cls(tuple((a, b) for a, b in result))

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __bool__(self):
        return bool(self.intervals)

    def contains(self, r, closed: bool = True):
        r = np.asarray(r, dtype=float)
        inside = np.zeros(r.shape, dtype=bool)
        for lo, hi in self.intervals:
            inside |= (lo <= r) & (r <= hi) if closed else (lo < r) & (r < hi)
        return inside

    def inflate(self, width: float, lo: float, hi: float) -> "IntervalSet":
        return IntervalSet.merged([(a - width, b + width) for a, b in self.intervals], lo, hi)

    def complement(self, lo: float, hi: float) -> "IntervalSet":
        gaps, start = [], lo
        for a, b in self.intervals:
            gaps.append((start, a))
            start = b
        gaps.append((start, hi))
        return IntervalSet.merged(gaps, lo, hi)

    def covers(self, other: "IntervalSet") -> bool:
        """
        True if every interval of the other set lies inside one interval of this set
        """
        return all(any(a <= lo and hi <= b for a, b in self.intervals) for lo, hi in other.intervals)

    def sample(self, count: int) -> np.ndarray:
        """
        Points spread over the set, interval ends included
        """
        if not self.intervals:
            return np.empty(0)
        points = []
        for lo, hi in self.intervals:
            share = max(2, int(count * (hi - lo) / self.measure))
            points.append(np.linspace(lo, hi, share))
        return np.concatenate(points)


@dataclass(frozen=True)
class CoveringResult:
    family: Tuple[Tuple[float, float], ...]
    total_length: float
    roots: Tuple[float, ...]
    local_orders: Tuple[int, ...]
    inflation_radius: float
    count: int
    delta: float = 0.0
    lam: float = 0.0

    @property
    def constant(self) -> float:
        """
        Ratio total_length / delta (estimate of C0)
        """
        return self.total_length / self.delta if self.delta else 0.0

    @property
    def union(self) -> IntervalSet:
        return IntervalSet.merged(self.family)


def _preimage(profile: VelocityProfile, lo_value: float, hi_value: float) -> List[Tuple[float, float]]:
    """
    Preimage of the open value interval (lo_value, hi_value) under v, piece by piece
    """
    intervals = []
    points = profile.breakpoints()
    for a, b in zip(points[:-1], points[1:]):
        va, vb = float(profile(a)), float(profile(b))
        increasing = vb >= va
        low, high = (va, vb) if increasing else (vb, va)
        if high <= lo_value or low >= hi_value:
            continue

        def crossing(level):
            try:
                return brentq(lambda r: float(profile(r)) - level, a, b, xtol=1e-15 * profile.radius)
            except (RuntimeError, ValueError) as error:
                raise DegenerateProfile(f"Interval extraction failed on [{a:g}, {b:g}] at level {level:g}") from error

        enter = crossing(lo_value) if low < lo_value else None
        leave = crossing(hi_value) if high > hi_value else None
        if increasing:
            start, end = (enter if enter is not None else a), (leave if leave is not None else b)
        else:
            start, end = (leave if leave is not None else a), (enter if enter is not None else b)
        if start < end:
            intervals.append((start, end))
    return intervals


def neighborhood_sets(profile: VelocityProfile, lam: float, delta: float) -> Tuple[IntervalSet, IntervalSet]:
    """
    Neighborhoods of the level set of thickness delta^m
    :param profile: Profile
    :param lam: Level
    :param delta: Thickness parameter
    :return: E = {|v - lam| < delta^m} and its delta^m inflation in radius, clipped to [0, R]
    """
    if not delta > 0:
        raise InvalidParameter(f"Delta must be positive: {delta}")
    thickness = delta**profile.order
    near = IntervalSet.merged(_preimage(profile, lam - thickness, lam + thickness), 0.0, profile.radius)
    inflated = near.inflate(thickness, 0.0, profile.radius)
    return near, inflated


def _component_extent(component: Tuple[float, float], anchors: Sequence[float]) -> float:
    """
    Largest distance from a point of the component to its nearest anchor
    """
    lo, hi = component
    inside = [a for a in anchors if lo <= a <= hi]
    if not inside:
        return hi - lo
    gaps = [(b - a) / 2 for a, b in zip(inside[:-1], inside[1:])]
    return max([inside[0] - lo, hi - inside[-1], *gaps])


def covering(
    profile: VelocityProfile,
    lam: float,
    delta: float,
    delta_zero: float = DELTA_ZERO,
    samples: int = COVERAGE_SAMPLES,
    max_doublings: int = COVERAGE_DOUBLINGS,
) -> CoveringResult:
    """
    Finite family of intervals B(r_i, R0 delta + delta^m) covering the inflated neighborhood of a level set
    :param profile: Profile
    :param lam: Level
    :param delta: Thickness parameter (0 < delta <= delta_zero)
    :param delta_zero: Small-delta threshold
    :param samples: Number of sampled points used to verify containment
    :param max_doublings: Number of times R0 may be doubled before failing
    :return: Covering
    """
    if not 0 < delta <= delta_zero:
        raise InvalidParameter(f"Delta must lie in (0, {delta_zero}]: {delta}")
    near, inflated = neighborhood_sets(profile, lam, delta)
    if not inflated:
        return CoveringResult((), 0.0, (), (), 0.0, 0, delta=delta, lam=lam)

    thickness = delta**profile.order
    radius = profile.radius
    near_points = {p for p in profile.breakpoints() if abs(float(profile(p)) - lam) < thickness}
    anchors = sorted(near_points | set(level_set(profile, lam)))
    used = []
    for component in near:
        inside = [a for a in anchors if component[0] <= a <= component[1]]
        # Components always hold a root, a critical point or an end of [0, R]; the nearest end is the fallback
        used.extend(inside or [min(component, key=lambda end: min(end, radius - end))])
    used = sorted(set(used))
    extent = max(_component_extent(component, used) for component in near) if near else 0.0
    inflation = extent / delta

    points = inflated.sample(samples)
    for _ in range(max_doublings + 1):
        half_width = inflation * delta + thickness + COVERAGE_SLACK * radius
        family = tuple((max(0.0, r - half_width), min(radius, r + half_width)) for r in used)
        union = IntervalSet.merged(family)
        if union.covers(inflated) and np.all(union.contains(points)):
            break
        logger.warning(f"Covering of level {lam:g} at delta={delta:g} incomplete, doubling R0={inflation:g}")
        inflation = 2 * inflation if inflation > 0 else thickness / delta
    else:
        raise CoverageFailure(f"Covering of level {lam:g} at delta={delta:g} failed with R0={inflation:g}")

    local_orders = []
    for r in used:
        order = profile.local_order(r, cap=profile.order) or profile.order
        # Taylor coefficient at the root, only used for diagnostics
        coefficient = profile.derivative(order)(r) / math.factorial(order)
        logger.debug(f"Covering anchor r={r:g}: n={order}, a={coefficient:g}")
        local_orders.append(order)
    total = float(sum(hi - lo for lo, hi in family))
    return CoveringResult(
        family=family,
        total_length=total,
        roots=tuple(used),
        local_orders=tuple(local_orders),
        inflation_radius=inflation,
        count=len(family),
        delta=delta,
        lam=lam,
    )


@dataclass(frozen=True)
class CoveringRow:
    lam: float
    delta: float
    measure_near: float
    measure_inflated: float
    total_cover_length: float
    cover_count: int


def covering_constant(
    profile: VelocityProfile,
    lambdas: Sequence[float],
    deltas: Sequence[float],
    delta_zero: float = DELTA_ZERO,
) -> Tuple[float, List[CoveringRow]]:
    """
    Estimate the constant C0 of the covering bound total_length <= C0 delta
    :param profile: Profile
    :param lambdas: Levels
    :param deltas: Thickness parameters
    :param delta_zero: Small-delta threshold
    :return: Sup of total_length / delta and the report rows
    """
    rows, constant = [], 0.0
    for delta in deltas:
        for lam in lambdas:
            near, inflated = neighborhood_sets(profile, lam, delta)
            cover = covering(profile, lam, delta, delta_zero=delta_zero)
            rows.append(
                CoveringRow(
                    lam=float(lam),
                    delta=float(delta),
                    measure_near=near.measure,
                    measure_inflated=inflated.measure,
                    total_cover_length=cover.total_length,
                    cover_count=cover.count,
                )
            )
            constant = max(constant, cover.constant)
    return constant, rows
