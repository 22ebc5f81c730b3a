# coding: utf-8
import logging
import math

import numpy as np
import scipy.linalg

from laboratory.dispersion import verify_dispersion
from laboratory.exceptions import EnvelopeViolation, LabError, VerificationFailure
from laboratory.management.commands._base import LabCommand, tqdm
from laboratory.operators import (
    assemble_laplacian,
    assemble_operator,
    bessel_reference,
    build_grid,
    gradient_norm,
    laplacian_eigenvalues,
    random_smooth,
    weighted_inner,
)
from laboratory.profiles import covering, covering_constant, neighborhood_sets
from laboratory.pseudospectral import (
    enhanced_rate_constant,
    optimal_delta,
    poincare_check,
    proof_rate_constant,
    pseudo_abscissa,
    resolvent_lower_bound,
    split_bound,
    verify_away_bound,
    verify_near_bound,
)
from laboratory.reports import plot as plot_svg
from laboratory.reports import write_csv, write_json
from laboratory.semigroup import (
    decay_grid,
    disc_decay,
    lambda_rate,
    propagate,
    propagate_many,
    random_data,
    wei_bound_check,
)

logger = logging.getLogger(__name__)

BESSEL_COUNT = 10
BESSEL_TOLERANCE = 1e-6
QUADRATURE_TOLERANCE = 1e-10
ACCRETIVITY_TOLERANCE = 1e-10
NEUMANN_TOLERANCE = 1e-8
COVERING_LIMIT = 20.0
# Relative slack of the sampled abscissa over the spectral abscissa
ABSCISSA_SLACK = 1e-3
WEI_TOLERANCE = 1e-8
AUDIT_TOLERANCE = 1e-8
AUDIT_NUS = (1e-3, 1e-4)
AUDIT_DELTAS = (0.05, 0.1)
AUDIT_SAMPLES = 100
DISPERSION_ORDERS = (1, 2, 4)
DISPERSION_NUS = (1e-2, 1e-3)
DISPERSION_FACTOR = 3.0
UNIFORMITY_FACTOR = 3.0
TEST_FUNCTIONS = 20


def outcome(value, threshold, passed):
    return dict(value=float(value), threshold=float(threshold), passed=bool(passed))


class Command(LabCommand):
    help = "Run the verification suite of the laboratory and fail when any check fails"

    def run(self, config, directory, jobs=1, plot=False, **options):
        self.config = config
        self.profile = config.profile()
        self.rng = np.random.default_rng(config.seed)
        checks = [
            ("order", self.check_order),
            ("bessel_ell0", lambda: self.check_bessel(0)),
            ("bessel_ell1", lambda: self.check_bessel(1)),
            ("quadrature_even", lambda: self.check_quadrature(0)),
            ("quadrature_odd", lambda: self.check_quadrature(1)),
            ("neumann_constants", self.check_neumann),
            ("accretivity", self.check_accretivity),
            ("covering_constant", self.check_covering),
            ("neighborhood_monotonicity", self.check_neighborhoods),
            ("abscissa_below_spectrum", self.check_abscissa),
            ("wei_bound", self.check_wei),
            ("c1_uniformity", self.check_uniformity),
            ("crossover_continuity", self.check_crossover),
            ("disc_pipe_identity", self.check_disc_identity),
            ("poincare_admissible", self.check_poincare),
            ("away_bound", lambda: self.check_audit("away")),
            ("near_bound", lambda: self.check_audit("near")),
            ("split_bound", lambda: self.check_audit("split")),
            ("proof_constant", self.check_proof_constant),
            *[
                (f"dispersion_m{m}_nu{nu:g}", lambda m=m, nu=nu: self.check_dispersion(m, nu))
                for m in DISPERSION_ORDERS
                for nu in DISPERSION_NUS
            ],
        ]
        rows = []
        for name, check in tqdm(checks, desc="Verification"):
            try:
                result = check()
            except LabError as error:
                logger.error(f"Check {name} raised {error.code}: {error}")
                result = dict(value=math.nan, threshold=math.nan, passed=False)
            rows.append(dict(check=name, **result))
            logger.log(
                logging.INFO if result["passed"] else logging.ERROR,
                f"{name}: {'passed' if result['passed'] else 'FAILED'} (value {result['value']:.6g}, "
                f"threshold {result['threshold']:.6g})",
            )
        write_csv(self.path(directory, "verify.csv"), ("check", "passed", "value", "threshold"), rows)
        failed = [row["check"] for row in rows if not row["passed"]]
        write_json(
            self.path(directory, "verify.json"),
            dict(
                profile=self.profile.to_dict(),
                passed=not failed,
                failed=failed,
                checks={row["check"]: {key: row[key] for key in ("passed", "value", "threshold")} for row in rows},
            ),
        )
        if plot:
            values = [abs(row["value"]) / row["threshold"] if row["threshold"] else 0.0 for row in rows]
            plot_svg(
                self.path(directory, "verify.svg"),
                [(np.arange(len(rows)), values, "|value| / threshold")],
                xlabel="check",
                ylabel="ratio",
                markers=[(np.arange(len(rows)), values, "checks")],
            )
        if failed:
            raise VerificationFailure(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        self.stdout.write(f"{len(rows)} checks passed")

    def operator(self, nu=None, k=None, ell=None):
        nu = self.config.nu_list[0] if nu is None else nu
        k = self.config.k if k is None else k
        ell = self.config.ell if ell is None else ell
        grid = build_grid(self.profile.radius, self.config.grid_size, ell)
        return assemble_operator(grid, self.profile, nu, k, ell)

    def effective_constant(self):
        if not hasattr(self, "_c1"):
            self._c1 = enhanced_rate_constant(
                self.profile,
                self.config.nu_list,
                self.config.k,
                self.config.ell,
                self.config.grid_size,
                self.config.lambda_samples,
            )
        return self._c1

    def rate_constant(self):
        return self.effective_constant() if self.config.c1 is None else self.config.c1

    def proof(self):
        """
        Rate constant, delta_tilde and covering constant of the localized bounds
        """
        if not hasattr(self, "_proof"):
            low, high = self.profile.value_range()
            levels = np.linspace(low, high, self.config.level_samples)
            deltas = [delta for delta in self.config.delta_list if delta <= self.config.delta_zero]
            self._proof = proof_rate_constant(self.profile, levels, deltas, delta_zero=self.config.delta_zero)
        return self._proof

    def check_order(self):
        local = [self.profile.local_order(r) for r in self.profile.critical_points()]
        expected = max([1, *local])
        return outcome(self.profile.order, expected, self.profile.order == expected)

    def check_bessel(self, ell):
        grid = build_grid(self.profile.radius, self.config.grid_size, ell)
        computed = laplacian_eigenvalues(grid, ell)[:BESSEL_COUNT]
        reference = bessel_reference(ell, BESSEL_COUNT, self.profile.radius)
        # The zero eigenvalue of the constant mode is compared in absolute terms
        error = float(np.max(np.abs(computed - reference) / np.maximum(reference, 1.0)))
        return outcome(error, BESSEL_TOLERANCE, error <= BESSEL_TOLERANCE)

    def check_quadrature(self, ell):
        grid = build_grid(self.profile.radius, self.config.grid_size, ell)
        radius = grid.radius
        powers = range(0, 12, 2) if grid.even else range(0, 12)
        exact = {j: radius ** (j + 2) / (j + 2) for j in powers}
        errors = [abs(np.sum(grid.quad_weights * grid.nodes**j) - exact[j]) / exact[j] for j in powers]
        return outcome(max(errors), QUADRATURE_TOLERANCE, max(errors) <= QUADRATURE_TOLERANCE)

    def check_neumann(self):
        grid = build_grid(self.profile.radius, self.config.grid_size, 0)
        laplacian = assemble_laplacian(grid, 0)
        residual = np.linalg.norm(laplacian @ np.ones(grid.size)) / np.linalg.norm(laplacian)
        return outcome(residual, NEUMANN_TOLERANCE, residual <= NEUMANN_TOLERANCE)

    def check_accretivity(self):
        op = self.operator()
        worst = 0.0
        for g in random_smooth(op.grid, TEST_FUNCTIONS, self.rng):
            energy = op.nu * gradient_norm(op.grid, g, op.ell) ** 2
            real_part = weighted_inner(g, op.apply(g), op.grid).real
            worst = max(worst, abs(real_part - energy) / max(energy, 1e-300))
        return outcome(worst, ACCRETIVITY_TOLERANCE, worst <= ACCRETIVITY_TOLERANCE)

    def check_covering(self):
        low, high = self.profile.value_range()
        levels = np.linspace(low - 1, high + 1, self.config.level_samples)
        deltas = [delta for delta in self.config.delta_list if delta <= self.config.delta_zero]
        constant, _ = covering_constant(self.profile, levels, deltas, delta_zero=self.config.delta_zero)
        return outcome(constant, COVERING_LIMIT, constant <= COVERING_LIMIT)

    def check_neighborhoods(self):
        low, high = self.profile.value_range()
        deltas = sorted(self.config.delta_list, reverse=True)
        excess = 0.0
        for lam in np.linspace(low, high, 11):
            previous = math.inf
            for delta in deltas:
                near, inflated = neighborhood_sets(self.profile, lam, delta)
                excess = max(excess, near.measure - previous, near.measure - inflated.measure)
                if not inflated.covers(near):
                    excess = math.inf
                previous = near.measure
        return outcome(excess, 1e-12, excess <= 1e-12)

    def check_abscissa(self):
        op = self.operator()
        psi = pseudo_abscissa(op, grid_count=self.config.lambda_samples, value_range=self.profile.value_range()).psi
        spectral = float(np.min(scipy.linalg.eigvals(op.symmetrized()).real))
        return outcome(psi, spectral * (1 + ABSCISSA_SLACK), psi <= spectral * (1 + ABSCISSA_SLACK))

    def check_wei(self):
        op = self.operator()
        psi = pseudo_abscissa(op, grid_count=self.config.lambda_samples, value_range=self.profile.value_range()).psi
        # Three decades of decay past the first samples
        times = decay_grid(psi, self.config.time_samples, floor=1e-3)
        traces = propagate_many(op, random_data(op.size, self.config.random_samples, self.config.seed), times)
        excess = max(wei_bound_check(trace, psi) for trace in traces)
        return outcome(excess, WEI_TOLERANCE, excess <= WEI_TOLERANCE)

    def check_uniformity(self):
        nus = [nu for nu in self.config.nu_list if nu <= abs(self.config.k)]
        if not self.config.k or len(nus) < 2:
            return outcome(1.0, UNIFORMITY_FACTOR, True)
        constants = [resolvent_lower_bound(self.operator(nu=nu), self.profile.order) for nu in nus]
        spread = max(constants) / min(constants)
        return outcome(spread, UNIFORMITY_FACTOR, spread <= UNIFORMITY_FACTOR)

    def check_crossover(self):
        k = abs(self.config.k) or 1.0
        worst = 0.0
        for m in DISPERSION_ORDERS:
            below, above = lambda_rate(k * (1 - 1e-12), k, m), lambda_rate(k * (1 + 1e-12), k, m)
            worst = max(worst, abs(below - above) / abs(above))
        return outcome(worst, 1e-9, worst <= 1e-9)

    def check_disc_identity(self):
        nu = min(self.config.nu_list)
        times = np.linspace(0.0, 1.0 / math.sqrt(nu), 21)
        grid = build_grid(self.profile.radius, self.config.grid_size, 1)
        (data,) = random_smooth(grid, 1, self.rng)
        disc = disc_decay(self.profile, nu, 1, times, g0=data, grid_size=self.config.grid_size, fit=False)
        pipe = propagate(assemble_operator(grid, self.profile, nu, 1, 1), data, times)
        difference = float(np.max(np.abs(disc.norms - pipe.norms)))
        return outcome(difference, 0.0, np.array_equal(disc.norms, pipe.norms))

    def check_poincare(self):
        grid = build_grid(self.profile.radius, self.config.grid_size, self.config.ell)
        radius = grid.radius
        worst = -math.inf
        for g in random_smooth(grid, TEST_FUNCTIONS, self.rng):
            r1, r2 = sorted(self.rng.uniform(0.0, radius, 2))
            root = self.rng.uniform(r1, r2)
            # Vanishes at root, keeps the regularity of the grid
            vanishing = g * (grid.nodes**2 - root**2) if grid.even else g * (grid.nodes - root)
            lhs, rhs = poincare_check(grid, vanishing, r1, r2)
            worst = max(worst, (lhs - rhs) / max(rhs, 1e-300))
        return outcome(worst, 1e-10, worst <= 1e-10)

    def check_audit(self, kind):
        if not self.config.k:
            return outcome(0.0, AUDIT_TOLERANCE, True)
        low, high = self.profile.value_range()
        worst = math.inf
        for nu in AUDIT_NUS:
            op = self.operator(nu=nu)
            deltas = AUDIT_DELTAS
            if kind == "split":
                # Thickness balancing both bounds, kept in the small-delta range
                delta = optimal_delta(nu, self.config.k, self.profile.order, self.proof()[1])
                deltas = [min(delta, self.config.delta_zero)]
            for delta in deltas:
                for lam in np.linspace(low, high, 3):
                    c0 = covering(self.profile, lam, delta, delta_zero=self.config.delta_zero).constant
                    for g in random_smooth(op.grid, AUDIT_SAMPLES, self.rng):
                        if kind == "away":
                            result = verify_away_bound(op, self.profile, lam, delta, g)
                        elif kind == "near":
                            result = verify_near_bound(op, self.profile, lam, delta, g, c0=c0)
                        else:
                            result = split_bound(op, self.profile, lam, delta, g, c0=c0)
                        scale = max(1.0, abs(result.rhs))
                        worst = min(worst, result.residual / scale)
        return outcome(worst, -AUDIT_TOLERANCE, worst >= -AUDIT_TOLERANCE)

    def check_proof_constant(self):
        """
        The computed constant c1 is never below the one guaranteed by the localized bounds
        """
        if not self.config.k or not any(nu <= abs(self.config.k) for nu in self.config.nu_list):
            return outcome(1.0, 1.0, True)
        c1_proof, delta_tilde, c0 = self.proof()
        ratio = self.effective_constant() / c1_proof
        logger.info(f"Proof constant {c1_proof:.6g} (C0={c0:.6g}, delta_tilde={delta_tilde:.6g})")
        return outcome(ratio, 1.0, ratio >= 1.0)

    def check_dispersion(self, m, nu):
        c1 = self.rate_constant()
        try:
            report = verify_dispersion(nu, m, c1, factor=DISPERSION_FACTOR)
        except EnvelopeViolation as error:
            logger.error(f"Envelope violated at t={error.time:g}: {error}")
            return outcome(math.inf, DISPERSION_FACTOR, False)
        return outcome(report.max_ratio, DISPERSION_FACTOR, report.max_ratio <= DISPERSION_FACTOR)
