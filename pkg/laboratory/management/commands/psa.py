# coding: utf-8
import logging

import numpy as np

from laboratory.management.commands._base import LabCommand, tqdm
from laboratory.operators import assemble_operator, build_grid, export
from laboratory.pseudospectral import optimal_delta, proof_rate_constant, pseudo_abscissa
from laboratory.reports import plot as plot_svg
from laboratory.reports import write_csv
from laboratory.semigroup import lambda_rate

logger = logging.getLogger(__name__)


class Command(LabCommand):
    help = "Smallest singular value curves and pseudospectral abscissa of the mode operators"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--export", action="store_true", help="Write the operators in matrix-market format")

    def run(self, config, directory, jobs=1, plot=False, **options):
        profile = config.profile()
        grid = build_grid(profile.radius, config.grid_size, config.ell)
        c1_proof = delta_tilde = None
        if config.k:
            low, high = profile.value_range()
            deltas = [delta for delta in config.delta_list if delta <= config.delta_zero]
            levels = np.linspace(low, high, config.level_samples)
            c1_proof, delta_tilde, c0 = proof_rate_constant(profile, levels, deltas, delta_zero=config.delta_zero)
            logger.info(f"Proof constant c1={c1_proof:.6g} with C0={c0:.6g}")
        curves, summary = [], []
        for nu in tqdm(config.nu_list, desc="Pseudospectra"):
            op = assemble_operator(grid, profile, nu, config.k, config.ell)
            if options.get("export"):
                export(op, self.path(directory, f"operator_nu{nu:g}.mtx"))
            result = pseudo_abscissa(
                op,
                grid_count=config.lambda_samples,
                refine_tol=config.refine_tol,
                order=profile.order,
                value_range=profile.value_range(),
            )
            curves.append((nu, result.curve))
            summary.append(
                dict(
                    nu=nu,
                    k=config.k,
                    ell=config.ell,
                    psi=result.psi,
                    argmin=result.argmin,
                    c1_effective="" if result.c1_effective is None else result.c1_effective,
                    Lambda=lambda_rate(nu, config.k, profile.order) if config.k else "",
                    c1_proof="" if c1_proof is None else c1_proof,
                    delta="" if delta_tilde is None else optimal_delta(nu, config.k, profile.order, delta_tilde),
                )
            )
            logger.info(f"nu={nu:g}: Psi={result.psi:.6g} at lambda={result.argmin:.6g}")
        write_csv(
            self.path(directory, "sigma.csv"),
            ("nu", "lambda", "sigma_min"),
            (
                dict(nu=nu, sigma_min=row["sigma_min"], **{"lambda": row["lam"]})
                for nu, curve in curves
                for row in curve.rows()
            ),
        )
        fields = ("nu", "k", "ell", "psi", "argmin", "c1_effective", "c1_proof", "delta", "Lambda")
        write_csv(self.path(directory, "psa.csv"), fields, summary)
        if plot:
            plot_svg(
                self.path(directory, "psa.svg"),
                [(curve.lambdas, curve.sigmas, f"nu={nu:g}") for nu, curve in curves],
                xlabel="lambda",
                ylabel="sigma_min(H - i k lambda)",
                markers=[([curve.refined_min[0]], [curve.refined_min[1]], f"Psi, nu={nu:g}") for nu, curve in curves],
            )
