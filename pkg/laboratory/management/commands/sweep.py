# coding: utf-8
import logging

import numpy as np
from django.conf import settings

from laboratory.management.commands._base import LabCommand
from laboratory.reports import plot as plot_svg
from laboratory.reports import write_csv, write_json
from laboratory.semigroup import scaling_sweep

logger = logging.getLogger(__name__)

FIELDS = ("nu", "k", "ell", "m", "Lambda", "rate", "c_effective", "psi", "alpha")


class Command(LabCommand):
    help = "Fitted decay rates over the diffusivities and their exponent against nu"

    def run(self, config, directory, jobs=1, plot=False, **options):
        profile = config.profile()
        report = scaling_sweep(
            profile,
            config.ells[0] if config.mode == "disc" else config.k,
            config.ell,
            config.nu_list,
            mode=config.mode,
            jobs=jobs,
            use_celery=settings.CELERY_ENABLE,
            grid_size=config.grid_size,
            lambda_samples=config.lambda_samples,
            time_samples=config.time_samples,
            random_samples=config.random_samples,
            seed=config.seed,
            window=tuple(config.fit_window),
        )
        first = report.rows[0]
        summary_row = dict(k=first.k, ell=first.ell, m=first.m, alpha=report.exponent_alpha)
        write_csv(self.path(directory, "sweep.csv"), FIELDS, [*report.as_rows(), summary_row])
        m = profile.order
        write_json(
            self.path(directory, "sweep_summary.json"),
            dict(
                mode=report.mode,
                m=m,
                alpha=report.exponent_alpha,
                alpha_stderr=report.alpha_stderr,
                expected_alpha=m / (m + 2),
                c_effective_spread=max(row.c_effective for row in report.rows)
                / min(row.c_effective for row in report.rows),
            ),
        )
        self.stdout.write(f"alpha={report.exponent_alpha:.6g}")
        if plot:
            nus = np.array([row.nu for row in report.rows])
            plot_svg(
                self.path(directory, "sweep.svg"),
                [
                    (nus, [row.rate for row in report.rows], "fitted rate"),
                    (nus, [row.Lambda for row in report.rows], f"Lambda (m={m})"),
                    (nus, [row.psi for row in report.rows], "Psi"),
                ],
                xlabel="nu",
                ylabel="rate",
                logx=True,
            )
