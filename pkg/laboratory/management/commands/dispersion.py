# coding: utf-8
import logging

from laboratory.dispersion import scaled_profile, verify_dispersion
from laboratory.management.commands._base import LabCommand, tqdm
from laboratory.pseudospectral import enhanced_rate_constant
from laboratory.reports import plot as plot_svg
from laboratory.reports import write_csv

logger = logging.getLogger(__name__)

FIELDS = ("nu", "m", "t", "I_low", "I_high", "envelope", "ratio", "scaled")
SUMMARY_FIELDS = ("nu", "m", "c1", "c2", "C2_fit", "max_ratio", "high_ratio", "high_limit")


class Command(LabCommand):
    help = "Wavenumber integral of the enhanced decay against the Taylor dispersion envelope"

    def run(self, config, directory, jobs=1, plot=False, **options):
        profile = config.profile()
        c1 = enhanced_rate_constant(
            profile, config.nu_list, config.k, config.ell, config.grid_size, config.lambda_samples, c1=config.c1
        )
        orders = config.orders or [profile.order]
        reports = [
            verify_dispersion(nu, m, c1)
            for m in tqdm(orders, desc="Dispersion")
            for nu in config.nu_list
        ]
        write_csv(
            self.path(directory, "dispersion.csv"),
            FIELDS,
            (
                dict(nu=report.nu, m=report.m, scaled=float(scaled), **row)
                for report in reports
                for row, scaled in zip(report.rows(), scaled_profile(report))
            ),
        )
        write_csv(
            self.path(directory, "dispersion_summary.csv"),
            SUMMARY_FIELDS,
            (report.summary() for report in reports),
        )
        for report in reports:
            logger.info(
                f"nu={report.nu:g}, m={report.m}: max ratio {report.max_ratio:.4f}, "
                f"high ratio {report.high_ratio:.4f} (bound {report.high_limit:.4f})"
            )
        if plot:
            plot_svg(
                self.path(directory, "dispersion.svg"),
                [(report.times, report.total, f"I, nu={report.nu:g} m={report.m}") for report in reports]
                + [(report.times, report.envelope, f"envelope, nu={report.nu:g} m={report.m}") for report in reports],
                xlabel="t",
                ylabel="integral over k",
                logx=True,
            )
