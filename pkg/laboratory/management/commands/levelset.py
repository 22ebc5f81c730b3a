# coding: utf-8
import logging

import numpy as np

from laboratory.management.commands._base import LabCommand
from laboratory.profiles import covering_constant
from laboratory.reports import plot as plot_svg
from laboratory.reports import write_csv, write_json

logger = logging.getLogger(__name__)

FIELDS = ("lambda", "delta", "measure_E", "measure_Etilde", "total_cover_length", "cover_count")


class Command(LabCommand):
    help = "Level-set neighborhoods and interval coverings over a grid of levels"

    def run(self, config, directory, jobs=1, plot=False, **options):
        profile = config.profile()
        low, high = profile.value_range()
        levels = np.linspace(low - 1, high + 1, config.level_samples)
        deltas = sorted((delta for delta in config.delta_list if delta <= config.delta_zero), reverse=True)
        if len(deltas) < len(config.delta_list):
            logger.warning(f"Thickness values above delta_zero={config.delta_zero:g} are skipped")
        per_delta = {}
        rows = []
        for delta in deltas:
            constant, delta_rows = covering_constant(profile, levels, [delta], delta_zero=config.delta_zero)
            per_delta[delta] = constant
            rows.extend(delta_rows)
            logger.info(f"delta={delta:g}: sup of total cover length / delta = {constant:.4f}")
        write_csv(
            self.path(directory, "levelset.csv"),
            FIELDS,
            (
                {
                    "lambda": row.lam,
                    "delta": row.delta,
                    "measure_E": row.measure_near,
                    "measure_Etilde": row.measure_inflated,
                    "total_cover_length": row.total_cover_length,
                    "cover_count": row.cover_count,
                }
                for row in rows
            ),
        )
        c0 = max(per_delta.values(), default=0.0)
        write_json(
            self.path(directory, "levelset_summary.json"),
            dict(m=profile.order, C0=c0, per_delta={f"{delta:g}": value for delta, value in per_delta.items()}),
        )
        self.stdout.write(f"C0={c0:.6g}")
        if plot:
            plot_svg(
                self.path(directory, "levelset.svg"),
                [
                    (levels, [row.total_cover_length / delta for row in rows if row.delta == delta], f"delta={delta:g}")
                    for delta in deltas
                ],
                xlabel="lambda",
                ylabel="total cover length / delta",
                logy=False,
            )
