# coding: utf-8
import logging

from laboratory.management.commands._base import LabCommand
from laboratory.reports import write_csv

logger = logging.getLogger(__name__)


class Command(LabCommand):
    help = "Detect the nondegeneracy order of the velocity profile"

    def run(self, config, directory, jobs=1, plot=False, **options):
        profile = config.profile()
        low, high = profile.value_range()
        critical = profile.critical_points()
        row = dict(
            coeffs=" ".join(f"{c:g}" for c in profile.coeffs),
            radius=profile.radius,
            m=profile.order,
            critical_points=" ".join(f"{r:.12g}" for r in critical),
            local_orders=" ".join(str(profile.local_order(r)) for r in critical),
            value_min=low,
            value_max=high,
        )
        write_csv(self.path(directory, "order.csv"), list(row), [row])
        logger.info(f"Profile {list(profile.coeffs)} on [0, {profile.radius:g}] has order m={profile.order}")
        self.stdout.write(f"m={profile.order}")
