# coding: utf-8
import datetime
import logging
import os
import sys
from functools import partial
from pathlib import Path

from django.core.management import BaseCommand
from tqdm.auto import tqdm

from laboratory.config import RunConfig
from laboratory.exceptions import LabError
from laboratory.reports import write_text

logger = logging.getLogger(__name__)

tqdm = partial(tqdm, bar_format="{l_bar:.>40}{bar}{r_bar:.<40}")

DEFAULT_CONFIG = str(Path(__file__).resolve().parents[3] / "configs" / "default.txt")


class LabCommand(BaseCommand):
    """
    Base of the laboratory commands: loads the run configuration, writes the effective configuration
    next to the reports and maps laboratory errors to exit codes
    """

    leave_locale_alone = True
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument("--config", type=str, default=DEFAULT_CONFIG, help="Path to run configuration file")
        parser.add_argument("--out", type=str, help="Output directory (overrides the configuration)")
        parser.add_argument("--jobs", type=int, default=1, help="Number of worker processes")
        parser.add_argument("--seed", type=int, help="Random seed (overrides the configuration)")
        parser.add_argument("--plot", action="store_true", help="Write SVG plots")

    def handle(self, config=None, out=None, jobs=1, seed=None, plot=False, *args, **options):
        start_time = datetime.datetime.now()
        try:
            run_config = RunConfig.from_file(config or DEFAULT_CONFIG, output_dir=out, seed=seed)
            directory = run_config.output_dir
            os.makedirs(directory, exist_ok=True)
            write_text(os.path.join(directory, "config.txt"), run_config.revert())
            self.run(run_config, directory, jobs=max(1, jobs or 1), plot=plot, **options)
        except LabError as error:
            self.stderr.write(f"error: {error.code}: {error}", style_func=lambda message: message)
            logger.debug(f"{self.__module__} failed", exc_info=True)
            sys.exit(error.exit_code)
        total_time = (datetime.datetime.now() - start_time).total_seconds()
        logger.info(f"{self.__module__.rsplit('.', 1)[-1]} done in {total_time:0.2f}s")

    def run(self, config: RunConfig, directory: str, jobs: int = 1, plot: bool = False, **options):
        raise NotImplementedError

    @staticmethod
    def path(directory, filename):
        return os.path.join(directory, filename)
