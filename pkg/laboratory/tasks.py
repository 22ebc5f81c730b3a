# coding: utf-8
import logging
from dataclasses import asdict

from celery import shared_task

from laboratory import semigroup

logger = logging.getLogger(__name__)


@shared_task(name="laboratory.sweep_row")
def sweep_row(**params):
    """
    Fitted worst-case decay rate of a single mode, computed by a worker
    :param params: Keyword arguments of the sweep row (profile, nu, k, ell and numerical options)
    :return: Row as dictionary
    """
    row = semigroup.sweep_row(**params)
    logger.info(f"Sweep row nu={row.nu:g} done on worker")
    return asdict(row)
