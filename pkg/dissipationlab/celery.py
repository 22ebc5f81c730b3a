# coding: utf-8
import os

import configurations
from celery import Celery

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "dissipationlab.settings")
os.environ.setdefault("DJANGO_CONFIGURATION", "Prod")
configurations.setup()

app = Celery("dissipationlab")
app.config_from_object("django.conf:settings", namespace="CELERY")
app.autodiscover_tasks()
