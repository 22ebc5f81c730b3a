# coding: utf-8
from pathlib import Path

from configurations import Configuration, values

# Build paths inside the project like this: BASE_DIR / "subdir"
BASE_DIR = Path(__file__).resolve().parent.parent
ENVFILE = BASE_DIR / ".env"


class Base(Configuration):
    if ENVFILE.exists():
        DOTENV = ENVFILE

    DEBUG = values.BooleanValue(False)

    # Only used by Django internals, nothing is signed by the laboratory
    SECRET_KEY = values.SecretValue()

    # Application definition
    INSTALLED_APPS = [
        # Default
        "django.contrib.contenttypes",
        # Applications
        "laboratory",
    ]

    # No database is needed, every report goes to files
    DATABASES = {}
    DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

    # Internationalization
    LANGUAGE_CODE = values.Value("en")
    TIME_ZONE = values.Value("UTC")
    USE_I18N = values.BooleanValue(False)
    USE_TZ = values.BooleanValue(True)

    # Numerical defaults (overridden by run configuration files, then by command flags)
    LAB_GRID_SIZE = values.IntegerValue(128)
    LAB_ORDER_CAP = values.IntegerValue(8)
    LAB_DELTA_ZERO = values.FloatValue(0.25)
    LAB_LAMBDA_SAMPLES = values.IntegerValue(129)
    LAB_TIME_SAMPLES = values.IntegerValue(600)
    LAB_RANDOM_SAMPLES = values.IntegerValue(20)
    LAB_FIT_WINDOW = values.ListValue([1e-6, 1e-2], converter=float)
    LAB_OUTPUT_DIR = values.Value("output")
    LAB_SEED = values.IntegerValue(0)

    # Logging configuration
    LOGGING = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "simple": {
                "format": "[%(asctime)s] %(levelname)7s: %(message)s",
                "datefmt": "%d/%m/%Y %H:%M:%S",
            },
        },
        "handlers": {
            "console": {
                "level": "INFO",
                "class": "logging.StreamHandler",
                "formatter": "simple",
            },
        },
        "loggers": {
            "": {
                "handlers": ["console"],
                "level": "INFO",
                "propagate": True,
            },
            "laboratory": {
                "handlers": ["console"],
                "level": "INFO",
                "propagate": False,
            },
        },
    }

    # Sweeps are fanned out to celery workers only when enabled
    CELERY_ENABLE = values.BooleanValue(False)


class Prod(Base):
    """
    Production configuration (sweeps dispatched to celery workers)
    """

    DEBUG = False

    LOGGING = {
        **Base.LOGGING,
        "handlers": {
            **Base.LOGGING["handlers"],
            "file": {
                "level": "WARNING",
                "class": "logging.FileHandler",
                "filename": "laboratory.log",
                "formatter": "simple",
            },
        },
        "loggers": {
            **Base.LOGGING["loggers"],
            "laboratory": {
                "handlers": ["console", "file"],
                "level": "INFO",
                "propagate": False,
            },
        },
    }

    # Celery configuration, sweep rows travel as pickled dataclasses and come back through the result backend
    CELERY_ENABLE = values.BooleanValue(True)
    CELERY_BROKER_URL = values.Value("redis://localhost:6379/1", environ_name="CELERY_BROKER_URL")
    CELERY_BROKER_TRANSPORT_OPTIONS = {"visibility_timeout": 6 * 3600}
    CELERY_RESULT_BACKEND = values.Value("redis://localhost:6379/2", environ_name="CELERY_RESULT_BACKEND")
    CELERY_ACCEPT_CONTENT = ["json", "pickle"]
    CELERY_TASK_SERIALIZER = CELERY_RESULT_SERIALIZER = "pickle"
    CELERY_RESULT_EXPIRES = 24 * 3600
    # A sweep row runs for minutes: one row per worker process at a time
    CELERY_WORKER_PREFETCH_MULTIPLIER = 1
    CELERY_TASK_ACKS_LATE = True
    CELERY_TASK_ALWAYS_EAGER = values.BooleanValue(False, environ_name="CELERY_TASK_ALWAYS_EAGER")
    CELERY_TASK_DEFAULT_QUEUE = values.Value("laboratory", environ_name="QUEUE_NAME")


class Test(Base):
    """
    Development configuration
    """

    DEBUG = True

    # Celery configuration
    CELERY_TASK_ALWAYS_EAGER = True
    CELERY_TASK_EAGER_PROPAGATES = True
    CELERY_RESULT_BACKEND = "cache"
    CELERY_CACHE_BACKEND = "memory"
