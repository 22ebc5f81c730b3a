# coding: utf-8
import logging
from dataclasses import MISSING, asdict, dataclass, fields
from typing import List, Optional

from django.conf import settings

from laboratory.exceptions import ConfigError
from laboratory.labparser import parse_file, revert
from laboratory.profiles import VelocityProfile

logger = logging.getLogger(__name__)

MODES = ("pipe", "disc")


@dataclass(frozen=True)
class RunConfig:
    """
    Validated run configuration
    """

    coeffs: List[float]
    radius: float = 1.0
    mode: str = "pipe"
    nu_list: List[float] = (1e-3, 10**-3.5, 1e-4, 10**-4.5, 1e-5)
    k: float = 1.0
    ell: int = 0
    ells: List[int] = (1, 2, 3)
    grid_size: int = 128
    lambda_samples: int = 129
    refine_tol: Optional[float] = None
    fit_window: List[float] = (1e-6, 1e-2)
    time_samples: int = 600
    random_samples: int = 20
    order_cap: int = 8
    delta_zero: float = 0.25
    delta_list: List[float] = (0.1, 0.01, 0.001)
    level_samples: int = 101
    orders: Optional[List[int]] = None
    c1: Optional[float] = None
    output_dir: str = "output"
    seed: int = 0

    @classmethod
    def defaults(cls):
        """
        Defaults taken from the project settings
        """
        return dict(
            grid_size=settings.LAB_GRID_SIZE,
            order_cap=settings.LAB_ORDER_CAP,
            delta_zero=settings.LAB_DELTA_ZERO,
            lambda_samples=settings.LAB_LAMBDA_SAMPLES,
            time_samples=settings.LAB_TIME_SAMPLES,
            random_samples=settings.LAB_RANDOM_SAMPLES,
            fit_window=list(settings.LAB_FIT_WINDOW),
            output_dir=settings.LAB_OUTPUT_DIR,
            seed=settings.LAB_SEED,
        )

    @classmethod
    def from_mapping(cls, mapping, **overrides):
        """
        Validate a parsed mapping
        :param mapping: Dictionary (from a configuration file)
        :param overrides: Values taking precedence (command flags), None values are ignored
        :return: Run configuration
        """
        known = {f.name: f for f in fields(cls)}
        if unknown := sorted(set(mapping) - set(known)):
            raise ConfigError(f"Unknown configuration key(s): {', '.join(unknown)}")
        declared = {name: f.default for name, f in known.items() if f.default is not MISSING}
        overrides = {key: value for key, value in overrides.items() if value is not None}
        data = {**declared, **cls.defaults(), **mapping, **overrides}
        if "coeffs" not in data:
            raise ConfigError("Missing configuration key: coeffs")
        values = {}
        for name, value in data.items():
            values[name] = _convert(name, value, known[name].type)
        config = cls(**values)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path, **overrides):
        return cls.from_mapping(parse_file(path), **overrides)

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"Mode must be one of {', '.join(MODES)}: {self.mode}")
        for name in ("coeffs", "nu_list", "ells", "delta_list"):
            if not getattr(self, name):
                raise ConfigError(f"List {name} must not be empty")
        if self.orders is not None and not self.orders:
            raise ConfigError("List orders must not be empty")
        if len(self.fit_window) != 2 or not 0 < self.fit_window[0] < self.fit_window[1] <= 1:
            raise ConfigError(f"Fit window must be two increasing ratios in (0, 1]: {self.fit_window}")
        positives = ("radius", "grid_size", "lambda_samples", "time_samples", "random_samples", "level_samples")
        for name in positives + ("order_cap", "delta_zero"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"Value {name} must be positive: {getattr(self, name)}")
        if any(nu <= 0 for nu in self.nu_list):
            raise ConfigError(f"Diffusivities must be positive: {self.nu_list}")
        if self.c1 is not None and not self.c1 > 0:
            raise ConfigError(f"Constant c1 must be positive: {self.c1}")

    def profile(self) -> VelocityProfile:
        return VelocityProfile(tuple(self.coeffs), radius=self.radius, order_cap=self.order_cap)

    def to_mapping(self):
        return {key: value for key, value in asdict(self).items() if value is not None}

    def revert(self):
        return revert(self.to_mapping())


def _convert(name, value, annotation):
    """
    Coerce a parsed value to the annotated field type
    """
    annotation = str(annotation)
    try:
        if value is None or (isinstance(value, str) and value.lower() == "none"):
            if "Optional" not in annotation:
                raise ConfigError(f"Value {name} is required")
            return None
        if "List" in annotation:
            if not isinstance(value, (list, tuple)):
                value = [value]
            item = int if "int" in annotation else float
            return [_scalar(item, v, name) for v in value]
        for kind in (int, float):
            if kind.__name__ in annotation:
                return _scalar(kind, value, name)
        if isinstance(value, (list, tuple, dict)):
            raise ConfigError(f"Value {name} must be a string: {value}")
        return str(value)
    except (TypeError, ValueError) as error:
        raise ConfigError(f"Invalid value for {name}: {value}") from error


def _scalar(kind, value, name):
    if isinstance(value, (bool, list, tuple, dict)):
        raise ConfigError(f"Value {name} must be a number: {value}")
    if isinstance(value, str):
        value = float(value)
    if kind is int and not float(value).is_integer():
        raise ConfigError(f"Value {name} must be an integer: {value}")
    return kind(value)
