import os

from halvingeta import __version__
from halvingeta.halvingeta_common.models import HalvingError


class SettingError(HalvingError):
    pass


class Settings:
    """Manage settings for halvingeta"""

    ENVIRONMENT = {
        "endpoint": "HALVINGETA_ENDPOINT",
        "timeout": "HALVINGETA_TIMEOUT",
        "window": "HALVINGETA_WINDOW",
    }
    FLOAT_LABELS = ["timeout"]
    INTEGER_LABELS = ["window"]

    def __init__(self, environ=None):
        self.version = __version__
        self.settings = {
            "endpoint": None,
            "timeout": 10.0,
            "window": 2016,
        }
        self.all_labels = ["endpoint", "timeout", "window"]
        self.load_environment(os.environ if environ is None else environ)

    def load_environment(self, environ):
        """Load overrides from HALVINGETA_* environment variables"""
        for label, variable in self.ENVIRONMENT.items():
            raw_value = environ.get(variable)
            if raw_value is None or not raw_value.strip():
                continue
            self.set(label, raw_value.strip(), source=variable)

    def set(self, label, value, source=None):
        """Set a setting, converting and validating it"""
        source = source or label

        if label in self.FLOAT_LABELS:
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise SettingError(f"'{source}={value}': Invalid setting.")
            if not value > 0:
                raise SettingError(f"'{source}={value}': must be positive.")

        elif label in self.INTEGER_LABELS:
            try:
                value = int(value)
            except (TypeError, ValueError):
                raise SettingError(f"'{source}={value}': Invalid setting.")
            if value < 1:
                raise SettingError(f"'{source}={value}': must be at least 1.")

        elif label not in self.all_labels:
            raise SettingError(f"'{label}': Unknown setting.")

        self.settings[label] = value

    def override(self, **values):
        """Apply command-line values that were actually given"""
        for label, value in values.items():
            if value is not None:
                self.set(label, value)

    def as_mapping(self):
        return {label: self.settings[label] for label in self.all_labels}
