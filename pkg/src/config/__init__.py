"""Configuration module for the moment-method toolkit."""

from .settings import get_settings, Settings, COUPLING_PRESETS, DEFAULT_TOLERANCES, EXIT_CODES

__all__ = [
    "get_settings",
    "Settings",
    "COUPLING_PRESETS",
    "DEFAULT_TOLERANCES",
    "EXIT_CODES",
]
