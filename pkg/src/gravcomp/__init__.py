"""Gravity and cable-disturbance identification and compensation for serial arms."""

__version__ = "0.1.0"
