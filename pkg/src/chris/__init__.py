"""Collaborative wearable/phone heart-rate inference: models, decision engine, simulator."""

__version__ = "0.1.0"
