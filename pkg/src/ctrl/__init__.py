"""Continuous-transition augmentation for off-policy actor-critic learning."""

__version__ = "0.1.0"
