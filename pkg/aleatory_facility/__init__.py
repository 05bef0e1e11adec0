"""Aleatory Facility - truthful facility location when some users have not shown up yet."""

__version__ = "0.1.0"
