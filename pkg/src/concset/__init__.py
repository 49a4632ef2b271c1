"""Diffuse-interface min-max lab on conformally flat tori."""

__version__ = "0.1.0"
