"""Evolutionary discovery, certification, and benchmarking of straight-line
arithmetic approximations to transcendental functions."""

__version__ = "0.1.0"
