"""Simulation toolkit for a cavity-QED quantum repeater with photon-atom gates."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"
