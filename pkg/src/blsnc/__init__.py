"""Delay bounds for burst-limiting-shaped static-priority Ethernet ports."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("blsnc")
except PackageNotFoundError:
    __version__ = "0.0.0"
