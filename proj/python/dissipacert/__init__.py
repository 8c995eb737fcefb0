"""Data-driven dissipativity certificates for linear discrete-time systems."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
