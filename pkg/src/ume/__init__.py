"""Interdiction of unreactive Markovian evaders.

Choose ``B`` edges of a directed graph to maximise the probability that
random-walking evaders are caught before reaching their targets.
"""
from .model import *  # noqa: F401,F403
from .solvers import *  # noqa: F401,F403
from .benchgen import *  # noqa: F401,F403
from .transforms import *  # noqa: F401,F403
from .mip import *  # noqa: F401,F403
from .io import *  # noqa: F401,F403
from . import model, solvers, benchgen, transforms, mip, io, bench  # noqa: F401

__version__ = "0.1.0"
