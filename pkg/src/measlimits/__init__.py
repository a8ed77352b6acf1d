"""Finite-grid toolkit for quantum measurement limitations.

Observables, instruments, measurement schemes, error measures and joint
sequential measurements on a periodic position/momentum grid.
"""
from . import config
from .hilbert import OutcomeGrid
from .observables import Distribution, Povm
from .instruments import Instrument
from .probes import Probe

__all__ = ["config", "OutcomeGrid", "Distribution", "Povm", "Instrument", "Probe"]
__version__ = "0.1.0"
