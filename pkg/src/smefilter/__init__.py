"""Positivity-preserving quantum filtering for diffusive stochastic master equations."""
from .control import ControlStrategy, Controller, apply_control
from .integrators import (
    HamiltonianOrder, SchemeKind, StepScheme, filter_trajectory, kraus_step, lindblad_propagate,
    milstein_step, simulate_trajectory,
)
from .measurement import MeasurementRecord, NoiseStream, quantize
from .metrics import concurrence, fidelity, negativity, purity
from .model import SmeModel, TwoQubitParams, steps_to_dt, two_qubit_model
from .state import maximally_mixed, pure_product

__version__ = "0.1.0"
