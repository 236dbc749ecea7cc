"""Exact enumeration and disorder averaging for Sherrington-Kirkpatrick and
p-spin universality experiments."""

from .disorder import EnvironmentSpec, analytic_moments, derive_seed, empirical_moments, environment, sample_couplings
from .errors import AssumptionError, CapacityError, NumericalError, SizeError, ValidationError
from .exact_engine import gibbs_expectation, ground_state, interpolated_log_partition, log_partition
from .spin_model import CouplingTensor, ModelParams, SpinConfiguration, energy, flip_delta, symmetrize, tilted_probabilities

__version__ = "0.1.0"
