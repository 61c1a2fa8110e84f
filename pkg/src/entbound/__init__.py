"""Semi-device-independent lower bounds on multipartite entanglement from Bell data."""

from .bell import (BellExpression, Correlation, MeasurementConfig, Scenario, bell_operator,
                   born_correlation, evaluate, mabk, pauli_config)
from .entbounds import BoundReport, analyze, entropy_cap, gme_lower_bound, ree_lower_bound
from .nondegen import (NondegeneracyCertificate, PurityBound, certify, mabk_c2_upper,
                       mabk_certificate, purity_bound, seesaw_eigsum)
from .prodfit import brute_force_rank1, fhat, rank1_fit
from .simlab import NoiseModel, SweepSpec, apply_noise, finite_shots, ideal_configuration, sweep

__version__ = "0.1.0"
