"""Postselected communication capacities from the projective mutual information."""
from . import capacities, channels, divergences, hermkernel, projective, protocols
from .capacities import CapacityReport, capacity_report, oneshot_classical_bounds, oneshot_quantum_bounds
from .channels import (Channel, Subchannel, Supermap, apply_supermap, depolarizing, make_builtin,
                       random_channel, replacement)
from .errors import *  # noqa: F401,F403
from .projective import IomegaResult, iomega_channel, iomega_state

__version__ = "0.1.0"
