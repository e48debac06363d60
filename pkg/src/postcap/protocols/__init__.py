"""Protocol constructions and the conditional error measures used to score them."""
from .achiever import (AchieverParameters, achiever_parameters, build_pna_achiever, t_choi,
                       verify_scaling)
from .metrics import (conditional_error_classical, conditional_error_quantum, conditional_fidelity,
                      me_fidelity)
from .nonsignalling import (NSCheckReport, check_nonsignalling, check_replacement_preserving,
                            fit_replacement, flag_projector, ns_report, pna_normalize, spanning_states)
from .pea import (PEATriple, TeleportProtocol, achievable_dm, bell_states, build_pea_supermap,
                  build_teleport, ctc_counterexample, flag_overlaps, heisenberg_weyl, identity_teleport,
                  superdense_lift, teleport_error_bound, teleport_triple)
