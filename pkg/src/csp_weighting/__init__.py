"""Weighted counting of CSP solutions: seeds, dispatchers, orientations and the {0,1,*} model."""
from .csp import (CspInstance, Constraint, SolutionNetwork, build_network, enumerate_solutions,
                  load_csp, network_of, parse_csp)
from .errors import (CapacityError, CspError, ExternalFormulaRequired, FormatError,
                     MalformedInstanceError, ParameterError, PreconditionError)
from .ordering import (LocalOrientation, Orientation, Renaming, greedy_order_construction,
                       minimal_elements, renaming_closure, verify_set_equality)
from .weighting import (WeightingSystem, check_covering, extend_witness, set_weight,
                        solution_weight, verify_weight_conservation)

__all__ = [
    "CapacityError", "Constraint", "CspError", "CspInstance", "ExternalFormulaRequired",
    "FormatError", "LocalOrientation", "MalformedInstanceError", "Orientation", "ParameterError",
    "PreconditionError", "Renaming", "SolutionNetwork", "WeightingSystem", "build_network",
    "check_covering", "enumerate_solutions", "extend_witness", "greedy_order_construction",
    "load_csp", "minimal_elements", "network_of", "parse_csp", "renaming_closure", "set_weight",
    "solution_weight", "verify_set_equality", "verify_weight_conservation",
]
