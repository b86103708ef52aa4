"""The six-solution worked example over D = {a, b, c} and its weight/order tables."""
from __future__ import annotations

from importlib import resources

from .csp import CspInstance, SolutionNetwork, load_csp, network_of
from .ordering import LocalOrientation, Orientation, parse_orders
from .weighting import WeightingSystem, load_tables

A, B, C = 0, 1, 2
# (x, y) pairs; "ab" means x = a, y = b
SIX_SOLUTIONS = [(A, B), (A, A), (B, B), (B, A), (C, A), (B, C)]

# clique-unitary weights that are not generated by any seed + dispatcher;
# entries equal to 1 are left implicit
SIX_SOLUTION_ADHOC_WEIGHTS = {
    ((C, A), 0): 0.2,
    ((A, A), 0): 0.7, ((A, A), 1): 0.1,
    ((A, B), 0): 0.1, ((A, B), 1): 0.9,
    ((B, A), 0): 0.1, ((B, A), 1): 0.7,
    ((B, B), 0): 0.9, ((B, B), 1): 0.1,
    ((B, C), 1): 0.2,
}


def data_path(name: str):
    return resources.files("csp_weighting") / "data" / name


def six_solution_instance() -> CspInstance:
    with resources.as_file(data_path("six_solution.csp")) as p:
        return load_csp(p)


def six_solution_network() -> SolutionNetwork:
    return network_of(six_solution_instance())


def six_solution_homogeneous() -> WeightingSystem:
    with resources.as_file(data_path("six_solution_homogeneous.tbl")) as p:
        return load_tables(p, 2, 3)


def six_solution_heterogeneous() -> WeightingSystem:
    with resources.as_file(data_path("six_solution_heterogeneous.tbl")) as p:
        return load_tables(p, 2, 3)


def two_minima_orientation() -> Orientation:
    return parse_orders(data_path("two_minima.ord").read_text(), 2, 3)


def one_minimum_orientation() -> Orientation:
    return parse_orders(data_path("one_minimum.ord").read_text(), 2, 3)


def cyclic_local_orientation() -> LocalOrientation:
    """b < a on two-value cliques, a < c < b on full cliques, for both variables."""
    def rule(x, delta):
        if delta == frozenset({A, B}):
            return [B, A]
        if delta == frozenset({A, B, C}):
            return [A, C, B]
        return sorted(delta)
    return LocalOrientation(rule)
