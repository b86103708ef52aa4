import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _helpers import rng_from, satisfiable_instance, seeds, unitary_seed
from csp_weighting.csp import build_network, network_of, valuation_grid
from csp_weighting.errors import EmptyComponentError, FormatError, PreconditionError
from csp_weighting.fixtures import (SIX_SOLUTION_ADHOC_WEIGHTS, six_solution_heterogeneous,
                                    six_solution_homogeneous, six_solution_network)
from csp_weighting.weighting import (WeightingSystem, actual_weight, adhoc_decomposer_table,
                                     adhoc_solution_weights, check_covering, decomposer,
                                     decomposer_table, dump_tables, extend_witness, generator,
                                     is_unitary, parse_tables, random_system, set_weight,
                                     solution_weight, transfer, transfer_matrix, unladen_vector,
                                     unladen_weight, verify_weight_conservation, weight_table)

# per-solution weights of the six-solution example, frozen from a hand evaluation of
# seed + (own share of the forbidden seed mass) on each variable
HOMOGENEOUS_WEIGHTS = {
    (0, 0): 0.1 * (0.4 + 0.4 / 0.7 * 0.3),
    (0, 1): (0.1 + 0.1 / 0.3 * 0.7) * (0.3 + 0.3 / 0.7 * 0.3),
    (1, 0): 0.2 * 0.4,
    (1, 1): (0.2 + 0.2 / 0.3 * 0.7) * 0.3,
    (1, 2): 1.0 * 0.3,
    (2, 0): 0.7 * 1.0,
}


def test_six_solution_homogeneous_total():
    sys_, net = six_solution_homogeneous(), six_solution_network()
    assert set_weight(sys_, net) == pytest.approx(1.48, abs=1e-12)
    for sol, w in HOMOGENEOUS_WEIGHTS.items():
        assert solution_weight(sys_, net, sol) == pytest.approx(w, rel=1e-12)


def test_six_solution_heterogeneous_total():
    assert set_weight(six_solution_heterogeneous(), six_solution_network()) == pytest.approx(1.55, abs=1e-12)


def test_six_solution_adhoc_table_is_clique_unitary_and_totals_072():
    net = six_solution_network()
    w = np.ones((len(net), net.n))
    for (sol, x), value in SIX_SOLUTION_ADHOC_WEIGHTS.items():
        w[net.index_of(sol), x] = value
    for x in range(net.n):
        for clique in net.cliques(x):
            assert w[list(clique), x].sum() == pytest.approx(1.0, abs=1e-12)
    assert adhoc_solution_weights(net, SIX_SOLUTION_ADHOC_WEIGHTS).sum() == pytest.approx(0.72, abs=1e-9)


def test_adhoc_weights_fail_to_cover():
    # clique-unitary weights alone are not enough: total below 1 means some valuation is short
    net = six_solution_network()
    seed = six_solution_homogeneous().seed
    delta = adhoc_decomposer_table(net, SIX_SOLUTION_ADHOC_WEIGHTS, seed)
    np.testing.assert_allclose(transfer_matrix(delta).sum(axis=1),
                               adhoc_solution_weights(net, SIX_SOLUTION_ADHOC_WEIGHTS), atol=1e-12)
    rep = check_covering(WeightingSystem(seed), net, net.solutions, delta=delta)
    assert not rep.covers and rep.slack < 0


def test_generator_noticeable_values():
    sys_ = six_solution_heterogeneous()
    # singleton clique keeps the whole mass
    assert generator(sys_, 0, 1, {1}) == pytest.approx(1.0)
    # full clique gives the seed back
    for a in range(3):
        assert generator(sys_, 1, a, {0, 1, 2}) == pytest.approx(sys_.seed[1, a])
    assert generator(sys_, 0, 2, {0, 1}) == 0.0
    with pytest.raises(ValueError):
        generator(sys_, 0, 0, set())


@settings(max_examples=80, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_generator_is_unitary_on_every_clique(seed, n, d):
    rng = rng_from(seed)
    sys_ = random_system(rng, n, d)
    for x in range(n):
        for k in range(1, d + 1):
            for delta in itertools.combinations(range(d), k):
                assert sum(generator(sys_, x, a, delta) for a in delta) == pytest.approx(1.0, abs=1e-12)


def _check_weight_identities(sys_, net):
    u = unladen_vector(sys_)
    assert u.sum() == pytest.approx(1.0, abs=1e-9)
    delta = decomposer_table(sys_, net)
    w = weight_table(sys_, net)
    np.testing.assert_allclose(delta.sum(axis=2), w, atol=1e-12)
    t = transfer_matrix(delta)
    np.testing.assert_allclose(t.sum(axis=1), w.prod(axis=1), atol=1e-12)
    for comp in net.components:
        assert check_covering(sys_, net, comp).covers
    for r in verify_weight_conservation(sys_, net):
        assert r.weight >= 1 - 1e-9


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_row_sums_transfer_totals_and_covering(seed):
    rng = rng_from(seed)
    n, d = int(rng.integers(1, 4)), int(rng.integers(2, 4))
    inst = satisfiable_instance(rng, n, d)
    _check_weight_identities(random_system(rng, n, d, zero_prob=0.2), network_of(inst))


def test_transfer_scalar_route_matches_matrix(rng):
    inst = satisfiable_instance(rng, 3, 3)
    net, sys_ = network_of(inst), random_system(rng, 3, 3)
    t = transfer_matrix(decomposer_table(sys_, net))
    grid = valuation_grid(3, 3)
    for i in range(len(net)):
        for j, v in enumerate(grid):
            assert transfer(sys_, net, i, v) == pytest.approx(t[i, j], abs=1e-15)


def test_decomposer_matches_written_rule(rng):
    inst = satisfiable_instance(rng, 3, 3)
    net, sys_ = network_of(inst), random_system(rng, 3, 3)
    for i, sol in enumerate(net.solutions):
        for x in range(3):
            allowed = net.allowed(i, x)
            mass = sum(sys_.dispatcher[x, b] for b in allowed)
            for a in range(3):
                if a == sol[x]:
                    expected = sys_.seed[x, a]
                elif a in allowed:
                    expected = 0.0
                else:
                    expected = sys_.dispatcher[x, sol[x]] / mass * sys_.seed[x, a]
                assert decomposer(sys_, net, i, x, a) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_extend_witness_spreads_exactly_and_under_transfer(seed):
    rng = rng_from(seed)
    n, d = int(rng.integers(1, 4)), int(rng.integers(2, 4))
    net = network_of(satisfiable_instance(rng, n, d))
    sys_ = random_system(rng, n, d)
    t = transfer_matrix(decomposer_table(sys_, net))
    for comp in net.components:
        for j, v in enumerate(valuation_grid(n, d)):
            wit = extend_witness(sys_, net, comp, v)
            assert wit.total == pytest.approx(unladen_weight(sys_, v), abs=1e-12)
            seen = set()
            for i, f in wit.leaves:
                assert i in comp and i not in seen
                seen.add(i)
                assert f <= t[i, j] + 1e-12
            for x, a in wit.restriction.items():
                assert all(net.solutions[i][x] == a for i, _ in wit.leaves)


def test_extend_witness_rejects_empty_component():
    with pytest.raises(EmptyComponentError):
        extend_witness(six_solution_homogeneous(), six_solution_network(), [], (0, 0))


def test_uniform_weights_on_unconstrained_network_sum_to_one():
    net = build_network(itertools.product(range(3), repeat=2))
    sys_ = WeightingSystem.uniform(2, 3)
    assert set_weight(sys_, net) == pytest.approx(1.0)


def test_lone_solution_weighs_one():
    net = build_network([(1, 0, 2)], d=3)
    sys_ = random_system(np.random.default_rng(3), 3, 3)
    assert solution_weight(sys_, net, (1, 0, 2)) == pytest.approx(1.0)


def test_preconditions():
    with pytest.raises(PreconditionError):
        WeightingSystem([[0.5, -0.1]])
    with pytest.raises(PreconditionError):
        WeightingSystem([[0.5, 0.5]], [[1.0, 0.0]])
    with pytest.raises(PreconditionError):
        verify_weight_conservation(WeightingSystem([[0.5, 0.7]]), build_network([(0,)]))
    with pytest.raises(ValueError):
        WeightingSystem([[0.5, 0.5]], [[1.0, 1.0, 1.0]])


def test_tables_round_trip_and_flags():
    sys_ = six_solution_heterogeneous()
    again = parse_tables(dump_tables(sys_), 2, 3)
    np.testing.assert_array_equal(again.seed, sys_.seed)
    np.testing.assert_array_equal(again.dispatcher, sys_.dispatcher)
    assert not sys_.homogeneous and six_solution_homogeneous().homogeneous
    assert parse_tables("uniform\n", 2, 3).unitary
    assert is_unitary([[0.2, 0.8]]) and not is_unitary([[0.2, 0.7]])


@pytest.mark.parametrize("text", [
    "seed 0 0 0.5\n",
    "seed 0 0 x\n" + "seed 0 1 1\n",
    "weight 0 0 1\n",
    "seed 5 0 1\n",
    "seed 0 0 0.5\nseed 0 1 0.5\n",
])
def test_table_format_errors(text):
    with pytest.raises(FormatError):
        parse_tables(text, 1, 2)


def test_actual_weight_by_index_and_tuple_agree():
    sys_, net = six_solution_heterogeneous(), six_solution_network()
    for i, sol in enumerate(net.solutions):
        assert actual_weight(sys_, net, i, 0) == actual_weight(sys_, net, sol, 0)
