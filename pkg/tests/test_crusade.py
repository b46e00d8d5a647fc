import itertools
import random

import pytest

from epidemic_cure.crusade import (Crusade, ExactCrusades, GraphTooLarge, ImpedanceTable,
                                   InvalidCrusade, RestrictedCrusades, brute_force_impedance,
                                   cut_profile, cutwidth, format_order, impedance,
                                   optimal_crusade, parse_order, restrict_crusade, width)
from epidemic_cure.graph import Graph, cut, make_complete, make_grid, make_line
from oracles import all_bags, random_connected_graph, small_instances


def _width_by_hand(g, start, order):
    bag = set(start)
    cuts = [cut(g, bag)]
    for v in order:
        bag.discard(v)
        cuts.append(cut(g, bag))
    return max(cuts)


def test_width_examples():
    g = make_line(4)
    assert width(g, Crusade(g.nodes, (3, 2, 1, 0))) == 1
    assert cut_profile(g, Crusade(g.nodes, (3, 2, 1, 0))) == [0, 1, 1, 1, 0]
    # bags {0,2,3}, {0,2}, {2} have cuts 2, 3, 2
    assert cut_profile(g, Crusade(g.nodes, (1, 3, 0, 2))) == [0, 2, 3, 2, 0]
    assert width(g, Crusade(g.nodes, (1, 3, 0, 2))) == 3
    assert width(g, Crusade(frozenset(), ())) == 0


def test_invalid_crusades():
    with pytest.raises(InvalidCrusade):
        Crusade(frozenset({0, 1}), (0, 0))
    with pytest.raises(InvalidCrusade):
        Crusade(frozenset({0, 1}), (2,))
    with pytest.raises(InvalidCrusade):
        width(make_line(2), Crusade(frozenset({5}), ()))


def test_partial_crusade():
    cr = Crusade(frozenset({0, 1, 2}), (2,))
    assert not cr.is_full
    assert cr.end == {0, 1}
    assert list(cr.bags()) == [{0, 1, 2}, {0, 1}]
    assert len(cr) == 2


@pytest.mark.parametrize("n", range(2, 13))
def test_line_cutwidth_is_one(n):
    assert cutwidth(make_line(n)) == 1


def test_impedance_spot_values():
    assert impedance(make_complete(4), range(4)) == 4
    assert brute_force_impedance(make_complete(4), range(4)) == 4
    assert impedance(make_line(5), []) == 0
    assert cutwidth(make_complete(2)) == 1
    assert cutwidth(make_line(8)) == 1
    grid = make_grid(3, 3)
    assert cutwidth(grid) == brute_force_impedance(grid, range(9))


def test_brute_force_single_node_bag():
    g = make_grid(2, 3)
    for v in range(g.n):
        assert brute_force_impedance(g, {v}) == cut(g, {v})


def test_brute_force_limits():
    with pytest.raises(ValueError):
        brute_force_impedance(make_line(12), range(10))


def test_exact_mode_cap():
    big = make_line(31)
    with pytest.raises(GraphTooLarge):
        ImpedanceTable(big)
    with pytest.raises(GraphTooLarge):
        cutwidth(big)


def test_table_rejects_other_graph():
    table = ImpedanceTable(make_line(4))
    with pytest.raises(ValueError):
        impedance(make_line(4), [0], table)


def test_optimal_crusade_line():
    g = make_line(4)
    cr = optimal_crusade(g, g.nodes)
    assert cr.is_full and width(g, cr) == 1
    # ties go to the smallest removable index
    assert cr.removal_order == (0, 1, 2, 3)
    assert optimal_crusade(g, []).removal_order == ()


def test_optimal_crusade_complete3():
    g = make_complete(3)
    cr = optimal_crusade(g, g.nodes)
    assert width(g, cr) == 2 == brute_force_impedance(g, g.nodes)
    assert sorted(cr.removal_order) == [0, 1, 2]


def test_restrict_crusade_examples():
    order = [3, 2, 1, 0]
    assert restrict_crusade(order, {0, 2}).removal_order == (2, 0)
    assert restrict_crusade(order, range(4)).removal_order == (3, 2, 1, 0)
    assert restrict_crusade(order, []).removal_order == ()
    with pytest.raises(InvalidCrusade):
        restrict_crusade([0, 0, 1], {0})
    with pytest.raises(InvalidCrusade):
        restrict_crusade([0, 1], {2})


def test_restricted_provider_needs_order():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        RestrictedCrusades(g)
    p = RestrictedCrusades(g, [2, 1, 0])
    assert p.width_bound() == 1
    assert p(frozenset({0, 2})).removal_order == (2, 0)


def test_order_serialisation():
    assert parse_order(format_order([3, 1, 2])) == [3, 1, 2]


@pytest.mark.parametrize("g", small_instances(n_random=8, seed=11), ids=lambda g: g.name)
def test_bellman_and_oracle_exhaustive(g):
    table = ImpedanceTable(g)
    w = cutwidth(g, table)
    order_v = optimal_crusade(g, g.nodes, table).removal_order
    for a in all_bags(g.n):
        d = table.impedance(a)
        assert d == brute_force_impedance(g, a)
        if a:
            children = min(table.impedance(a - {v}) for v in a)
            assert d == max(cut(g, a), children)
        assert cut(g, a) <= d <= w + cut(g, a)
        cr = optimal_crusade(g, a, table)
        assert width(g, cr) == d
        deltas = [table.impedance(b) for b in cr.bags()]
        assert all(x >= y for x, y in zip(deltas, deltas[1:]))
        restricted = restrict_crusade(order_v, a)
        assert restricted.is_full
        assert width(g, restricted) <= cut(g, a) + w


def test_oracle_random_bags():
    rng = random.Random(99)
    for _ in range(200):
        g = random_connected_graph(rng.randint(2, 9), rng, rng.uniform(0, 0.5))
        a = {v for v in range(g.n) if rng.random() < 0.6}
        assert impedance(g, a) == brute_force_impedance(g, a)


def test_width_matches_hand_count():
    g = make_grid(2, 3)
    for perm in itertools.islice(itertools.permutations(range(6)), 0, 720, 37):
        assert width(g, Crusade(g.nodes, perm)) == _width_by_hand(g, range(6), perm)


def test_exact_provider_shares_table():
    g = make_grid(3, 3)
    p = ExactCrusades(g)
    cr = p(frozenset({0, 4, 8}))
    assert width(g, cr) == impedance(g, {0, 4, 8}) == 8
    assert p.width_bound() == cutwidth(g) == 4
