import math

import pytest

from epidemic_cure.graph import Bag, Graph, make_grid, make_line
from epidemic_cure.policy import (baseline_degree_proportional, baseline_uniform, degree_policy,
                                  no_curing_policy, uniform_policy)
from epidemic_cure.sim import (CURE, INFECTION, Event, InvalidAllocation, RngStream, SimState,
                               Trace, check_allocation, run, step)
from oracles import mean_extinction_time_ctmc


def single_node():
    return Graph.from_edges(1, [])


def within_3_sigma(values, expected):
    n = len(values)
    mean = sum(values) / n
    var = sum((x - mean) ** 2 for x in values) / (n - 1)
    return abs(mean - expected) <= 3 * math.sqrt(var / n), mean


class FullBudget:
    """Whole budget on the lowest-index infected node."""

    phase = "full"

    def start(self, g, infected, budget):
        self.budget = budget

    def allocate(self, infected):
        return {min(infected): self.budget} if infected else {}

    def on_event(self, event, infected_after):
        pass

    def pop_phase_tags(self):
        return []


class Overspend(FullBudget):
    def allocate(self, infected):
        return {min(infected): self.budget * 1.5}


def test_rng_streams_reproducible_and_distinct():
    a, b, c = RngStream(7, 0), RngStream(7, 0), RngStream(7, 1)
    xs = [a.uniform() for _ in range(2000)]
    assert xs == [b.uniform() for _ in range(2000)]
    assert xs != [c.uniform() for _ in range(2000)]
    assert all(0 <= x < 1 for x in xs)


def test_step_single_isolated_node():
    g = single_node()
    rng = RngStream(1, 0)
    r = 4.0
    times = []
    for _ in range(20000):
        ev, s = step(g, SimState(0.0, Bag({0})), {0: r}, r, rng)
        assert ev.kind == CURE and ev.node == 0 and s.infected == set()
        times.append(ev.at)
    ok, mean = within_3_sigma(times, 1 / r)
    assert ok, mean


def test_step_line2_only_infection():
    g = make_line(2)
    rng = RngStream(2, 0)
    times = []
    for _ in range(20000):
        ev, s = step(g, SimState(0.0, Bag({0})), {}, 1.0, rng)
        assert (ev.kind, ev.node) == (INFECTION, 1)
        assert s.infected == {0, 1} and s.event_count == 1
        times.append(ev.at)
    ok, mean = within_3_sigma(times, 1.0)
    assert ok, mean


def test_step_line3_cure_probability_half():
    g = make_line(3)
    rng = RngStream(3, 0)
    n = 40000
    cures = 0
    for _ in range(n):
        ev, _ = step(g, SimState(0.0, Bag({1})), {1: 2.0}, 2.0, rng)
        cures += ev.kind == CURE
    assert abs(cures / n - 0.5) <= 3 * math.sqrt(0.25 / n)


def test_step_zero_rate_returns_none():
    g = make_line(3)
    assert step(g, SimState(0.0, Bag({0, 1, 2})), {}, 1.0, RngStream(0)) is None


@pytest.mark.parametrize("alloc", [{0: 1.5}, {1: 0.5}, {0: -0.1}])
def test_invalid_allocations(alloc):
    with pytest.raises(InvalidAllocation):
        check_allocation(alloc, {0}, 1.0)


def test_budget_tolerance():
    check_allocation({0: 1.0 + 1e-12}, {0}, 1.0)


def test_run_empty_initial_is_extinct_at_zero():
    tr = run(make_line(3), FullBudget(), [], 1.0, RngStream(0))
    assert tr.outcome.extinct and tr.outcome.at == 0.0 and tr.events == []


def test_run_no_curing_fills_graph_then_stalls():
    g = make_grid(2, 3)
    tr = run(g, no_curing_policy(), [0], 1.0, RngStream(4), max_events=100)
    assert not tr.outcome.extinct
    assert tr.final(g) == g.nodes
    assert all(e.kind == INFECTION for e in tr.events)
    assert len(tr.events) == g.n - 1


def test_run_caps_censor():
    g = make_line(6)
    tr = run(g, uniform_policy(), g.nodes, 0.5, RngStream(5), max_events=3)
    assert (tr.outcome.extinct, tr.outcome.reason, len(tr.events)) == (False, "max_events", 3)
    tr = run(g, uniform_policy(), g.nodes, 0.5, RngStream(5), max_time=0.01)
    assert not tr.outcome.extinct and tr.outcome.at == 0.01


def test_run_rejects_overspending_policy():
    with pytest.raises(InvalidAllocation):
        run(make_line(2), Overspend(), [0], 1.0, RngStream(0))


def test_run_single_node_mean_extinction():
    g = single_node()
    r = 2.0
    taus = [run(g, FullBudget(), [0], r, RngStream(11, i)).outcome.at for i in range(10000)]
    ok, mean = within_3_sigma(taus, 1 / r)
    assert ok, mean


@pytest.mark.parametrize("make_policy", [uniform_policy, degree_policy])
def test_trace_replay_and_accounting(make_policy):
    g = make_grid(2, 3)
    for i in range(200):
        tr = run(g, make_policy(), g.nodes, 3.0, RngStream(12, i))
        bags = list(tr.replay(g))
        assert tr.outcome.extinct and bags[-1] == set()
        n_inf, n_cure = tr.counts()
        assert n_cure - n_inf == g.n
        assert tr.n_events == len(tr.events)


def test_run_deterministic_per_stream():
    g = make_line(5)
    logs = [run(g, degree_policy(), g.nodes, 2.0, RngStream(21, 3)).to_log() for _ in range(2)]
    assert logs[0] == logs[1]
    other = run(g, degree_policy(), g.nodes, 2.0, RngStream(21, 4)).to_log()
    assert other != logs[0]


def test_run_matches_step_sequence():
    g = make_line(4)
    tr = run(g, uniform_policy(), g.nodes, 2.0, RngStream(33, 0))
    rng = RngStream(33, 0)
    s = SimState(0.0, g.nodes)
    for ev in tr.events:
        got, s = step(g, s, baseline_uniform(g, s.infected, 2.0), 2.0, rng)
        assert (got.kind, got.node, got.at) == (ev.kind, ev.node, ev.at)
    assert s.infected == set()


def test_replay_detects_bad_infection():
    g = make_line(3)
    tr = run(g, uniform_policy(), {0}, 1.0, RngStream(0))
    bad = Trace(Bag({0}), [Event(INFECTION, 2, 0.1)])
    with pytest.raises(AssertionError):
        list(bad.replay(g))
    list(tr.replay(g))


def test_line3_degree_policy_matches_ctmc():
    g = make_line(3)
    r = 3.0
    expected = mean_extinction_time_ctmc(g, baseline_degree_proportional, r)[frozenset(range(3))]
    taus = [run(g, degree_policy(), g.nodes, r, RngStream(44, i)).outcome.at
            for i in range(20000)]
    ok, mean = within_3_sigma(taus, expected)
    assert ok, (mean, expected)


def test_ctmc_oracle_line2_by_hand():
    # T01 = 1/2 + T0 and T0 = 1/3 + T01/3 give T01 = 5/4
    times = mean_extinction_time_ctmc(make_line(2), baseline_uniform, 2.0)
    assert times[frozenset({0, 1})] == pytest.approx(1.25)
    assert times[frozenset({0})] == pytest.approx(0.75)
