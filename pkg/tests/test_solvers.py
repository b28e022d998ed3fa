import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from helpers import chain, diamond, random_problem
from ume import (
    EvalCounter,
    GainEngine,
    EvaderSpec,
    GainEntry,
    Graph,
    InvalidInstanceError,
    ProblemInstance,
    Solution,
    brute_force_solve,
    fast_init_gains,
    greedy_solve,
    marginal_gain,
    objective,
    priority_greedy_solve,
    verify_bound,
)


def closed_form(p, B=None):
    B = p.budget if B is None else B
    return p.n_evaders * (B * p.graph.n_edges - B * (B - 1) // 2)


def two_clusters():
    """Two disjoint single-edge evaders with weights 0.6 and 0.4, d = 1."""
    g = Graph.from_edges(4, [(0, 1, 1.0, 1.0), (2, 3, 1.0, 1.0)])
    M1 = sp.csr_matrix(([1.0], ([0], [1])), shape=(4, 4))
    M2 = sp.csr_matrix(([1.0], ([2], [3])), shape=(4, 4))
    return ProblemInstance(g, [EvaderSpec(0.6, [1, 0, 0, 0], 1, M1),
                               EvaderSpec(0.4, [0, 0, 1, 0], 3, M2)], 2)


# --- marginal gains -----------------------------------------------------------

def test_marginal_gain_chain():
    p = chain(d=0.5)
    assert marginal_gain(p, (), 0) == pytest.approx(0.5)
    assert marginal_gain(p, (0,), 1) == pytest.approx(0.25)
    with pytest.raises(InvalidInstanceError):
        marginal_gain(p, (0,), 0)


def test_marginal_gain_unused_edge():
    g = Graph.from_edges(4, [(0, 1, 1.0, 0.5), (1, 2, 1.0, 0.5), (3, 2, 1.0, 0.5)])
    M = sp.csr_matrix(([1.0, 1.0, 1.0], ([0, 1, 3], [1, 2, 2])), shape=(4, 4))
    p = ProblemInstance(g, [EvaderSpec(1.0, [1, 0, 0, 0], 2, M)], 1)
    assert marginal_gain(p, (), 2) == 0


def test_marginal_gain_counts_only_the_new_solve():
    p = random_problem(np.random.default_rng(4), 6, n_evaders=3)
    engine = GainEngine(p)
    marginal_gain(p, (), 0, engine=engine)
    assert engine.counter.value == 3


# --- basic greedy -------------------------------------------------------------

def test_greedy_diamond_budget_one():
    sol = greedy_solve(diamond(p_a=0.8, budget=1))
    assert sol.selected == (0,)
    assert sol.objective == pytest.approx(0.8)


def test_greedy_diamond_budget_two():
    sol = greedy_solve(diamond(p_a=0.8, budget=2))
    assert sol.selected == (0, 1)
    assert sol.objective == pytest.approx(1.0)


def test_greedy_zero_budget():
    p = diamond(budget=0)
    sol = greedy_solve(p)
    assert sol.selected == () and sol.eval_count == 0
    assert sol.objective == objective(p, ())


def test_greedy_spends_whole_budget_unless_early_stop():
    p = chain(d=1.0, budget=2)
    assert len(greedy_solve(p).selected) == 2
    assert greedy_solve(p).gains[1] == 0
    assert greedy_solve(p, early_stop=True).selected == (0,)
    assert priority_greedy_solve(p, early_stop=True).selected == (0,)


def test_greedy_parallel_matches_serial():
    p = random_problem(np.random.default_rng(5), 12, budget=4, acyclic=False)
    a, b = greedy_solve(p), greedy_solve(p, workers=4)
    assert a.selected == b.selected and a.objective == b.objective
    assert a.eval_count == b.eval_count == closed_form(p)


def test_shared_counter_accumulates():
    p = chain(budget=2)
    counter = EvalCounter()
    greedy_solve(p, counter=counter)
    greedy_solve(p, counter=counter)
    assert counter.value == 2 * closed_form(p)


# --- fast init and priority greedy --------------------------------------------

def test_fast_init_examples():
    assert fast_init_gains(chain(d=0.5)) == [(0, 0.5), (1, 0.5)]
    assert dict(fast_init_gains(diamond(p_a=0.8)))[0] == pytest.approx(0.8)


def test_fast_init_is_linear_in_weight():
    p = two_clusters()
    gains = dict(fast_init_gains(p))
    assert gains[0] == pytest.approx(0.6) and gains[1] == pytest.approx(0.4)


def test_fast_init_is_upper_bound_on_cyclic_chain():
    # 0 -> 1 -> 0 loop before exiting to 2: edge (0,1) is traversed twice on average
    g = Graph.from_edges(3, [(0, 1, 1.0, 0.5), (1, 0, 1.0, 0.5), (1, 2, 1.0, 0.5)])
    M = sp.csr_matrix(([1.0, 0.5, 0.5], ([0, 1, 1], [1, 0, 2])), shape=(3, 3))
    p = ProblemInstance(g, [EvaderSpec(1.0, [1, 0, 0], 2, M)], 1)
    bound = dict(fast_init_gains(p))[0]
    assert bound == pytest.approx(1.0)
    assert marginal_gain(p, (), 0) < bound


def test_priority_chain_eval_count():
    p = chain(d=0.5, budget=2)
    pri, bas = priority_greedy_solve(p), greedy_solve(p)
    assert pri.selected == bas.selected == (0, 1)
    assert pri.eval_count == 2 and bas.eval_count == 3
    assert pri.step_evals == (1, 2)


def test_priority_two_clusters_single_recompute():
    p = two_clusters()
    sol = priority_greedy_solve(p)
    assert sol.selected == (0, 1)
    # fast init (2) + nothing at step 1 + one pop-check recompute (2) at step 2
    assert sol.step_evals == (2, 4)
    assert greedy_solve(p).eval_count == closed_form(p) == 6


def test_priority_on_cyclic_chain_recomputes_first_step():
    p = random_problem(np.random.default_rng(8), 10, acyclic=False, budget=3)
    sol = priority_greedy_solve(p)
    assert sol.config["exact_init"] is False
    assert sol.step_evals[0] > p.n_evaders


def test_gain_entry_order():
    entries = sorted([GainEntry(0.5, 3, 0), GainEntry(0.7, 9, 0), GainEntry(0.5, 1, 0)])
    assert [e.edge for e in entries] == [9, 1, 3]


def test_budget_above_edges_is_rejected():
    p = chain()
    object.__setattr__(p, "budget", 5)  # bypass the constructor check
    for solve in (greedy_solve, priority_greedy_solve, brute_force_solve):
        with pytest.raises(InvalidInstanceError):
            solve(p)


# --- exact search and the bound ----------------------------------------------

def test_brute_force_examples():
    p = diamond(p_a=0.8, budget=2)
    assert brute_force_solve(p).objective == pytest.approx(1.0)
    full = p.with_budget(4)
    assert brute_force_solve(full).objective == pytest.approx(objective(full, range(4)))
    zero = p.with_budget(0)
    assert brute_force_solve(zero).objective == objective(zero, ())
    assert brute_force_solve(p, at_most=True).objective == pytest.approx(1.0)
    with pytest.raises(InvalidInstanceError):
        brute_force_solve(p, max_combinations=5)


def test_brute_force_tie_is_lexicographic():
    p = chain(d=0.5, budget=1)
    assert brute_force_solve(p).selected == (0,)


def coverage_trap():
    """Four unit-speed evaders of weight 1/4; edges 0, 1, 2 each cover two of them.

    Edge 0 ties with 1 and 2 at step one and wins on id, after which no second
    edge can cover more than one evader; {1, 2} covers all four.
    """
    edges = [(0, 1), (1, 2), (4, 2), (3, 1), (1, 4), (5, 4)]
    g = Graph.from_edges(6, [(i, j, 1.0, 1.0) for i, j in edges])
    paths = [[0, 1, 2], [3, 1, 2], [0, 1, 4, 2], [5, 4, 2]]
    evaders = []
    for path in paths:
        M = sp.csr_matrix(([1.0] * (len(path) - 1), (path[:-1], path[1:])), shape=(6, 6))
        a = np.zeros(6)
        a[path[0]] = 1
        evaders.append(EvaderSpec(0.25, a, 2, M))
    return ProblemInstance(g, evaders, 2)


def test_greedy_can_be_suboptimal_within_bound():
    p = coverage_trap()
    greedy, exact = greedy_solve(p), brute_force_solve(p)
    assert greedy.selected[0] == 0 and greedy.objective == pytest.approx(0.75)
    assert exact.selected == (1, 2) and exact.objective == pytest.approx(1.0)
    rep = verify_bound(greedy, exact)
    assert rep.passed and rep.ratio == pytest.approx(0.75)
    assert priority_greedy_solve(p).selected == greedy.selected


def test_verify_bound():
    p = diamond(p_a=0.8, budget=1)
    rep = verify_bound(greedy_solve(p), brute_force_solve(p))
    assert rep.passed and rep.ratio == pytest.approx(1.0)
    zero = Solution((), 0.0, (), 0, 0.0, "exact")
    assert verify_bound(zero, zero).passed
    bad = Solution((), 0.5, (), 0, 0.0, "greedy")
    good = Solution((), 1.0, (), 0, 0.0, "exact")
    assert not verify_bound(bad, good).passed


def test_solution_round_trip():
    sol = priority_greedy_solve(random_problem(np.random.default_rng(2), 8, budget=3))
    back = Solution.from_dict(sol.to_dict())
    assert back == sol


# --- properties ---------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=50, deadline=None)
@given(seed=seeds, cyclic=st.booleans())
def test_submodular(seed, cyclic):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, int(rng.integers(4, 15)), acyclic=not cyclic, leak=0.2)
    E = p.graph.n_edges
    x = int(rng.integers(E))
    rest = [e for e in range(E) if e != x]
    S2 = [e for e in rest if rng.random() < 0.5]
    S1 = [e for e in S2 if rng.random() < 0.5]
    d1, d2 = marginal_gain(p, S1, x), marginal_gain(p, S2, x)
    assert d2 >= -1e-9
    assert d1 >= d2 - 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=seeds, cyclic=st.booleans(), leak=st.sampled_from([0.0, 0.3]))
def test_priority_matches_greedy(seed, cyclic, leak):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, int(rng.integers(4, 14)), acyclic=not cyclic, budget=4, leak=leak)
    pri, bas = priority_greedy_solve(p), greedy_solve(p)
    assert pri.selected == bas.selected
    assert pri.objective == bas.objective
    assert bas.eval_count == closed_form(p)
    assert pri.eval_count <= bas.eval_count + p.n_evaders
    assert all(a >= b - 1e-9 for a, b in zip(bas.gains, bas.gains[1:]))
    assert abs(bas.objective - objective(p, bas.selected)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=seeds)
def test_fast_init_exact_on_acyclic(seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, int(rng.integers(3, 12)))
    for e, g in fast_init_gains(p):
        assert abs(g - marginal_gain(p, (), e)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=seeds, cyclic=st.booleans())
def test_fast_init_bounds_leaky_or_cyclic(seed, cyclic):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, int(rng.integers(3, 12)), acyclic=not cyclic, leak=0.3)
    for e, g in fast_init_gains(p):
        assert g >= marginal_gain(p, (), e) - 1e-10


def test_leaky_chain_init_is_not_trusted():
    # s -> v keeps only half the mass alive, so interdicting (v, t) is worth less than its bound
    g = Graph.from_edges(3, [(0, 1, 1.0, 1.0), (1, 2, 1.0, 1.0)])
    M = sp.csr_matrix(([1.0, 0.5], ([0, 1], [1, 2])), shape=(3, 3))
    p = ProblemInstance(g, [EvaderSpec(1.0, [1, 0, 0], 2, M)], 1)
    sol = priority_greedy_solve(p)
    assert sol.config["exact_init"] is False
    assert sol.selected == greedy_solve(p).selected


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_greedy_within_bound(seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, 6, budget=2, density=0.4)
    assert verify_bound(greedy_solve(p), brute_force_solve(p)).passed
