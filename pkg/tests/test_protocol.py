import numpy as np
import pytest

from dynbell.chsh import chsh_value
from dynbell.core import Distribution, FiniteSpace
from dynbell.models import behavior_of_dynamical
from dynbell.protocol import (
    BATCH,
    NodeProgram,
    STRATEGIES,
    UnobservedSettings,
    estimate_chsh,
    exact_behavior,
    nodes_from_static,
    run_protocol,
)
from dynbell.random_models import random_dynamical_model
from dynbell.reduction import reduce_to_static
from dynbell.scenarios import readonly_dynamical_model


def test_constant_nodes_give_exactly_two():
    a, b, s = STRATEGIES["constant"]()
    est = estimate_chsh(run_protocol(a, b, s, 10**4, seed=1).estimated)
    assert est.value == 2.0 and est.stderr == 0.0


def test_random_nodes_near_zero():
    a, b, s = STRATEGIES["random"]()
    est = estimate_chsh(run_protocol(a, b, s, 200_000, seed=2).estimated)
    assert abs(est.value) <= 3 * est.stderr


def test_covert_nodes_near_four():
    a, b, s = STRATEGIES["covert-pr"]()
    assert chsh_value(exact_behavior(a, b, s)) == 4.0
    est = estimate_chsh(run_protocol(a, b, s, 100_000, seed=3).estimated)
    assert abs(est.value - 4.0) <= 3 * est.stderr + 1e-12


def test_static_nodes_reproduce_model_exactly():
    m = readonly_dynamical_model()
    a, b, s = nodes_from_static(reduce_to_static(m))
    assert exact_behavior(a, b, s).max_diff(behavior_of_dynamical(m)) <= 1e-12


def test_readonly_nodes_estimate_within_three_sigma():
    a, b, s = STRATEGIES["readonly"]()
    exact = chsh_value(behavior_of_dynamical(readonly_dynamical_model()))
    est = estimate_chsh(run_protocol(a, b, s, 200_000, seed=4).estimated)
    assert abs(est.value - exact) <= 3 * est.stderr


def test_counts_sum_and_frequencies_normalized():
    a, b, s = STRATEGIES["readonly"]()
    run = run_protocol(a, b, s, 12_345, seed=5)
    assert run.estimated.total == 12_345
    f = run.estimated.frequencies()
    assert np.max(np.abs(f.table.sum(axis=(0, 1)) - 1.0)) <= 1e-12


def test_logs_reproducible_across_batches():
    a, b, s = STRATEGIES["readonly"]()
    n = BATCH + 1000
    one = list(run_protocol(a, b, s, n, seed=9).log_lines())
    two = list(run_protocol(a, b, s, n, seed=9).log_lines())
    other = list(run_protocol(a, b, s, n, seed=10).log_lines())
    assert one == two and one != other
    assert len(one) == n
    logs = list(run_protocol(a, b, s, 3, seed=9).logs())
    assert logs[0].seeds == {"master": 9, "batch": 0}


def test_batch_prefix_stable():
    # Batch k's stream depends only on (master seed, k), so a longer run extends a shorter one.
    a, b, s = STRATEGIES["random"]()
    short = list(run_protocol(a, b, s, BATCH, seed=7).log_lines())
    long = list(run_protocol(a, b, s, 2 * BATCH, seed=7).log_lines())
    assert long[:BATCH] == short


def test_unobserved_settings_raise():
    a, b, s = STRATEGIES["constant"]()
    with pytest.raises(UnobservedSettings):
        estimate_chsh(run_protocol(a, b, s, 1, seed=0).estimated)


def test_rounds_must_be_positive():
    a, b, s = STRATEGIES["constant"]()
    with pytest.raises(ValueError):
        run_protocol(a, b, s, 0, seed=0)


def test_covert_table_requires_flag():
    s = FiniteSpace("shared", ("-",))
    none = Distribution(FiniteSpace("none", ("-",)), [1.0])
    bits = lambda n: FiniteSpace(n, ("0", "1"))  # noqa: E731
    with pytest.raises(ValueError):
        NodeProgram("bob", s, none, bits("y"), bits("b"), np.zeros((1, 1, 2, 2), int))


def test_superdeterminism_switch_is_labeled_and_beats_bound():
    # Shared value s = (x, y) fixes the settings; honest nodes then read x from s.
    shared = FiniteSpace("shared", ("00", "01", "10", "11"))
    none = Distribution(FiniteSpace("none", ("-",)), [1.0])
    bits = lambda n: FiniteSpace(n, ("0", "1"))  # noqa: E731
    ta = np.zeros((4, 1, 2), int)
    tb = np.zeros((4, 1, 2), int)
    for si, yi in np.ndindex(4, 2):
        tb[si, 0, yi] = (si >> 1) & yi
    alice = NodeProgram("alice", shared, none, bits("x"), bits("a"), ta)
    bob = NodeProgram("bob", shared, none, bits("y"), bits("b"), tb)
    sgs = np.zeros((4, 2, 2))
    for si in range(4):
        sgs[si, si >> 1, si & 1] = 1.0
    dist = Distribution(shared, np.full(4, 0.25))
    run = run_protocol(alice, bob, dist, 20_000, seed=0, settings_given_shared=sgs)
    assert not run.measurement_independent
    assert chsh_value(exact_behavior(alice, bob, dist, sgs)) == 4.0
    assert estimate_chsh(run.estimated).value == 4.0
    a, b, s = STRATEGIES["constant"]()
    assert run_protocol(a, b, s, 10, seed=0).measurement_independent


@pytest.mark.parametrize("seed", range(25))
def test_honest_exact_behavior_local(seed):
    rng = np.random.default_rng(seed)
    m = random_dynamical_model(rng, max_size=3, binary=True)
    a, b, s = nodes_from_static(reduce_to_static(m))
    assert not (a.covert_input_enabled or b.covert_input_enabled)
    exact = exact_behavior(a, b, s)
    assert exact.max_diff(behavior_of_dynamical(m)) <= 1e-12
    assert abs(chsh_value(exact)) <= 2 + 1e-12


@pytest.mark.parametrize("name", ["constant", "random", "readonly"])
def test_honest_estimates_within_four_sigma(name):
    a, b, s = STRATEGIES[name]()
    exact = chsh_value(exact_behavior(a, b, s))
    for seed in range(5):
        est = estimate_chsh(run_protocol(a, b, s, 50_000, seed=seed).estimated)
        assert abs(est.value - exact) <= 4 * est.stderr + 1e-12


def test_inverse_sqrt_n_scaling():
    """Mean |estimate - exact| over seeds shrinks by ~10 when rounds grow x100."""
    a, b, s = STRATEGIES["readonly"]()
    exact = chsh_value(exact_behavior(a, b, s))

    def mean_gap(n, reps):
        return np.mean([abs(estimate_chsh(run_protocol(a, b, s, n, seed=1000 + r).estimated).value - exact)
                        for r in range(reps)])

    small, large = mean_gap(2_000, 40), mean_gap(200_000, 40)
    slope = np.log(large / small) / np.log(100)
    assert -1.0 <= slope <= -0.25  # -1/2 within a factor of 2
