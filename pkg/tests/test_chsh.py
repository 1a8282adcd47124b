import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynbell.chsh import (
    CANONICAL_ANGLES,
    ChshSpec,
    NotChshShaped,
    chsh_value,
    correlator,
    local_deterministic_max,
    pr_box_behavior,
    product_behavior,
    singlet_behavior,
    uniform_behavior,
)
from dynbell.core import Behavior, space
from dynbell.diagnostics import check_no_signaling
from dynbell.models import behavior_of_dynamical, behavior_of_static
from dynbell.random_models import random_dynamical_model
from dynbell.reduction import reduce_to_static

import oracles

seeds = st.integers(0, 2**32 - 1)


def test_uniform_correlator_zero():
    assert correlator(uniform_behavior(), 0, 0) == 0.0


def test_perfect_correlation():
    t = np.zeros((2, 2, 2, 2))
    t[0, 0] = t[1, 1] = 0.5
    b = Behavior(space("a", 2), space("b", 2), space("x", 2), space("y", 2), t)
    assert correlator(b, 1, 0) == 1.0


def test_singlet_correlator_at_quarter_pi():
    b = singlet_behavior(0.0, 0.0, math.pi / 4, math.pi / 4)
    assert correlator(b, 0, 0) == pytest.approx(math.cos(math.pi / 4), abs=1e-12)
    assert correlator(b, 0, 0) == pytest.approx(0.70710678, abs=1e-8)


def test_all_plus_is_two():
    assert chsh_value(product_behavior((1, 1), (1, 1))) == 2.0


def test_pr_box_is_four():
    assert abs(chsh_value(pr_box_behavior()) - 4.0) <= 1e-12
    assert oracles.chsh_by_hand(oracles.pr_box_table()) == 4.0


def test_pr_box_rows_sum_to_one():
    assert np.array_equal(pr_box_behavior().table.sum(axis=(0, 1)), np.ones((2, 2)))
    assert check_no_signaling(pr_box_behavior()).passes


def test_singlet_canonical_is_two_root_two():
    value = chsh_value(singlet_behavior(*CANONICAL_ANGLES))
    # Four cosines by hand: cos(-pi/4) + cos(pi/4) + cos(pi/4) - cos(3pi/4).
    by_hand = 3 * math.cos(math.pi / 4) - math.cos(3 * math.pi / 4)
    assert abs(value - by_hand) <= 1e-12
    assert abs(value - 2.8284271247) <= 1e-6


def test_singlet_equal_angles_correlator_one():
    assert correlator(singlet_behavior(0.3, 1.0, 0.3, 2.0), 0, 0) == pytest.approx(1.0, abs=1e-15)


def test_singlet_all_equal_angles_gives_two():
    assert chsh_value(singlet_behavior(0.4, 0.4, 0.4, 0.4)) == pytest.approx(2.0, abs=1e-12)


def test_local_max_is_exactly_two():
    r = local_deterministic_max()
    assert r.max_value == 2.0
    assert len(r.values) == 16
    assert set(r.values.values()) <= {-2.0, 0.0, 2.0}
    assert ((1, 1), (1, 1)) in r.argmax


def test_local_vertices_by_hand():
    # Independent loop: a(x), b(y) in {+1,-1}, CHSH = sum of signed products.
    signs = {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1}
    best = max(sum(s * a[x] * b[y] for (x, y), s in signs.items())
               for a in product((1, -1), repeat=2) for b in product((1, -1), repeat=2))
    assert best == local_deterministic_max().max_value


def test_alternating_alice_still_hits_the_bound():
    # E = a(x): 1 + 1 + (-1) - (-1). Every vertex has one vanishing bracket in
    # a0 (b0 + b1) + a1 (b0 - b1), so no deterministic pair scores 0.
    assert chsh_value(product_behavior((1, -1), (1, 1))) == 2.0
    assert set(local_deterministic_max().values.values()) == {-2.0, 2.0}


def test_non_binary_rejected():
    b = uniform_behavior(a=space("a", 3))
    with pytest.raises(NotChshShaped):
        chsh_value(b)


@given(seeds)
@settings(max_examples=1000)
def test_local_models_respect_bound(seed):
    m = random_dynamical_model(np.random.default_rng(seed), binary=True)
    assert abs(chsh_value(behavior_of_dynamical(m))) <= 2 + 1e-9
    assert abs(chsh_value(behavior_of_static(reduce_to_static(m)))) <= 2 + 1e-9


@given(seeds)
@settings(max_examples=100)
def test_encoding_covariance(seed):
    """Flipping Alice's encoding and relabeling a <-> a' in the behavior leaves CHSH unchanged."""
    m = random_dynamical_model(np.random.default_rng(seed), binary=True)
    b = behavior_of_dynamical(m)
    swapped = Behavior(b.a, b.b, b.x, b.y, b.table[::-1])
    flipped_a = ChshSpec(enc_a=(-1, 1))
    assert abs(chsh_value(b) - chsh_value(swapped, flipped_a)) <= 1e-12
    assert abs(chsh_value(b) - chsh_value(b, ChshSpec().flipped())) <= 1e-12
