import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynbell.core import (
    Behavior,
    Distribution,
    SpaceMismatchError,
    StochasticKernel,
    ValidationError,
    compose,
    marginalize_behavior,
    product_space,
    push_forward,
    space,
    using_input_tolerance,
    validate_distribution,
    validate_kernel,
)
from dynbell.chsh import pr_box_behavior, uniform_behavior
from dynbell.random_models import random_distribution, random_kernel

from oracles import pr_box_table

BIT = space("bit", 2)


def flip(p):
    return StochasticKernel((BIT,), (BIT,), [[1 - p, p], [p, 1 - p]])


# -- validation -------------------------------------------------------------


def test_uniform_distribution_is_valid():
    assert validate_distribution(Distribution(BIT, [0.5, 0.5])).ok


def test_sum_violation_reports_deviation():
    rep = validate_distribution(Distribution(BIT, [0.7, 0.4]))
    assert not rep.ok
    (v,) = rep.violations
    assert v.kind == "sum"
    assert v.deviation == pytest.approx(0.1, abs=1e-15)


def test_tiny_negative_entry_is_flagged():
    d = Distribution(space("t", 3), [1.0, -1e-12, 1e-12])
    rep = validate_distribution(d)
    kinds = {v.kind for v in rep.violations}
    assert kinds == {"negative"}
    assert rep.violations[0].index == (1,)


def test_identity_kernel_is_valid():
    assert validate_kernel(StochasticKernel.identity((BIT,))).ok


def test_bad_row_sum_names_the_row():
    k = StochasticKernel((BIT,), (BIT,), [[0.3, 0.7], [0.6, 0.5]])
    rep = validate_kernel(k)
    (v,) = rep.violations
    assert v.kind == "sum" and v.index == (1,)
    assert v.deviation == pytest.approx(0.1, abs=1e-15)


def test_negative_kernel_entry():
    k = StochasticKernel((BIT,), (BIT,), [[1.01, -0.01], [0.5, 0.5]])
    assert any(v.kind == "negative" and v.index == (0, 1) for v in validate_kernel(k).violations)


def test_nan_row_is_not_silently_accepted():
    k = StochasticKernel((BIT,), (BIT,), [[np.nan, 0.5], [0.5, 0.5]])
    assert not validate_kernel(k).ok


def test_input_tolerance_is_configurable():
    d = Distribution(BIT, [0.5, 0.5 + 1e-7])
    with pytest.raises(ValidationError):
        d.ensure_valid()
    with using_input_tolerance(1e-6):
        d.ensure_valid()


def test_one_element_spaces_are_legal():
    one = space("one", 1)
    d = Distribution.uniform(one)
    k = StochasticKernel.identity((one,))
    assert push_forward(d, k).weights.tolist() == [1.0]


def test_duplicate_labels_rejected():
    with pytest.raises(ValueError):
        space("s", ["0", "0"])


def test_product_space_labels_are_row_major():
    p = product_space("p", (space("u", 2), space("v", ["a", "b", "c"])))
    assert p.elements == ("0,a", "0,b", "0,c", "1,a", "1,b", "1,c")


# -- push_forward -----------------------------------------------------------


def test_uniform_is_fixed_by_symmetric_flip():
    out = push_forward(Distribution.uniform(BIT), flip(0.3))
    np.testing.assert_allclose(out.weights, [0.5, 0.5], atol=1e-15)


def test_point_mass_reads_off_a_row():
    out = push_forward(Distribution.point(BIT, ["0"]), flip(0.3))
    np.testing.assert_allclose(out.weights, [0.7, 0.3], atol=1e-15)


def test_identity_push_forward_is_exact():
    d = Distribution(BIT, [0.2, 0.8])
    assert np.array_equal(push_forward(d, StochasticKernel.identity((BIT,))).weights, d.weights)


def test_space_mismatch_raises():
    with pytest.raises(SpaceMismatchError):
        push_forward(Distribution.uniform(space("other", 2)), flip(0.1))


seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(1, 4)


@given(seeds, sizes, sizes)
def test_push_forward_preserves_normalization(seed, n_in, n_out):
    rng = np.random.default_rng(seed)
    i, o = space("i", n_in), space("o", n_out)
    d = random_distribution(rng, (i,))
    out = push_forward(d, random_kernel(rng, (i,), (o,)))
    assert abs(out.weights.sum() - 1.0) <= 1e-12
    assert (out.weights >= 0).all()


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_push_forward_identity_multi_axis(seed, n1, n2):
    rng = np.random.default_rng(seed)
    sp = (space("u", n1), space("v", n2))
    d = random_distribution(rng, sp)
    assert np.array_equal(push_forward(d, StochasticKernel.identity(sp)).weights, d.weights)


@given(seeds, sizes, sizes, sizes)
def test_composition_is_associative_with_push_forward(seed, n1, n2, n3):
    rng = np.random.default_rng(seed)
    s1, s2, s3 = space("s1", n1), space("s2", n2), space("s3", n3)
    d = random_distribution(rng, (s1,))
    k1, k2 = random_kernel(rng, (s1,), (s2,)), random_kernel(rng, (s2,), (s3,))
    step = push_forward(push_forward(d, k1), k2).weights
    once = push_forward(d, compose(k1, k2)).weights
    assert np.max(np.abs(step - once)) <= 1e-12


# -- behaviors --------------------------------------------------------------


def test_uniform_behavior_marginals_are_half():
    b = uniform_behavior()
    assert np.allclose(marginalize_behavior(b, "A"), 0.5, atol=0)
    assert np.allclose(marginalize_behavior(b, "B"), 0.5, atol=0)


def test_pr_box_marginals_are_half():
    b = pr_box_behavior()
    assert np.array_equal(b.table, pr_box_table())
    for party in "AB":
        assert np.max(np.abs(marginalize_behavior(b, party) - 0.5)) == 0.0


def test_deterministic_behavior_marginal():
    t = np.zeros((2, 2, 2, 2))
    t[0, 0] = 1.0
    b = Behavior(space("a", 2), space("b", 2), space("x", 2), space("y", 2), t)
    assert (marginalize_behavior(b, "A")[0] == 1.0).all()


def test_marginalize_rejects_unknown_party():
    with pytest.raises(ValueError):
        marginalize_behavior(uniform_behavior(), "C")
