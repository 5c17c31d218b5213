import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from polarnet import AtMostK, Ball2, BallInf, SelectOne, layer_update
from polarnet.policies import expand_policies, policy_from_dict


def test_ball2_normalized_positive_part():
    np.testing.assert_allclose(Ball2(1.0).maximize(np.array([3.0, 4.0]), np.zeros(2)), [0.6, 0.8])


def test_ball2_zeroes_negatives():
    np.testing.assert_allclose(Ball2(2.0).maximize(np.array([-1.0, 2.0]), np.zeros(2)), [0.0, 2.0])


def test_ballinf_sign_plus():
    out = BallInf(3.0).maximize(np.array([0.5, -0.2, 0.0]), np.zeros(3))
    np.testing.assert_array_equal(out, [3.0, 0.0, 0.0])


def test_at_most_k_two_largest_positive():
    out = AtMostK(1.0, 2).maximize(np.array([3.0, -1.0, 2.0, 0.5]), np.zeros(4))
    np.testing.assert_array_equal(out, [1.0, 0.0, 1.0, 0.0])


def test_at_most_k_fewer_positives_than_k():
    out = AtMostK(2.0, 3).maximize(np.array([-3.0, 1.0, 0.0, -0.5]), np.zeros(4))
    np.testing.assert_array_equal(out, [0.0, 2.0, 0.0, 0.0])


def test_select_one_largest_positive():
    out = SelectOne(2.0).maximize(np.array([0.1, 5.0, 3.0]), np.zeros(3))
    np.testing.assert_array_equal(out, [0.0, 2.0, 0.0])


def test_ties_go_to_lowest_index():
    np.testing.assert_array_equal(SelectOne(1.0).maximize(np.array([1.0, 2.0, 2.0]), np.zeros(3)), [0, 1, 0])
    np.testing.assert_array_equal(AtMostK(1.0, 2).maximize(np.array([1.0, 1.0, 1.0]), np.zeros(3)), [1, 1, 0])


@pytest.mark.parametrize("policy", [Ball2(1.0), BallInf(1.0), AtMostK(1.0, 2), SelectOne(1.0)])
def test_no_positive_entry_keeps_previous(policy):
    prev = np.array([0.0, 1.0, 0.0])
    out = policy.maximize(np.array([-1.0, 0.0, -2.0]), prev)
    np.testing.assert_array_equal(out, prev)
    assert out is not prev


def test_membership_predicates():
    assert Ball2(1.0).contains([0.6, 0.8])
    assert not Ball2(1.0).contains([0.7, 0.8])
    assert not Ball2(1.0).contains([-0.1, 0.5])
    assert BallInf(2.0).contains([2.0, 0.0, 1.3])
    assert not BallInf(2.0).contains([2.1, 0.0])
    assert AtMostK(1.5, 2).contains([1.5, 0.0, 1.5])
    assert not AtMostK(1.5, 2).contains([1.5, 1.5, 1.5])
    assert not AtMostK(1.5, 2).contains([1.0, 0.0, 0.0])
    assert SelectOne(1.0).contains([0.2, 0.3, 0.5])
    assert not SelectOne(1.0).contains([0.5, 0.6])


def test_policy_validation():
    for bad in (0.0, -1.0, float("inf")):
        with pytest.raises(ValueError):
            Ball2(bad)
    with pytest.raises(ValueError):
        AtMostK(1.0, 0)


def test_expand_policies():
    assert expand_policies(Ball2(), 3) == [Ball2()] * 3
    with pytest.raises(ValueError):
        expand_policies([Ball2(), BallInf()], 3)


def test_policy_from_dict():
    assert policy_from_dict({"kind": "at_most_k", "beta": 2, "k": 3}) == AtMostK(2.0, 3)
    assert policy_from_dict({"kind": "select_one"}) == SelectOne(1.0)
    with pytest.raises(ValueError):
        policy_from_dict({"kind": "ball3"})


def _feasible_points(policy, m, rng):
    """Brute-force candidates: exact vertex sets, or dense samples for the 2-ball."""
    if isinstance(policy, BallInf):
        return policy.beta * np.array(list(itertools.product((0.0, 1.0), repeat=m)))
    if isinstance(policy, AtMostK):
        pts = [p for p in itertools.product((0.0, 1.0), repeat=m) if sum(p) <= policy.k]
        return policy.beta * np.array(pts)
    if isinstance(policy, SelectOne):
        grid = [p for p in itertools.product(np.linspace(0, 1, 11), repeat=m) if sum(p) <= 1 + 1e-12]
        return policy.beta * np.array(grid)
    x = np.abs(rng.standard_normal((20000, m)))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    x *= rng.uniform(0, 1, (20000, 1)) ** (1 / m)
    return policy.beta * x


@pytest.mark.parametrize("policy", [Ball2(1.5), BallInf(0.7), AtMostK(1.2, 2), SelectOne(2.0)])
def test_update_is_true_argmax(policy):
    rng = np.random.default_rng(3)
    for _ in range(30):
        m = int(rng.integers(1, 5))
        y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        alpha = np.abs(rng.standard_normal(m))
        new = layer_update(y, alpha, policy)
        g = np.real(np.conj(y) * (y @ alpha))
        best = (_feasible_points(policy, m, rng) @ g).max()
        assert new @ g >= best - 1e-12 * max(1.0, abs(best))
        assert policy.contains(new)


policies_st = st.one_of(
    st.builds(Ball2, st.floats(0.1, 10)),
    st.builds(BallInf, st.floats(0.1, 10)),
    st.builds(AtMostK, st.floats(0.1, 10), st.integers(1, 5)),
    st.builds(SelectOne, st.floats(0.1, 10)),
)
vectors = arrays(np.float64, st.integers(1, 8), elements=st.floats(-100, 100, allow_subnormal=False))


@settings(max_examples=200, deadline=None)
@given(policies_st, vectors)
def test_projection_idempotent_and_feasible(policy, g):
    prev = np.zeros(len(g))
    once = policy.maximize(g, prev)
    twice = policy.maximize(g, once)
    np.testing.assert_array_equal(once, twice)
    assert policy.contains(once)
    if isinstance(policy, Ball2) and np.any(g > 0):
        assert np.linalg.norm(once) == pytest.approx(policy.beta, rel=1e-12)
