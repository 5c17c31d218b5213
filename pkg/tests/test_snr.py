import itertools

import numpy as np
import pytest

from polarnet import AmplificationProfile, Ball2, ChannelStack, sample_initial_profile, total_channel
from polarnet.oracles import simulate_transmission
from polarnet.snr import (
    InfiniteSnrError,
    NoiseModel,
    RandomAlphaDistribution as Dist,
    expected_snr_upper_bound,
    monte_carlo_channel_power,
    monte_carlo_snr,
    noise_variances,
    snr,
    telescoped_channel_power,
)

from conftest import random_stack


def test_unit_chain_variance():
    stack = ChannelStack([[[1.0]], [[1.0]]])
    dl, ul = noise_variances(stack, AmplificationProfile([[1.0]]), NoiseModel((1.0, 1.0, 1.0)))
    assert dl == 2.0
    assert ul == 2.0


def test_zero_gains_leave_terminal_noise(rng):
    stack = random_stack(rng, [3, 4])
    zero = AmplificationProfile([np.zeros(3), np.zeros(4)])
    dl, ul = noise_variances(stack, zero, NoiseModel((0.5, 2.0, 3.0, 1.5)))
    assert dl == 1.5**2
    assert ul == 0.5**2
    assert snr(stack, zero, NoiseModel((0.5, 2.0, 3.0, 1.5))).snr_dl == 0.0


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel((1.0, 1.0))
    with pytest.raises(ValueError):
        NoiseModel((1.0, -1.0, 1.0))
    assert NoiseModel.uniform(3, 2.0, 0.0).sigmas == (2.0, 0.0, 0.0, 0.0, 2.0)


def test_noise_model_layer_mismatch(rng):
    stack = random_stack(rng, [2, 2])
    with pytest.raises(ValueError):
        noise_variances(stack, AmplificationProfile([[1, 1], [1, 1]]), NoiseModel((1, 1, 1)))


def test_zero_variance_is_an_error():
    stack = ChannelStack([[[1.0]], [[1.0]]])
    with pytest.raises(InfiniteSnrError):
        snr(stack, AmplificationProfile([[1.0]]), NoiseModel((0.0, 0.0, 0.0)))


def test_symmetric_chain_has_equal_snrs():
    stack = ChannelStack([[[0.8]], [[1.1]], [[0.8]]])
    rep = snr(stack, AmplificationProfile([[1.3], [1.3]]), NoiseModel((0.7, 0.4, 0.4, 0.7)))
    assert rep.snr_dl == pytest.approx(rep.snr_ul, rel=1e-14)
    assert rep.sigma_dl_sq == pytest.approx(rep.sigma_ul_sq, rel=1e-14)


def test_snr_report_consistency_and_conservative_bound(rng):
    for _ in range(20):
        sizes = [int(m) for m in rng.integers(1, 6, rng.integers(1, 5))]
        stack = random_stack(rng, sizes)
        profile = sample_initial_profile(Ball2(), sizes, int(rng.integers(1000)))
        sig = rng.uniform(0.1, 2.0, len(sizes) + 2)
        noise = NoiseModel(tuple(sig))
        rep = snr(stack, profile, noise)
        assert rep.channel_power == pytest.approx(abs(total_channel(stack, profile)) ** 2)
        assert rep.snr_dl == pytest.approx(rep.channel_power / rep.sigma_dl_sq)
        assert rep.snr_dl <= rep.channel_power / min(sig[0], sig[-1]) ** 2
        assert rep.sigma_dl_sq >= sig[-1] ** 2
        assert rep.sigma_ul_sq >= sig[0] ** 2


def test_closed_form_matches_simulation():
    rng = np.random.default_rng(4)
    stack = random_stack(rng, [3, 4])
    profile = sample_initial_profile(Ball2(1.5), [3, 4], 0)
    noise = NoiseModel((0.3, 0.9, 1.2, 0.6))
    dl, ul = noise_variances(stack, profile, noise)
    _, emp_dl = simulate_transmission(stack, profile, noise, "DL", 0, 10**6, 1)
    _, emp_ul = simulate_transmission(stack, profile, noise, "UL", 0, 10**6, 2)
    assert emp_dl == pytest.approx(dl, rel=0.01)
    assert emp_ul == pytest.approx(ul, rel=0.01)


def test_closed_form_bound_unit_parameters():
    assert expected_snr_upper_bound([1], 1.0, 1.0, Dist.UNIFORM_SPHERE_ORTHANT) == 1.0
    assert expected_snr_upper_bound([1], 1.0, 1.0, Dist.UNIFORM_ONE_HOT) == 1.0


def test_closed_form_bound_bernoulli_substitution():
    assert expected_snr_upper_bound([3, 5], 1.0, 1.0, Dist.IID_BERNOULLI_HALF) == 15 / 16


def test_closed_form_bound_scaling():
    assert expected_snr_upper_bound([2, 2], 2.0, 0.5, Dist.UNIFORM_ONE_HOT) == 2.0**3 / 0.25
    with pytest.raises(ValueError):
        expected_snr_upper_bound([2], 1.0, 0.0, Dist.UNIFORM_ONE_HOT)


def _second_moment_matrix(m, dist):
    """E[alpha alpha^T] by enumeration (one-hot, Bernoulli) or symmetry (sphere)."""
    if dist is Dist.UNIFORM_ONE_HOT:
        return sum(np.outer(e, e) for e in np.eye(m)) / m
    if dist is Dist.IID_BERNOULLI_HALF:
        pts = np.array(list(itertools.product((0.0, 1.0), repeat=m)))
        return pts.T @ pts / len(pts)
    # only the diagonal is reached below; by symmetry each entry is 1/m
    return np.diag(np.full(m, 1.0 / m))


def recursion_power(sizes, sigma_h, dist):
    """Propagate E[H^H R H] and E[D R D] stage by stage from the UE side."""
    r = sigma_h**2 * np.eye(sizes[-1])
    for i in range(len(sizes) - 1, -1, -1):
        r = _second_moment_matrix(sizes[i], dist) * r
        prev = sizes[i - 1] if i > 0 else 1
        r = sigma_h**2 * np.trace(r) * np.eye(prev)
    return float(r[0, 0])


@pytest.mark.parametrize("dist", list(Dist))
@pytest.mark.parametrize("sizes", [[1], [3, 2], [2, 4, 3]])
def test_telescoped_power_matches_recursion(sizes, dist):
    assert telescoped_channel_power(sizes, 1.3, dist) == pytest.approx(recursion_power(sizes, 1.3, dist), rel=1e-12)


def test_monte_carlo_scalar_one_hot():
    mean, se = monte_carlo_channel_power([1], 1.0, Dist.UNIFORM_ONE_HOT, 200000, 5)
    assert abs(mean - 1.0) < 3 * se


@pytest.mark.parametrize("dist", list(Dist))
def test_monte_carlo_matches_recursion(dist):
    sizes = [3, 2, 4]
    mean, se = monte_carlo_channel_power(sizes, 0.9, dist, 200000, 6)
    assert abs(mean - recursion_power(sizes, 0.9, dist)) < 3 * se


def test_standard_error_scaling():
    _, se1 = monte_carlo_channel_power([2, 2], 1.0, Dist.UNIFORM_SPHERE_ORTHANT, 50000, 1)
    _, se2 = monte_carlo_channel_power([2, 2], 1.0, Dist.UNIFORM_SPHERE_ORTHANT, 100000, 2)
    assert 1.2 < se1 / se2 < 1.7


def test_monte_carlo_is_seeded():
    a = monte_carlo_channel_power([2, 3], 1.0, Dist.IID_BERNOULLI_HALF, 3000, 9)
    b = monte_carlo_channel_power([2, 3], 1.0, Dist.IID_BERNOULLI_HALF, 3000, 9)
    assert a == b


@pytest.mark.parametrize("dist", list(Dist))
@pytest.mark.parametrize("sizes", [[1], [3, 5], [2, 3, 2]])
def test_closed_form_bound_holds_for_random_gains_with_equal_noise(sizes, dist):
    noise = NoiseModel.uniform(len(sizes), 1.0)
    mc_snr, se = monte_carlo_snr(sizes, 1.0, noise, dist, 50000, 3)
    power, power_se = monte_carlo_channel_power(sizes, 1.0, dist, 50000, 4)
    assert mc_snr <= expected_snr_upper_bound(sizes, 1.0, 1.0, dist) + 3 * se
    assert mc_snr <= power + 3 * (se + power_se)
