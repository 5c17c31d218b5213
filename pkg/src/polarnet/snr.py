"""Noise accumulation, SNR and expected-SNR bounds for random gains."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import AmplificationProfile, CascadeCache, ChannelStack, total_channel
from .network import SeedLike, complex_normal, validate_layer_sizes


class InfiniteSnrError(ArithmeticError):
    """Total noise variance is zero."""


@dataclass(frozen=True)
class NoiseModel:
    """Noise standard deviations ``[sigma_0 (BS), sigma_1..sigma_n, sigma_{n+1} (UE)]``."""

    sigmas: tuple[float, ...]

    def __post_init__(self):
        sig = tuple(float(s) for s in self.sigmas)
        object.__setattr__(self, "sigmas", sig)
        if len(sig) < 3:
            raise ValueError("need BS, at least one layer and UE noise levels")
        if any(not s >= 0 for s in sig):
            raise ValueError("noise standard deviations must be >= 0")

    @classmethod
    def uniform(cls, n_layers: int, sigma: float, repeater_sigma: float | None = None) -> "NoiseModel":
        rep = sigma if repeater_sigma is None else repeater_sigma
        return cls((sigma, *([rep] * n_layers), sigma))

    @property
    def n_layers(self) -> int:
        return len(self.sigmas) - 2

    @property
    def bs(self) -> float:
        return self.sigmas[0]

    @property
    def ue(self) -> float:
        return self.sigmas[-1]

    @property
    def repeaters(self) -> tuple[float, ...]:
        return self.sigmas[1:-1]


def _check_noise(stack: ChannelStack, noise: NoiseModel) -> None:
    if noise.n_layers != stack.n_layers:
        raise ValueError(f"noise model has {noise.n_layers} layers, network has {stack.n_layers}")


def noise_variances(stack: ChannelStack, profile: AmplificationProfile, noise: NoiseModel) -> tuple[float, float]:
    """Closed-form downlink and uplink noise variances at the receiver.

    Noise injected at layer i reaches the UE through the row
    ``backward[i] * alpha_i`` and the BS through ``forward[i] * alpha_i``;
    for CN(0, s^2 I) noise its power is ``s^2`` times that row's squared norm.
    """
    _check_noise(stack, noise)
    cache = CascadeCache.build(stack, profile)
    dl = noise.ue**2
    ul = noise.bs**2
    for i, (a, s) in enumerate(zip(profile.alphas, noise.repeaters)):
        dl += s**2 * float(np.sum(np.abs(cache.backward[i] * a) ** 2))
        ul += s**2 * float(np.sum(np.abs(cache.forward[i] * a) ** 2))
    return dl, ul


@dataclass(frozen=True)
class SnrReport:
    channel_power: float
    sigma_dl_sq: float
    sigma_ul_sq: float
    snr_dl: float
    snr_ul: float


def snr(stack: ChannelStack, profile: AmplificationProfile, noise: NoiseModel) -> SnrReport:
    power = abs(total_channel(stack, profile)) ** 2
    dl, ul = noise_variances(stack, profile, noise)
    if dl == 0 or ul == 0:
        raise InfiniteSnrError("noise variance is zero; set a non-zero BS or UE noise level")
    return SnrReport(power, dl, ul, power / dl, power / ul)


class RandomAlphaDistribution(str, enum.Enum):
    """Random unit-level gain laws used for the expected-SNR bounds."""

    UNIFORM_SPHERE_ORTHANT = "uniform_sphere_orthant"
    UNIFORM_ONE_HOT = "uniform_one_hot"
    IID_BERNOULLI_HALF = "iid_bernoulli_half"


def expected_snr_upper_bound(
    layer_sizes: Sequence[int],
    sigma_h: float,
    sigma: float,
    dist: RandomAlphaDistribution,
) -> float:
    """Closed-form reference bound on the expected SNR for random gains.

    ``sigma_h**(n+1) / sigma**2`` for sphere and one-hot gains and
    ``prod(m) * sigma_h**(n+1) / (4**n sigma**2)`` for Bernoulli(1/2) gains.
    The expression is evaluated exactly as written; note that it differs from
    the exact expectation, so compare it with
    :func:`telescoped_channel_power` and :func:`monte_carlo_channel_power`.
    """
    sizes = validate_layer_sizes(layer_sizes)
    if not sigma > 0 or not sigma_h > 0:
        raise ValueError("sigma and sigma_h must be positive")
    n = len(sizes)
    dist = RandomAlphaDistribution(dist)
    if dist is RandomAlphaDistribution.IID_BERNOULLI_HALF:
        return math.prod(sizes) * sigma_h ** (n + 1) / (4**n * sigma**2)
    return sigma_h ** (n + 1) / sigma**2


def mean_gain_power(m: int, dist: RandomAlphaDistribution) -> float:
    """``E ||alpha||^2`` for one layer of ``m`` repeaters."""
    dist = RandomAlphaDistribution(dist)
    if dist is RandomAlphaDistribution.IID_BERNOULLI_HALF:
        return m / 2.0
    return 1.0


def telescoped_channel_power(layer_sizes: Sequence[int], sigma_h: float, dist: RandomAlphaDistribution) -> float:
    """Exact ``E |h_tot|^2`` for IID CN(0, sigma_h^2) channels and random gains.

    Each channel stage contributes ``sigma_h**2`` and each layer ``E||alpha||^2``.
    """
    sizes = validate_layer_sizes(layer_sizes)
    value = sigma_h ** (2 * (len(sizes) + 1))
    for m in sizes:
        value *= mean_gain_power(m, dist)
    return value


def sample_random_alphas(rng: np.random.Generator, m: int, dist: RandomAlphaDistribution, size: int) -> np.ndarray:
    """Draw ``size`` gain vectors of length ``m``; returns shape ``(size, m)``."""
    dist = RandomAlphaDistribution(dist)
    if dist is RandomAlphaDistribution.UNIFORM_SPHERE_ORTHANT:
        x = np.abs(rng.standard_normal((size, m)))
        return x / np.linalg.norm(x, axis=1, keepdims=True)
    if dist is RandomAlphaDistribution.UNIFORM_ONE_HOT:
        out = np.zeros((size, m))
        out[np.arange(size), rng.integers(0, m, size)] = 1.0
        return out
    return rng.integers(0, 2, (size, m)).astype(float)


def _batched_stacks(rng, sizes, sigma_h, count):
    dims = (1, *sizes, 1)
    return [complex_normal(rng, (count, dims[k + 1], dims[k]), sigma_h) for k in range(len(dims) - 1)]


def _mean_and_stderr(x: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(x))
    if len(x) < 2:
        return mean, float("inf")
    return mean, float(np.std(x, ddof=1) / np.sqrt(len(x)))


def _chunks(total: int, chunk: int):
    done = 0
    while done < total:
        size = min(chunk, total - done)
        yield size
        done += size


def monte_carlo_channel_power(
    layer_sizes: Sequence[int],
    sigma_h: float,
    dist: RandomAlphaDistribution,
    samples: int,
    seed: SeedLike,
    chunk: int = 20000,
) -> tuple[float, float]:
    """Estimate ``E |h_tot|^2`` jointly over random channels and gains.

    Returns ``(mean, standard_error)``.
    """
    sizes = validate_layer_sizes(layer_sizes)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    values = []
    for count in _chunks(samples, chunk):
        hs = _batched_stacks(rng, sizes, sigma_h, count)
        v = hs[0][:, :, 0]
        for i, m in enumerate(sizes):
            a = sample_random_alphas(rng, m, dist, count)
            v = np.einsum("sij,sj->si", hs[i + 1], a * v)
        values.append(np.abs(v[:, 0]) ** 2)
    return _mean_and_stderr(np.concatenate(values))


def monte_carlo_snr(
    layer_sizes: Sequence[int],
    sigma_h: float,
    noise: NoiseModel,
    dist: RandomAlphaDistribution,
    samples: int,
    seed: SeedLike,
    chunk: int = 20000,
) -> tuple[float, float]:
    """Estimate the expected downlink SNR over random channels and gains.

    Returns ``(mean, standard_error)``.
    """
    sizes = validate_layer_sizes(layer_sizes)
    if noise.n_layers != len(sizes):
        raise ValueError("noise model and layer sizes disagree")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = len(sizes)
    values = []
    for count in _chunks(samples, chunk):
        hs = _batched_stacks(rng, sizes, sigma_h, count)
        alphas = [sample_random_alphas(rng, m, dist, count) for m in sizes]
        # rows mapping each layer's output to the UE
        rows = [None] * n
        rows[n - 1] = hs[n][:, 0, :]
        for i in range(n - 2, -1, -1):
            rows[i] = np.einsum("sj,sjk->sk", rows[i + 1] * alphas[i + 1], hs[i + 1])
        h = np.einsum("sj,sj->s", rows[0] * alphas[0], hs[0][:, :, 0])
        var = np.full(count, noise.ue**2)
        for i, s in enumerate(noise.repeaters):
            var += s**2 * np.sum(np.abs(rows[i] * alphas[i]) ** 2, axis=1)
        values.append(np.abs(h) ** 2 / var)
    return _mean_and_stderr(np.concatenate(values))
