"""Network topology, grid geometry and random channel generation.

Two channel regimes are supported: Rician fading on a line-of-sight grid
(free-space path loss on the dominant path) and IID circularly-symmetric
complex Gaussian matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import AmplificationProfile, ChannelStack
from .policies import AtMostK, Ball2, BallInf, Policy, SelectOne, expand_policies

SPEED_OF_LIGHT = 299792458.0

SeedLike = Union[int, np.random.SeedSequence]


def validate_layer_sizes(sizes: Sequence[int]) -> tuple[int, ...]:
    """Return ``sizes`` as a tuple after checking n >= 1 and every m_i >= 1."""
    sizes = tuple(int(m) for m in sizes)
    if len(sizes) < 1:
        raise ValueError("at least one repeater layer is required")
    if any(m < 1 for m in sizes):
        raise ValueError(f"every layer needs at least one repeater, got {sizes}")
    return sizes


def free_space_gain(distance, wavelength):
    """Free-space power gain ``lambda**2 / (4 pi d)**2``.

    Accepts scalars or arrays for ``distance``.
    """
    d = np.asarray(distance, dtype=float)
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    if np.any(d <= 0):
        raise ValueError("distance must be positive (coincident nodes?)")
    gain = wavelength**2 / (4.0 * np.pi * d) ** 2
    return float(gain) if gain.ndim == 0 else gain


@dataclass(frozen=True)
class NetworkGeometry:
    """Node positions of a grid deployment, in meters.

    ``positions[0]`` is the BS, ``positions[1..n]`` the repeater layers and
    ``positions[n + 1]`` the UE; each entry is an array of shape ``(count, 2)``.
    """

    layer_sizes: tuple[int, ...]
    interlayer_spacing: float
    intralayer_spacing: float
    wavelength: float
    positions: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.interlayer_spacing <= 0 or self.intralayer_spacing <= 0:
            raise ValueError("spacings must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")

    @property
    def bs(self) -> np.ndarray:
        return self.positions[0][0]

    @property
    def ue(self) -> np.ndarray:
        return self.positions[-1][0]


def build_grid_geometry(
    layer_sizes: Sequence[int],
    interlayer: float,
    intralayer: float,
    carrier_frequency: float,
) -> NetworkGeometry:
    """Place layers on vertical lines ``x = i * interlayer``.

    Repeaters of a layer are centered on the BS-UE axis with ``intralayer``
    spacing. BS sits at the origin and the UE one interlayer spacing past the
    last layer.
    """
    sizes = validate_layer_sizes(layer_sizes)
    if interlayer <= 0 or intralayer <= 0:
        raise ValueError("spacings must be positive")
    if carrier_frequency <= 0:
        raise ValueError("carrier frequency must be positive")
    n = len(sizes)
    positions = [np.zeros((1, 2))]
    for i, m in enumerate(sizes, start=1):
        offsets = (np.arange(m) - (m - 1) / 2.0) * intralayer
        layer = np.column_stack([np.full(m, i * interlayer), offsets])
        positions.append(layer)
    positions.append(np.array([[(n + 1) * interlayer, 0.0]]))
    return NetworkGeometry(
        layer_sizes=sizes,
        interlayer_spacing=float(interlayer),
        intralayer_spacing=float(intralayer),
        wavelength=SPEED_OF_LIGHT / carrier_frequency,
        positions=tuple(positions),
    )


@dataclass(frozen=True)
class Rician:
    k_factor: float

    def __post_init__(self):
        if not self.k_factor >= 0:
            raise ValueError(f"Rician K-factor must be >= 0, got {self.k_factor}")


@dataclass(frozen=True)
class IidGaussian:
    sigma_h: float = 1.0

    def __post_init__(self):
        if not self.sigma_h > 0:
            raise ValueError(f"sigma_h must be positive, got {self.sigma_h}")


FadingSpec = Union[Rician, IidGaussian]


def complex_normal(rng: np.random.Generator, size, scale: float = 1.0) -> np.ndarray:
    """Draw CN(0, scale**2) samples (real and imaginary parts each scale**2 / 2)."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) * (scale / np.sqrt(2.0))


def _pairwise_distances(rx: np.ndarray, tx: np.ndarray) -> np.ndarray:
    return np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1)


def sample_channels(
    geometry: Union[NetworkGeometry, Sequence[int]],
    fading: FadingSpec,
    seed: SeedLike,
) -> ChannelStack:
    """Draw one channel realization ``[H_10, H_21, ..., H_{n+1,n}]``.

    For :class:`IidGaussian` only the layer sizes matter, so ``geometry`` may
    also be a plain sequence of layer sizes.
    """
    rng = np.random.default_rng(seed)
    if isinstance(fading, IidGaussian):
        sizes = geometry.layer_sizes if isinstance(geometry, NetworkGeometry) else geometry
        dims = (1, *validate_layer_sizes(sizes), 1)
        return ChannelStack(
            [complex_normal(rng, (dims[k + 1], dims[k]), fading.sigma_h) for k in range(len(dims) - 1)]
        )

    if not isinstance(geometry, NetworkGeometry):
        raise TypeError("Rician fading needs a NetworkGeometry")
    k = fading.k_factor
    if np.isinf(k):
        los_amp, nlos_amp = 1.0, 0.0
    else:
        los_amp, nlos_amp = np.sqrt(k / (k + 1.0)), np.sqrt(1.0 / (k + 1.0))
    lam = geometry.wavelength
    matrices = []
    pos = geometry.positions
    for level in range(len(pos) - 1):
        d = _pairwise_distances(pos[level + 1], pos[level])
        amp = np.sqrt(free_space_gain(d, lam))
        los = np.exp(-2j * np.pi * d / lam)
        z = complex_normal(rng, d.shape)
        matrices.append(amp * (los_amp * los + nlos_amp * z))
    return ChannelStack(matrices)


def sample_initial_profile(
    policy: Union[Policy, Sequence[Policy]],
    layer_sizes: Sequence[int],
    seed: SeedLike,
) -> AmplificationProfile:
    """Uniform (0, 1) gains rescaled into each layer's activation set.

    Ball2 layers are scaled to 2-norm beta, SelectOne layers to 1-norm beta and
    BallInf layers to inf-norm beta. AtMostK layers switch on the K repeaters
    with the largest draws, since its set only holds {0, beta} vectors.
    """
    sizes = validate_layer_sizes(layer_sizes)
    policies = expand_policies(policy, len(sizes))
    rng = np.random.default_rng(seed)
    alphas = []
    for m, pol in zip(sizes, policies):
        # open interval (0, 1): reject the (measure-zero) exact zero
        u = rng.uniform(0.0, 1.0, m)
        while np.any(u == 0.0):
            u = np.where(u == 0.0, rng.uniform(0.0, 1.0, m), u)
        if isinstance(pol, Ball2):
            a = pol.beta * u / np.linalg.norm(u)
        elif isinstance(pol, SelectOne):
            a = pol.beta * u / u.sum()
        elif isinstance(pol, BallInf):
            a = pol.beta * u / u.max()
        elif isinstance(pol, AtMostK):
            a = pol.maximize(u, np.zeros(m))
        else:
            raise TypeError(f"unknown policy {pol!r}")
        alphas.append(a)
    return AmplificationProfile(alphas)
