"""Cascade algebra and the layer-by-layer POLARNet optimizer.

Layers are indexed from 0 in code: layer ``i`` holds ``alphas[i]`` and sits
between ``matrices[i]`` (incoming) and ``matrices[i + 1]`` (outgoing). The
end-to-end channel is

    h_tot = H[n] D[n-1] H[n-1] ... D[0] H[0],   D[i] = diag(alphas[i]).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .policies import Policy, expand_policies


class StructureError(ValueError):
    """Channel matrices and gain vectors do not chain."""


class StaleCacheError(RuntimeError):
    """A cascade cache entry was read while dirty."""


class PreconditionError(ValueError):
    """Optimizer input violates a documented precondition."""


class ChannelStack:
    """Ordered channel matrices ``[H_10, H_21, ..., H_{n+1,n}]``.

    Shapes are ``(m_1, 1)``, ``(m_{i+1}, m_i)`` and ``(1, m_n)``.
    """

    def __init__(self, matrices: Sequence[np.ndarray]):
        mats = tuple(np.array(h, dtype=complex, ndmin=2) for h in matrices)
        if len(mats) < 2:
            raise StructureError("a network needs at least one repeater layer (two matrices)")
        if mats[0].shape[1] != 1 or mats[-1].shape[0] != 1:
            raise StructureError("first matrix must be a column and last a row")
        for k in range(1, len(mats)):
            if mats[k].shape[1] != mats[k - 1].shape[0]:
                raise StructureError(
                    f"matrix {k} has {mats[k].shape[1]} columns, expected {mats[k - 1].shape[0]}"
                )
        if not all(np.all(np.isfinite(h)) for h in mats):
            raise StructureError("channel entries must be finite")
        for h in mats:
            h.setflags(write=False)
        self.matrices = mats

    @property
    def n_layers(self) -> int:
        return len(self.matrices) - 1

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(h.shape[0] for h in self.matrices[:-1])

    def __len__(self):
        return len(self.matrices)

    def __getitem__(self, k):
        return self.matrices[k]

    def __repr__(self):
        return f"ChannelStack(layer_sizes={self.layer_sizes})"


class AmplificationProfile:
    """Non-negative real gain vectors, one per repeater layer."""

    def __init__(self, alphas: Sequence[np.ndarray]):
        self.alphas = [np.array(a, dtype=float).reshape(-1) for a in alphas]
        for a in self.alphas:
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise ValueError("gains must be finite and non-negative")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.alphas)

    def copy(self) -> "AmplificationProfile":
        return AmplificationProfile([a.copy() for a in self.alphas])

    def __len__(self):
        return len(self.alphas)

    def __getitem__(self, i):
        return self.alphas[i]

    def __setitem__(self, i, value):
        self.alphas[i] = np.asarray(value, dtype=float)

    def __eq__(self, other):
        if not isinstance(other, AmplificationProfile):
            return NotImplemented
        return len(self) == len(other) and all(
            np.array_equal(a, b) for a, b in zip(self.alphas, other.alphas)
        )

    def __repr__(self):
        return f"AmplificationProfile({[a.tolist() for a in self.alphas]})"


def check_dimensions(stack: ChannelStack, profile: AmplificationProfile) -> None:
    if stack.layer_sizes != profile.layer_sizes:
        raise StructureError(
            f"profile sizes {profile.layer_sizes} do not match channel sizes {stack.layer_sizes}"
        )


def total_channel(stack: ChannelStack, profile: AmplificationProfile) -> complex:
    """End-to-end channel, evaluated by left-multiplication from the BS side."""
    check_dimensions(stack, profile)
    v = stack[0][:, 0]
    for i, a in enumerate(profile.alphas):
        v = stack[i + 1] @ (a * v)
    return complex(v[0])


@dataclass
class CascadeCache:
    """Partial products used to form each layer's observation row.

    ``forward[i]`` is the signal arriving at layer ``i`` from the BS, i.e.
    ``H[i] D[i-1] ... D[0] H[0]`` (length ``m_i``). ``backward[i]`` is the row
    mapping the output of layer ``i`` to the UE, ``H[n] D[n-1] ... D[i+1] H[i+1]``.
    Neither entry involves ``alphas[i]`` itself, so ``h_tot = backward[i] @
    (alphas[i] * forward[i])``.
    """

    forward: list
    backward: list
    forward_clean: list
    backward_clean: list
    ops: int = 0

    @classmethod
    def empty(cls, n: int) -> "CascadeCache":
        return cls([None] * n, [None] * n, [False] * n, [False] * n)

    @classmethod
    def build(cls, stack: ChannelStack, profile: AmplificationProfile) -> "CascadeCache":
        """Fill every entry from scratch."""
        check_dimensions(stack, profile)
        n = stack.n_layers
        cache = cls.empty(n)
        cache.forward[0] = stack[0][:, 0].copy()
        cache.forward_clean[0] = True
        for i in range(1, n):
            forward_step(cache, stack, profile, i)
        cache.backward[n - 1] = stack[n][0, :].copy()
        cache.backward_clean[n - 1] = True
        for i in range(n - 2, -1, -1):
            backward_step(cache, stack, profile, i)
        return cache

    def invalidate(self, layer: int) -> None:
        """Mark entries that depend on ``alphas[layer]`` as dirty."""
        n = len(self.forward)
        for k in range(layer + 1, n):
            self.forward_clean[k] = False
        for k in range(layer):
            self.backward_clean[k] = False


def forward_step(cache: CascadeCache, stack: ChannelStack, profile: AmplificationProfile, layer: int) -> CascadeCache:
    """Recompute ``forward[layer]`` from ``forward[layer - 1]``; cost m_{i-1} m_i."""
    n = stack.n_layers
    if not 1 <= layer < n:
        raise IndexError(f"forward step needs 1 <= layer < {n}, got {layer}")
    if not cache.forward_clean[layer - 1]:
        raise StaleCacheError(f"forward[{layer - 1}] is dirty")
    h = stack[layer]
    prev = profile.alphas[layer - 1] * cache.forward[layer - 1]
    cache.forward[layer] = h @ prev
    cache.forward_clean[layer] = True
    cache.ops += h.size + prev.size
    return cache


def backward_step(cache: CascadeCache, stack: ChannelStack, profile: AmplificationProfile, layer: int) -> CascadeCache:
    """Recompute ``backward[layer]`` from ``backward[layer + 1]``; cost m_{i+1} m_i."""
    n = stack.n_layers
    if not 0 <= layer < n - 1:
        raise IndexError(f"backward step needs 0 <= layer < {n - 1}, got {layer}")
    if not cache.backward_clean[layer + 1]:
        raise StaleCacheError(f"backward[{layer + 1}] is dirty")
    h = stack[layer + 1]
    nxt = cache.backward[layer + 1] * profile.alphas[layer + 1]
    cache.backward[layer] = nxt @ h
    cache.backward_clean[layer] = True
    cache.ops += h.size + nxt.size
    return cache


def observation_matrix(
    stack: ChannelStack,
    profile: AmplificationProfile,
    layer: int,
    cache: Optional[CascadeCache] = None,
) -> np.ndarray:
    """Row ``Y`` with ``h_tot = Y @ alphas[layer]``.

    Without a cache the row is built from scratch by direct products.
    """
    if cache is None:
        cache = CascadeCache.build(stack, profile)
    if not (cache.forward_clean[layer] and cache.backward_clean[layer]):
        raise StaleCacheError(f"cache entries for layer {layer} are dirty")
    return cache.backward[layer] * cache.forward[layer]


def layer_update(y: np.ndarray, alpha: np.ndarray, policy: Policy) -> np.ndarray:
    """Maximize ``a @ Re{Y^H Y alpha}`` over the layer's activation set."""
    g = np.real(np.conj(y) * (y @ alpha))
    return policy.maximize(g, alpha)


@dataclass(frozen=True)
class ConvergenceCriterion:
    """Stop after ``max_outer_passes`` sweeps, or earlier on stall.

    A stall is declared when ``|h_tot|`` has not grown by more than
    ``epsilon`` over the last n inner updates. ``epsilon=None`` disables it.
    """

    max_outer_passes: int = 20
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.max_outer_passes < 1:
            raise ValueError("max_outer_passes must be >= 1")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")


class Termination(str, enum.Enum):
    MAX_PASSES = "max_passes"
    EPSILON_STALL = "epsilon_stall"


@dataclass
class RunRecord:
    objective_trace: np.ndarray
    final_profile: AmplificationProfile
    passes_used: int
    termination_reason: Termination
    initial_objective: float
    layer_order: list = field(default_factory=list)

    @property
    def final_objective(self) -> float:
        if len(self.objective_trace) == 0:
            return self.initial_objective
        return float(self.objective_trace[-1])


def run_polarnet(
    stack: ChannelStack,
    policy: Union[Policy, Sequence[Policy]],
    init: AmplificationProfile,
    criterion: ConvergenceCriterion = ConvergenceCriterion(),
    observer: Optional[Callable[[int, np.ndarray, AmplificationProfile], None]] = None,
) -> RunRecord:
    """Run alternating forward/backward sweeps of per-layer updates.

    Each outer pass visits every layer once; odd passes go BS to UE and even
    passes UE to BS. ``|h_tot|**2`` is recorded after every inner update.
    ``observer(layer, y, profile)`` is called before each update with the
    incrementally maintained observation row.
    """
    check_dimensions(stack, init)
    n = stack.n_layers
    policies = expand_policies(policy, n)
    for i, (pol, a) in enumerate(zip(policies, init.alphas)):
        if not pol.contains(a):
            raise PreconditionError(f"initial gains of layer {i} are outside {pol}")

    profile = init.copy()
    cache = CascadeCache.build(stack, profile)
    h0 = total_channel(stack, profile)
    if h0 == 0:
        raise PreconditionError("initial total channel is zero")

    h = h0
    magnitudes = [abs(h0)]
    trace = []
    order = []
    reason = Termination.MAX_PASSES
    passes = 0
    for p in range(criterion.max_outer_passes):
        passes += 1
        forward = p % 2 == 0
        layers = range(n) if forward else range(n - 1, -1, -1)
        stalled = False
        for i in layers:
            if forward and i > 0 and not cache.forward_clean[i]:
                forward_step(cache, stack, profile, i)
            if not forward and i < n - 1 and not cache.backward_clean[i]:
                backward_step(cache, stack, profile, i)
            y = observation_matrix(stack, profile, i, cache)
            if observer is not None:
                observer(i, y, profile)
            new = layer_update(y, profile.alphas[i], policies[i])
            # unchanged gains leave h_tot untouched; skip the re-evaluation
            if not np.array_equal(new, profile.alphas[i]):
                profile.alphas[i] = new
                cache.invalidate(i)
                h = y @ new
            trace.append(abs(h) ** 2)
            magnitudes.append(abs(h))
            order.append(i)
            if (
                criterion.epsilon is not None
                and len(magnitudes) > n
                and magnitudes[-1] - magnitudes[-1 - n] <= criterion.epsilon
            ):
                stalled = True
                break
        if stalled:
            reason = Termination.EPSILON_STALL
            break

    return RunRecord(
        objective_trace=np.array(trace),
        final_profile=profile,
        passes_used=passes,
        termination_reason=reason,
        initial_objective=abs(h0) ** 2,
        layer_order=order,
    )
