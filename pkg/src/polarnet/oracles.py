"""Ground-truth solvers and a symbol-level simulator for validation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import AmplificationProfile, ChannelStack, check_dimensions
from .network import SeedLike, complex_normal
from .policies import DISCRETE_POLICIES, AtMostK, Policy, SelectOne, expand_policies
from .snr import NoiseModel

MAX_ENUMERATION = 10**6


class DegenerateInstanceError(ValueError):
    """Every BS-UE path crosses a zero channel entry."""


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class PathSolution:
    """One repeater per layer (0-based indices) and its ``|h_tot|``."""

    indices: tuple[int, ...]
    objective: float
    log_objective: float


def path_magnitude(stack: ChannelStack, indices: Sequence[int], betas: Sequence[float]) -> float:
    """``|h_tot|`` when only the repeaters in ``indices`` are on, at gains ``betas``."""
    value = abs(stack[0][indices[0], 0]) * betas[0]
    for i in range(1, len(indices)):
        value *= abs(stack[i][indices[i], indices[i - 1]]) * betas[i]
    return value * abs(stack[-1][0, indices[-1]])


def dag_select_one_optimum(stack: ChannelStack, betas: Union[float, Sequence[float]] = 1.0) -> PathSolution:
    """Best single-repeater-per-layer path via longest path on log magnitudes.

    Cost is one pass over every inter-layer matrix. Ties go to the lowest index.
    """
    n = stack.n_layers
    betas = [float(betas)] * n if np.isscalar(betas) else [float(b) for b in betas]
    if len(betas) != n or any(not b > 0 for b in betas):
        raise ValueError("need one positive beta per layer")
    with np.errstate(divide="ignore"):
        logs = [np.log(np.abs(h)) for h in stack.matrices]
    score = logs[0][:, 0] + math.log(betas[0])
    parents = []
    for i in range(1, n):
        cand = score[None, :] + logs[i]  # (m_i, m_{i-1})
        best = np.argmax(cand, axis=1)
        parents.append(best)
        score = cand[np.arange(cand.shape[0]), best] + math.log(betas[i])
    final = score + logs[n][0, :]
    last = int(np.argmax(final))
    if not np.isfinite(final[last]):
        raise DegenerateInstanceError("all paths contain a zero channel entry")
    path = [last]
    for best in reversed(parents):
        path.append(int(best[path[-1]]))
    path.reverse()
    return PathSolution(
        indices=tuple(path),
        objective=path_magnitude(stack, path, betas),
        log_objective=float(final[last]),
    )


def enumerate_select_one_paths(stack: ChannelStack, betas: Union[float, Sequence[float]] = 1.0) -> PathSolution:
    """Brute-force counterpart of :func:`dag_select_one_optimum`.

    Paths are visited in lexicographic order and only a strictly larger value
    replaces the incumbent.
    """
    n = stack.n_layers
    betas = [float(betas)] * n if np.isscalar(betas) else [float(b) for b in betas]
    best_path, best = None, -1.0
    for path in itertools.product(*(range(m) for m in stack.layer_sizes)):
        value = path_magnitude(stack, path, betas)
        if value > best:
            best_path, best = path, value
    if best <= 0:
        raise DegenerateInstanceError("all paths contain a zero channel entry")
    return PathSolution(tuple(best_path), best, math.log(best))


def exhaustive_discrete_optimum(
    stack: ChannelStack,
    policy: Union[Policy, Sequence[Policy]],
    limit: int = MAX_ENUMERATION,
) -> float:
    """Maximum ``|h_tot|^2`` over every combination of per-layer vertices.

    The objective is convex in each layer's gains, so a maximum over a
    polytope sits at a vertex; enumerating vertex combinations is exact for
    the inf-ball, at-most-K and 1-ball sets.
    """
    n = stack.n_layers
    policies = expand_policies(policy, n)
    if not all(isinstance(p, DISCRETE_POLICIES) for p in policies):
        raise TypeError("exhaustive search only supports BallInf, AtMostK and SelectOne")
    verts = []
    total = 1
    for m, pol in zip(stack.layer_sizes, policies):
        if isinstance(pol, SelectOne):
            count = m + 1
        elif isinstance(pol, AtMostK):
            count = sum(math.comb(m, r) for r in range(min(pol.k, m) + 1))
        else:
            count = 2**m
        total *= count
        if total > limit:
            raise InstanceTooLargeError(f"more than {limit} feasible combinations")
        verts.append(pol.vertices(m))
    # states[c] is the signal arriving at the current layer for combination c
    states = stack[0][:, 0][None, :]
    for i, v in enumerate(verts):
        out = (states[:, None, :] * v[None, :, :]).reshape(-1, v.shape[1])
        states = out @ stack[i + 1].T
    return float(np.max(np.abs(states[:, 0]) ** 2))


def simulate_transmission(
    stack: ChannelStack,
    profile: AmplificationProfile,
    noise: NoiseModel,
    direction: str,
    symbol: complex,
    draws: int,
    seed: SeedLike,
    chunk: int = 250000,
) -> tuple[np.ndarray, float]:
    """Propagate a symbol hop by hop with receiver noise at every node.

    Each repeater layer receives ``H x_prev + w_i`` and forwards
    ``D_i (H x_prev + w_i)``. Downlink runs BS to UE; uplink runs UE to BS over
    the transposed channels. Returns the received samples and the empirical
    variance of ``y - h x`` (``h`` is the noiseless end-to-end channel).
    """
    check_dimensions(stack, profile)
    if draws < 1:
        raise ValueError("draws must be >= 1")
    direction = direction.upper()
    if direction not in ("DL", "UL"):
        raise ValueError(f"direction must be DL or UL, got {direction!r}")
    n = stack.n_layers
    rng = np.random.default_rng(seed)
    if direction == "DL":
        hops = list(stack.matrices)
        gains = list(profile.alphas)
        sig = list(noise.repeaters)
        rx_sigma = noise.ue
    else:
        hops = [h.T for h in reversed(stack.matrices)]
        gains = list(reversed(profile.alphas))
        sig = list(reversed(noise.repeaters))
        rx_sigma = noise.bs

    outputs = []
    for count in _chunks(draws, chunk):
        x = np.full((count, 1), complex(symbol))
        for k in range(n):
            received = x @ hops[k].T + complex_normal(rng, (count, hops[k].shape[0]), sig[k])
            x = received * gains[k]
        y = x @ hops[n].T + complex_normal(rng, (count, 1), rx_sigma)
        outputs.append(y[:, 0])
    y = np.concatenate(outputs)

    noiseless = np.full((1, 1), complex(symbol))
    for k in range(n):
        noiseless = (noiseless @ hops[k].T) * gains[k]
    clean = (noiseless @ hops[n].T)[0, 0]
    err = y - clean
    return y, float(np.var(err))


def _chunks(total: int, chunk: int):
    done = 0
    while done < total:
        size = min(chunk, total - done)
        yield size
        done += size
