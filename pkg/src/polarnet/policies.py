"""Per-layer activation sets and their exact linear maximizers.

Every set here is a compact subset of the non-negative orthant. The layer
update only ever needs ``argmax_{a in S} a @ g`` for a real vector ``g``, which
each set solves in closed form. When ``g`` has no positive entry the previous
gains are returned unchanged.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

NORM_TOL = 1e-12


def _check_beta(beta: float) -> None:
    if not beta > 0 or not np.isfinite(beta):
        raise ValueError(f"beta must be positive and finite, got {beta}")


@dataclass(frozen=True)
class Ball2:
    """Non-negative 2-ball: total layer power at most beta**2."""

    beta: float = 1.0

    def __post_init__(self):
        _check_beta(self.beta)

    def contains(self, alpha: np.ndarray, tol: float = NORM_TOL) -> bool:
        alpha = np.asarray(alpha, dtype=float)
        return bool(np.all(alpha >= 0) and np.linalg.norm(alpha) <= self.beta * (1 + tol))

    def maximize(self, g: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        relu = np.maximum(g, 0.0)
        top = relu.max(initial=0.0)
        if top == 0.0:
            return np.array(alpha, dtype=float)
        relu = relu / top  # squared norm would underflow for tiny path gains
        return self.beta * relu / np.linalg.norm(relu)

    def vertices(self, m: int) -> np.ndarray:
        raise ValueError("the 2-ball has no finite vertex set")


@dataclass(frozen=True)
class BallInf:
    """Non-negative inf-ball: every repeater's power at most beta**2."""

    beta: float = 1.0

    def __post_init__(self):
        _check_beta(self.beta)

    def contains(self, alpha: np.ndarray, tol: float = NORM_TOL) -> bool:
        alpha = np.asarray(alpha, dtype=float)
        return bool(np.all(alpha >= 0) and np.max(alpha, initial=0.0) <= self.beta * (1 + tol))

    def maximize(self, g: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        positive = g > 0
        if not positive.any():
            return np.array(alpha, dtype=float)
        return self.beta * positive.astype(float)

    def vertices(self, m: int) -> np.ndarray:
        return self.beta * np.array(list(itertools.product((0.0, 1.0), repeat=m)))


@dataclass(frozen=True)
class AtMostK:
    """At most ``k`` repeaters switched on, each at gain beta."""

    beta: float = 1.0
    k: int = 1

    def __post_init__(self):
        _check_beta(self.beta)
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")

    def contains(self, alpha: np.ndarray, tol: float = NORM_TOL) -> bool:
        alpha = np.asarray(alpha, dtype=float)
        on = alpha == self.beta
        return bool(np.all(on | (alpha == 0.0)) and on.sum() <= self.k)

    def maximize(self, g: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        n_pos = int(np.count_nonzero(g > 0))
        if n_pos == 0:
            return np.array(alpha, dtype=float)
        # stable sort keeps the lowest index first among equal entries
        order = np.argsort(-g, kind="stable")[: min(n_pos, self.k)]
        out = np.zeros(len(g))
        out[order] = self.beta
        return out

    def vertices(self, m: int) -> np.ndarray:
        rows = [np.zeros(m)]
        for size in range(1, min(self.k, m) + 1):
            for idx in itertools.combinations(range(m), size):
                row = np.zeros(m)
                row[list(idx)] = self.beta
                rows.append(row)
        return np.array(rows)


@dataclass(frozen=True)
class SelectOne:
    """Non-negative 1-ball; optima activate a single repeater at gain beta."""

    beta: float = 1.0

    def __post_init__(self):
        _check_beta(self.beta)

    def contains(self, alpha: np.ndarray, tol: float = NORM_TOL) -> bool:
        alpha = np.asarray(alpha, dtype=float)
        return bool(np.all(alpha >= 0) and alpha.sum() <= self.beta * (1 + tol))

    def maximize(self, g: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        j = int(np.argmax(g))  # first maximal index
        if not g[j] > 0:
            return np.array(alpha, dtype=float)
        out = np.zeros(len(g))
        out[j] = self.beta
        return out

    def vertices(self, m: int) -> np.ndarray:
        return np.vstack([np.zeros(m), self.beta * np.eye(m)])


Policy = Union[Ball2, BallInf, AtMostK, SelectOne]
DISCRETE_POLICIES = (BallInf, AtMostK, SelectOne)


def expand_policies(policy: Union[Policy, Sequence[Policy]], n: int) -> list[Policy]:
    """Broadcast a single policy to ``n`` layers, or check a per-layer list."""
    if isinstance(policy, (Ball2, BallInf, AtMostK, SelectOne)):
        return [policy] * n
    policies = list(policy)
    if len(policies) != n:
        raise ValueError(f"expected {n} per-layer policies, got {len(policies)}")
    return policies


def policy_from_dict(spec: dict) -> Policy:
    """Build a policy from ``{"kind": ..., "beta": ..., "k": ...}``."""
    kind = spec["kind"]
    beta = float(spec.get("beta", 1.0))
    if kind == "ball2":
        return Ball2(beta)
    if kind == "ball_inf":
        return BallInf(beta)
    if kind == "at_most_k":
        return AtMostK(beta, int(spec["k"]))
    if kind == "select_one":
        return SelectOne(beta)
    raise ValueError(f"unknown policy kind {kind!r}")
