"""Distances, neighbour ranks and interaction probabilities.

Ordering is done on squared distances with ties broken by ascending particle
index, so every routine here (and the simulation core) agrees on ranks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import DegenerateNormalizerError, KernelSpec, eval_kernel, rank_weights

__all__ = [
    "Configuration",
    "RankTable",
    "torus_distance",
    "squared_distances",
    "build_rank_table",
    "interaction_probs_rank",
    "interaction_probs_chi",
    "ball_counts",
]


@dataclass(frozen=True)
class Configuration:
    """Positions and velocities of N particles, arrays of shape (N, d)."""

    positions: np.ndarray
    velocities: np.ndarray
    L: float = 1.0
    periodic: bool = True

    def __post_init__(self):
        x = np.array(self.positions, dtype=float, order="C")
        v = np.array(self.velocities, dtype=float, order="C")
        if x.ndim == 1:
            x = x[:, None]
        if v.ndim == 1:
            v = v[:, None]
        if x.shape != v.shape:
            raise ValueError(f"positions {x.shape} and velocities {v.shape} differ in shape")
        if x.shape[0] < 2:
            raise ValueError("a configuration needs N >= 2 particles")
        if x.shape[1] not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if not self.L > 0:
            raise ValueError("domain length L must be positive")
        if self.periodic and (np.any(x < 0.0) or np.any(x >= self.L)):
            raise ValueError("positions must lie in [0, L) on the torus")
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class RankTable:
    center: int
    order: np.ndarray  # other particles, nearest first
    ranks: np.ndarray  # ranks[j] = R(center, j); ranks[center] = 0

    @property
    def normalized_ranks(self) -> np.ndarray:
        n_minus_1 = len(self.order)
        out = self.ranks / n_minus_1
        return out


def torus_distance(a, b, L: float = 1.0, periodic: bool = True) -> float:
    delta = np.abs(np.atleast_1d(np.asarray(a, float)) - np.atleast_1d(np.asarray(b, float)))
    if periodic:
        delta = np.minimum(delta, L - delta)
    return float(np.sqrt(np.sum(delta * delta)))


def squared_distances(x: np.ndarray, i: int, L: float, periodic: bool) -> np.ndarray:
    """Squared (torus) distances from particle ``i`` to all particles.

    Accumulated coordinate by coordinate; the compiled core uses the same
    operation order so both produce identical doubles.
    """
    acc = np.zeros(x.shape[0])
    for c in range(x.shape[1]):
        dx = np.abs(x[:, c] - x[i, c])
        if periodic:
            dx = np.minimum(dx, L - dx)
        acc = acc + dx * dx
    return acc


def _order_around(cfg: Configuration, i: int) -> tuple[np.ndarray, np.ndarray]:
    d2 = squared_distances(cfg.positions, i, cfg.L, cfg.periodic)
    d2[i] = -1.0
    order = np.argsort(d2, kind="stable")
    return order[1:], d2


def build_rank_table(cfg: Configuration, i: int) -> RankTable:
    if not 0 <= i < cfg.N:
        raise IndexError(f"particle index {i} out of range")
    order, _ = _order_around(cfg, i)
    ranks = np.zeros(cfg.N, dtype=np.int64)
    ranks[order] = np.arange(1, cfg.N)
    return RankTable(i, order, ranks)


def interaction_probs_rank(cfg: Configuration, i: int, spec: KernelSpec) -> np.ndarray:
    """Row ``pi[i, :]`` from ranks; entry ``i`` is 0."""
    table = build_rank_table(cfg, i)
    w = rank_weights(spec, cfg.N)
    total = w.sum()
    if not total > 0:
        raise DegenerateNormalizerError("rank weights sum to zero")
    pi = np.zeros(cfg.N)
    pi[table.order] = w / total
    return pi


def ball_counts(cfg: Configuration, i: int) -> np.ndarray:
    """Number of k != i inside the closed ball around x_i through x_j, per j."""
    d2 = squared_distances(cfg.positions, i, cfg.L, cfg.periodic)
    others = np.delete(d2, i)
    sorted_others = np.sort(others)
    counts = np.searchsorted(sorted_others, d2, side="right")
    counts[i] = 0
    return counts


def interaction_probs_chi(cfg: Configuration, i: int, spec: KernelSpec) -> np.ndarray:
    """Row ``pi[i, :]`` from closed-ball counts.

    Equals :func:`interaction_probs_rank` when distances from ``x_i`` are
    distinct.  On ties the counts coincide and the row is renormalized so it
    still sums to one.
    """
    N = cfg.N
    counts = ball_counts(cfg, i)
    w = rank_weights(spec, N)
    total = w.sum()
    if not total > 0:
        raise DegenerateNormalizerError("rank weights sum to zero")
    mask = np.arange(N) != i
    pi = np.zeros(N)
    pi[mask] = np.asarray(eval_kernel(spec, counts[mask] / (N - 1))) / total
    row_sum = pi.sum()
    if not row_sum > 0:
        raise DegenerateNormalizerError("ball-count row sums to zero")
    if row_sum != 1.0 and len(np.unique(counts[mask])) < N - 1:
        pi /= row_sum
    return pi
