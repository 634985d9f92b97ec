"""Empirical marginals, distances to the kinetic solution, correlation
defects, and the closed-form error bounds they are compared against."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .kinetic_solver import DistributionFn, PhaseGrid

__all__ = [
    "Histogram",
    "IncompatibleBinning",
    "BoundHypothesisError",
    "TestPair",
    "DEFAULT_TEST_PAIRS",
    "empirical_marginal",
    "histogram_for_grid",
    "marginal_distance",
    "l1_noise_floor",
    "solver_masses_on",
    "w1_velocity",
    "contraction_holds",
    "CONSTANT_PAIR",
    "PairMoments",
    "pair_moments",
    "chaos_defect",
    "prop1_bound",
    "theorem1_bound",
    "is_vacuous",
    "phi_iteration",
    "contraction_threshold",
    "loglog_slope",
]

LOG2 = math.log(2.0)


class IncompatibleBinning(ValueError):
    pass


class BoundHypothesisError(ValueError):
    pass


@dataclass(frozen=True)
class Histogram:
    """Probability histogram over (x, v) cells; ``probs`` has shape (nx, nv)."""

    x_edges: np.ndarray
    v_edges: np.ndarray
    probs: np.ndarray
    samples: int

    @property
    def nx(self) -> int:
        return len(self.x_edges) - 1

    @property
    def nv(self) -> int:
        return len(self.v_edges) - 1


def histogram_for_grid(grid: PhaseGrid, nx: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Default binning: ``nx`` x-bins, velocity bins equal to the solver cells."""
    x_edges = np.linspace(0.0, grid.L, nx + 1)
    v_edges = grid.v_min + np.arange(grid.Nv + 1) * grid.dv
    return x_edges, v_edges


def empirical_marginal(snapshots: Sequence, x_edges, v_edges,
                       estimator: str = "tagged") -> Histogram:
    """One-particle histogram from per-run snapshots (1D phase space).

    ``tagged`` uses particle 0 of every run; ``pooled`` uses all particles.
    Each snapshot may be a :class:`Snapshot` or a ``(positions, velocities)`` pair.
    """
    if len(snapshots) == 0:
        raise ValueError("no snapshots to build a marginal from")
    xs, vs = [], []
    for s in snapshots:
        x, v = (s.positions, s.velocities) if hasattr(s, "positions") else s
        x = np.asarray(x, dtype=float).reshape(len(x), -1)[:, 0]
        v = np.asarray(v, dtype=float).reshape(len(v), -1)[:, 0]
        if estimator == "tagged":
            xs.append(x[:1])
            vs.append(v[:1])
        elif estimator == "pooled":
            xs.append(x)
            vs.append(v)
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
    x = np.concatenate(xs)
    v = np.concatenate(vs)
    x_edges = np.asarray(x_edges, float)
    v_edges = np.asarray(v_edges, float)
    counts, _, _ = np.histogram2d(x, v, bins=[x_edges, v_edges])
    n = x.size
    return Histogram(x_edges, v_edges, counts / n, n)


def solver_masses_on(hist: Histogram, f: DistributionFn) -> np.ndarray:
    g = f.grid
    masses = f.cell_masses()
    if g.Nx % hist.nx:
        raise IncompatibleBinning(f"solver Nx={g.Nx} is not a multiple of {hist.nx} x-bins")
    if g.Nv % hist.nv:
        raise IncompatibleBinning(f"solver Nv={g.Nv} is not a multiple of {hist.nv} v-bins")
    gx = np.linspace(0.0, g.L, hist.nx + 1)
    gv = np.linspace(g.v_min, g.v_max, hist.nv + 1)
    if not (np.allclose(gx, hist.x_edges) and np.allclose(gv, hist.v_edges)):
        raise IncompatibleBinning("histogram edges do not align with the solver grid")
    rx, rv = g.Nx // hist.nx, g.Nv // hist.nv
    return masses.reshape(hist.nx, rx, hist.nv, rv).sum(axis=(1, 3))


def marginal_distance(hist: Histogram, f: DistributionFn, metric: str = "L1") -> float:
    """``L1``: sum of |cell mass differences| (in [0, 2]).
    ``W1v``: mean over x-bins of the velocity Wasserstein-1 distance between
    the conditional laws, velocities placed at bin centres."""
    q = solver_masses_on(hist, f)
    p = hist.probs
    if metric == "L1":
        return float(np.abs(p - q).sum())
    if metric != "W1v":
        raise ValueError(f"unknown metric {metric!r}")
    centres = 0.5 * (hist.v_edges[1:] + hist.v_edges[:-1])
    gaps = np.diff(centres)
    out = []
    for a in range(hist.nx):
        pa, qa = p[a].sum(), q[a].sum()
        if pa <= 0 or qa <= 0:
            continue
        Fp = np.cumsum(p[a] / pa)[:-1]
        Fq = np.cumsum(q[a] / qa)[:-1]
        out.append(float(np.sum(np.abs(Fp - Fq) * gaps)))
    return float(np.mean(out)) if out else 0.0


def w1_velocity(p, q, centres) -> float:
    """W1 between two discrete laws on common sorted atoms."""
    p = np.asarray(p, float) / np.sum(p)
    q = np.asarray(q, float) / np.sum(q)
    return float(np.sum(np.abs(np.cumsum(p - q)[:-1]) * np.diff(centres)))


def l1_noise_floor(q: np.ndarray, n: int) -> float:
    """Expected L1 error of an n-sample multinomial histogram of law ``q``
    (normal approximation, ``sum sqrt(2 q (1 - q) / (pi n))``)."""
    q = np.asarray(q, float).ravel()
    return float(np.sum(np.sqrt(2.0 * q * (1.0 - q) / (math.pi * n))))


# -- correlation defects ----------------------------------------------------

@dataclass(frozen=True)
class TestPair:
    __test__ = False  # not a pytest class

    name: str
    phi: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    psi: Callable[[np.ndarray, np.ndarray, float], np.ndarray]


def _v(x, v, L):
    return v[:, 0]


def _sinx(x, v, L):
    return np.sin(2.0 * np.pi * x[:, 0] / L)


def _v_sinx(x, v, L):
    return v[:, 0] * np.sin(2.0 * np.pi * x[:, 0] / L)


def _one(x, v, L):
    return np.ones(x.shape[0])


DEFAULT_TEST_PAIRS = (
    TestPair("v,v", _v, _v),
    TestPair("sin,sin", _sinx, _sinx),
    TestPair("vsin,v", _v_sinx, _v),
)
CONSTANT_PAIR = TestPair("1,1", _one, _one)


@dataclass(frozen=True)
class PairMoments:
    """Per-run ingredients of a two-particle correlation estimate.

    Arrays have one entry per run: ``fg`` estimates E[phi(z1) psi(z2)],
    ``f`` and ``g`` the single-particle means.
    """

    pair: str
    estimator: str
    fg: np.ndarray
    f: np.ndarray
    g: np.ndarray


def pair_moments(snapshots: Sequence, pair: TestPair, L: float = 1.0,
                 estimator: str = "tagged") -> PairMoments:
    """``tagged``: particles 0 and 1 of each run.  ``pooled``: the U-statistic
    over all ordered pairs i != j within each run (same target by exchangeability)."""
    fg, f, g = [], [], []
    for s in snapshots:
        x, v = (s.positions, s.velocities) if hasattr(s, "positions") else s
        x = np.asarray(x, float).reshape(len(x), -1)
        v = np.asarray(v, float).reshape(len(v), -1)
        a = pair.phi(x, v, L)
        b = pair.psi(x, v, L)
        if estimator == "tagged":
            fg.append(a[0] * b[1])
            f.append(a[0])
            g.append(b[1])
        elif estimator == "pooled":
            n = a.size
            fg.append((a.sum() * b.sum() - np.dot(a, b)) / (n * (n - 1)))
            f.append(a.mean())
            g.append(b.mean())
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
    return PairMoments(pair.name, estimator, np.asarray(fg), np.asarray(f), np.asarray(g))


def _defect_stat(fg, f, g):
    return abs(fg.mean() - f.mean() * g.mean())


def chaos_defect(m: PairMoments) -> tuple[float, float]:
    """``|E[phi psi] - E[phi] E[psi]|`` and its leave-one-run-out jackknife SE."""
    R = m.fg.size
    if R < 2:
        raise ValueError("need at least 2 runs for a jackknife error")
    value = _defect_stat(m.fg, m.f, m.g)
    # leave-one-out means without re-summing
    sfg, sf, sg = m.fg.sum(), m.f.sum(), m.g.sum()
    loo = np.abs((sfg - m.fg) / (R - 1) - ((sf - m.f) / (R - 1)) * ((sg - m.g) / (R - 1)))
    se = math.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2))
    return float(value), float(se)


# -- analytic bounds --------------------------------------------------------

def prop1_bound(s: int, N: int, A: float) -> float:
    """``22 A^2 e^{A/(N-1)} s^2 / (N-1)``."""
    if N < 2:
        raise ValueError("need N >= 2")
    if math.isinf(A):
        return math.inf
    try:
        growth = math.exp(A / (N - 1))
    except OverflowError:
        return math.inf
    return 22.0 * A * A * growth * s * s / (N - 1)


def _check_alpha(alpha: float):
    if not alpha > LOG2:
        raise BoundHypothesisError(f"alpha must exceed log 2 (got {alpha})")


def theorem1_bound(j: int, t: float, N: int, A: float, alpha: float) -> float:
    """``2^j (N-1)^{-exp(-alpha (8 A t + 1))}``."""
    _check_alpha(alpha)
    if N < 2:
        raise ValueError("need N >= 2")
    if math.isinf(A) and t > 0:
        return 2.0**j
    expo = math.exp(-alpha * (8.0 * A * t + 1.0))
    return 2.0**j * (N - 1) ** (-expo)


def is_vacuous(bound: float, j: int) -> bool:
    return bound >= 2.0**j * (1.0 - 1e-9)


def phi_iteration(k: int, N: int, alpha: float) -> float:
    """``(N-1)^{-exp(-alpha k)}``."""
    _check_alpha(alpha)
    if k < 0 or N < 2:
        raise ValueError("need k >= 0 and N >= 2")
    return (N - 1) ** (-math.exp(-alpha * k))


def contraction_holds(k: int, N: int, alpha: float) -> bool:
    """Whether ``(N-1)^{e^{-alpha k}} phi(k-1, N) <= phi(k, N) / 2``."""
    _check_alpha(alpha)
    if k < 1 or N < 3:
        raise ValueError("need k >= 1 and N >= 3")
    # compared in logs so that astronomically large N stays meaningful
    ell = math.log(N - 1)
    log_lhs = math.exp(-alpha * k) * ell - math.exp(-alpha * (k - 1)) * ell
    log_rhs = -math.exp(-alpha * k) * ell - LOG2
    return log_lhs <= log_rhs


def contraction_threshold(k: int, alpha: float) -> float:
    """Smallest real N above which the contraction step of the iteration holds.

    The inequality reduces to ``(N-1)^{-e^{-alpha k}(e^alpha - 2)} <= 1/2``.
    """
    _check_alpha(alpha)
    if k < 1:
        raise ValueError("contraction applies for k >= 1")
    expo = math.exp(-alpha * k) * (math.exp(alpha) - 2.0)
    log_nm1 = LOG2 / expo
    if log_nm1 > 700:
        return math.inf
    return 1.0 + math.exp(log_nm1)


def loglog_slope(ns, values) -> float:
    """Least-squares slope of log(value) against log(N)."""
    ns = np.asarray(ns, float)
    vals = np.asarray(values, float)
    keep = vals > 0
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(ns[keep]), np.log(vals[keep]), 1)[0])
