"""Exact event-driven simulation of the N-particle velocity-copy jump process.

Between events particles fly freely.  Events arrive at total rate N; at each
event a chooser ``i`` is drawn uniformly, a partner ``j`` with probability
``pi[i, j]`` (kernel of the partner's neighbour rank), and ``v_i <- v_j``.

Randomness comes from four counter-based (Philox) substreams per run: waiting
times, chooser, partner and initial sampling.  Partners are sampled by first
drawing a rank from the kernel weights and then locating the particle holding
that rank, which gives exactly the law ``pi[i, .]``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from . import _backend, _fallback
from .kernel import DegenerateNormalizerError, KernelSpec, rank_weights
from .rank_engine import Configuration, interaction_probs_rank

__all__ = [
    "INITIAL_LAWS",
    "InitialLaw",
    "RNGStreams",
    "SimState",
    "EventRecord",
    "EventLog",
    "Snapshot",
    "RunResult",
    "GeneratorCheck",
    "make_streams",
    "sample_initial",
    "state_from_configuration",
    "advance_to_next_event",
    "execute_jump",
    "run",
    "generator_value",
    "generator_consistency_check",
]

log = logging.getLogger(__name__)

INITIAL_LAWS = ("uniform_x_two_point_v", "uniform_x_gauss_v", "uniform_x_uniform_v")


@dataclass(frozen=True)
class InitialLaw:
    """Product law f0(x, v) = rho0(x) g(v).

    ``x_amplitude`` tilts the first coordinate's density to
    ``1 + a cos(2 pi x / L)``; 0 gives the uniform law.
    """

    name: str = "uniform_x_two_point_v"
    x_amplitude: float = 0.0

    def __post_init__(self):
        if self.name not in INITIAL_LAWS:
            raise ValueError(f"unknown initial law {self.name!r}; choose from {INITIAL_LAWS}")
        if not -1.0 < self.x_amplitude < 1.0:
            raise ValueError("x_amplitude must lie in (-1, 1)")


@dataclass(frozen=True)
class RNGStreams:
    waits: np.random.Generator
    chooser: np.random.Generator
    partner: np.random.Generator
    init: np.random.Generator


def make_streams(seed: int, stream: int = 0) -> RNGStreams:
    root = np.random.SeedSequence([int(seed), int(stream)])
    gens = [np.random.Generator(np.random.Philox(ss)) for ss in root.spawn(4)]
    return RNGStreams(*gens)


@dataclass
class SimState:
    cfg: Configuration
    time: float
    seed: int
    stream: int
    streams: RNGStreams = field(repr=False)
    jump_count: int = 0
    # absolute time of an already drawn, not yet executed event
    next_event_time: float | None = None

    @property
    def N(self) -> int:
        return self.cfg.N


@dataclass(frozen=True)
class EventRecord:
    time: float
    chooser: int
    partner: int
    velocity: tuple[float, ...]


@dataclass(frozen=True)
class EventLog:
    times: np.ndarray
    choosers: np.ndarray
    partners: np.ndarray
    velocities: np.ndarray  # copied velocity per event, shape (n, d)

    def __len__(self):
        return len(self.times)

    def records(self):
        for k in range(len(self)):
            yield EventRecord(
                float(self.times[k]), int(self.choosers[k]), int(self.partners[k]),
                tuple(float(c) for c in self.velocities[k]),
            )


@dataclass(frozen=True)
class Snapshot:
    time: float
    positions: np.ndarray
    velocities: np.ndarray


@dataclass(frozen=True)
class RunResult:
    final: SimState
    snapshots: list[Snapshot]
    events: EventLog | None


def _sample_positions(rng, n, d, L, amplitude):
    x = rng.random((n, d)) * L
    if amplitude != 0.0:
        # rejection on the first coordinate against 1 + a cos(2 pi x / L)
        first = np.empty(n)
        filled = 0
        while filled < n:
            cand = rng.random(2 * (n - filled) + 8) * L
            acc = rng.random(cand.size) * (1.0 + abs(amplitude))
            keep = cand[acc < 1.0 + amplitude * np.cos(2.0 * np.pi * cand / L)]
            take = min(keep.size, n - filled)
            first[filled:filled + take] = keep[:take]
            filled += take
        x[:, 0] = first
    return _fallback.wrap(x, L)


def _sample_velocities(rng, name, n, d):
    if name == "uniform_x_two_point_v":
        return np.where(rng.random((n, d)) < 0.5, -1.0, 1.0)
    if name == "uniform_x_gauss_v":
        return rng.standard_normal((n, d))
    return rng.uniform(-1.0, 1.0, (n, d))


def sample_initial(n: int, law: InitialLaw | str, seed: int, *, dim: int = 1,
                   L: float = 1.0, periodic: bool = True, stream: int = 0) -> SimState:
    """Draw n i.i.d. particles from ``law``; identical arguments give identical states."""
    if n < 2:
        raise ValueError("need n >= 2 particles")
    if isinstance(law, str):
        law = InitialLaw(law)
    streams = make_streams(seed, stream)
    x = _sample_positions(streams.init, n, dim, L, law.x_amplitude)
    v = _sample_velocities(streams.init, law.name, n, dim)
    cfg = Configuration(x, v, L, periodic)
    return SimState(cfg, 0.0, int(seed), int(stream), streams)


def state_from_configuration(cfg: Configuration, seed: int, stream: int = 0,
                             time: float = 0.0) -> SimState:
    return SimState(cfg, float(time), int(seed), int(stream), make_streams(seed, stream))


@lru_cache(maxsize=64)
def _cum_weights(spec: KernelSpec, N: int) -> np.ndarray:
    w = rank_weights(spec, N)
    if not w.sum() > 0:
        raise DegenerateNormalizerError("rank weights sum to zero")
    cum = np.cumsum(w)
    cum.flags.writeable = False
    return cum


def _moved(cfg: Configuration, dt: float) -> Configuration:
    x = cfg.positions + cfg.velocities * dt
    if cfg.periodic:
        x = _fallback.wrap(x, cfg.L)
    return Configuration(x, cfg.velocities, cfg.L, cfg.periodic)


def advance_to_next_event(state: SimState) -> tuple[SimState, float]:
    """Free flight up to the next event time; returns the new state and the wait."""
    if state.next_event_time is None:
        tau = float(state.streams.waits.exponential(1.0 / state.N))
        t_next = state.time + tau
    else:
        t_next = state.next_event_time
        tau = t_next - state.time
    new = replace(state, cfg=_moved(state.cfg, t_next - state.time), time=t_next,
                  next_event_time=None)
    return new, tau


def execute_jump(state: SimState, spec: KernelSpec) -> tuple[SimState, EventRecord]:
    """Apply one velocity-copy transition at the current time."""
    cfg = state.cfg
    N = cfg.N
    cum = _cum_weights(spec, N)
    i = min(int(state.streams.chooser.random() * N), N - 1)
    rank0 = _fallback.pick_rank(cum, state.streams.partner.random())
    x = np.array(cfg.positions)
    j = _fallback.select_ranked(x, i, rank0, cfg.L, cfg.periodic)
    v = np.array(cfg.velocities)
    v[i] = v[j]
    new_cfg = Configuration(cfg.positions, v, cfg.L, cfg.periodic)
    rec = EventRecord(state.time, i, j, tuple(float(c) for c in v[j]))
    return replace(state, cfg=new_cfg, jump_count=state.jump_count + 1), rec


def _draw_event_times(state: SimState, t_end: float) -> tuple[np.ndarray, float]:
    scale = 1.0 / state.N
    waits = state.streams.waits
    t_next = state.next_event_time
    if t_next is None:
        t_next = state.time + float(waits.exponential(scale))
    times = []
    while t_next <= t_end:
        times.append(t_next)
        t_next = t_next + float(waits.exponential(scale))
    return np.asarray(times, dtype=float), t_next


def run(state: SimState, spec: KernelSpec, t_end: float, snapshot_times=(),
        *, record_events: bool = True, backend=None) -> RunResult:
    """Simulate up to ``t_end``, snapshotting the continuous-time state.

    Equivalent to repeated :func:`advance_to_next_event` / :func:`execute_jump`
    on the same streams; the first event after ``t_end`` is kept pending in
    the returned state.
    """
    if t_end < state.time:
        raise ValueError("t_end precedes the current time")
    snap = np.asarray(sorted(float(t) for t in snapshot_times), dtype=float)
    if snap.size and (snap[0] < state.time or snap[-1] > t_end):
        raise ValueError("snapshot times must lie in [state.time, t_end]")
    impl = backend or _backend
    cfg = state.cfg
    N = cfg.N
    cum = np.ascontiguousarray(_cum_weights(spec, N))
    times, pending = _draw_event_times(state, t_end)
    n_ev = len(times)
    chooser_u = state.streams.chooser.random(n_ev)
    partner_u = state.streams.partner.random(n_ev)
    x = np.array(cfg.positions, order="C")
    v = np.array(cfg.velocities, order="C")
    v0 = v.copy() if record_events else None
    choosers, partners, snap_x, snap_v = impl.simulate_segment(
        x, v, float(cfg.L), bool(cfg.periodic), float(state.time), times,
        chooser_u, partner_u, cum, snap, float(t_end))
    events = None
    if record_events:
        copied = np.empty((n_ev, cfg.dim))
        vel = v0
        for e in range(n_ev):
            vel[choosers[e]] = vel[partners[e]]
            copied[e] = vel[partners[e]]
        events = EventLog(times, choosers, partners, copied)
    final = replace(state, cfg=Configuration(x, v, cfg.L, cfg.periodic), time=float(t_end),
                    jump_count=state.jump_count + n_ev, next_event_time=pending)
    snaps = [Snapshot(float(t), snap_x[k], snap_v[k]) for k, t in enumerate(snap)]
    return RunResult(final, snaps, events)


def generator_value(phi: Callable[[np.ndarray, np.ndarray], float], cfg: Configuration,
                    spec: KernelSpec, eps: float = 1e-6) -> float:
    """``L_N phi`` at ``cfg``: transport by central differences plus the exact jump sum."""
    x = np.array(cfg.positions)
    v = np.array(cfg.velocities)
    base = phi(x, v)
    transport = 0.0
    for i in range(cfg.N):
        for c in range(cfg.dim):
            if v[i, c] == 0.0:
                continue
            xp = x.copy()
            xm = x.copy()
            xp[i, c] += eps
            xm[i, c] -= eps
            transport += v[i, c] * (phi(xp, v) - phi(xm, v)) / (2.0 * eps)
    jump = 0.0
    for i in range(cfg.N):
        pi = interaction_probs_rank(cfg, i, spec)
        for j in range(cfg.N):
            if j == i or pi[j] == 0.0:
                continue
            vj = v.copy()
            vj[i] = v[j]
            jump += pi[j] * (phi(x, vj) - base)
    return transport + jump


@dataclass(frozen=True)
class GeneratorCheck:
    estimate: float
    exact: float
    residual: float
    mc_stderr: float
    replicas: int


def generator_consistency_check(phi, state: SimState, spec: KernelSpec, h: float,
                                replicas: int, seed: int = 0) -> GeneratorCheck:
    """Compare ``(E phi(Z_h) - phi(Z_0)) / h`` over replicas with ``L_N phi(Z_0)``.

    Replicas without an event before ``h`` all end in the same free-flight
    state, so only the jumping ones are simulated individually.
    """
    if h > 0.01 or h <= 0:
        raise ValueError("h must lie in (0, 0.01]")
    if state.N > 5:
        raise ValueError("generator check is limited to N <= 5")
    cfg = state.cfg
    N = cfg.N
    exact = generator_value(phi, cfg, spec)
    phi0 = phi(np.array(cfg.positions), np.array(cfg.velocities))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x6E6])))
    first = rng.exponential(1.0 / N, replicas)
    jumping = np.flatnonzero(first <= h)
    still = _moved(cfg, h)
    phi_still = phi(np.array(still.positions), np.array(still.velocities))
    values = np.full(replicas, phi_still, dtype=float)
    cum = np.ascontiguousarray(_cum_weights(spec, N))
    for r in jumping:
        times = [state.time + first[r]]
        t_next = times[-1] + rng.exponential(1.0 / N)
        while t_next <= state.time + h:
            times.append(t_next)
            t_next += rng.exponential(1.0 / N)
        times = np.asarray(times)
        cu = rng.random(times.size)
        pu = rng.random(times.size)
        x = np.array(cfg.positions, order="C")
        v = np.array(cfg.velocities, order="C")
        _backend.simulate_segment(x, v, float(cfg.L), bool(cfg.periodic), float(state.time),
                                  times, cu, pu, cum, np.empty(0), float(state.time + h))
        values[r] = phi(x, v)
    est = (values.mean() - phi0) / h
    se = values.std(ddof=1) / np.sqrt(replicas) / h
    return GeneratorCheck(float(est), float(exact), float(abs(est - exact)), float(se), replicas)
