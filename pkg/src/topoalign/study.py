"""Ensemble orchestration and the convergence study.

Runs are independent; each gets its own seeded stream keyed by (N, run index),
so results do not depend on how runs are spread over workers.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import chaos_metrics as cm
from .config import StudyConfig
from .kernel import KernelSpec, alpha_N, compute_A, normalization_residual, riemann_error
from .kinetic_solver import grid_for_law, initial_distribution, solve
from .particle_sim import InitialLaw, run, sample_initial

__all__ = [
    "EnsembleResult",
    "run_stream_id",
    "run_ensemble",
    "StudyReport",
    "REPORT_COLUMNS",
    "convergence_study",
    "bounds_table",
    "kernel_diagnostics",
]

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("N", "t", "metric", "value", "stderr", "prop1_bound",
                  "theorem1_bound", "bound_vacuous_flag")

_STREAM_STRIDE = 1_000_000


def run_stream_id(N: int, r: int) -> int:
    return N * _STREAM_STRIDE + r


@dataclass(frozen=True)
class EnsembleResult:
    """Snapshot arrays of shape (runs, times, N, d) plus per-run jump counts."""

    N: int
    times: tuple[float, ...]
    positions: np.ndarray
    velocities: np.ndarray
    jump_counts: np.ndarray

    def at(self, k: int) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.positions[r, k], self.velocities[r, k]) for r in range(len(self.positions))]


def _one_run(args):
    N, r, seed, law, spec, dim, L, periodic, t_end, times = args
    state = sample_initial(N, law, seed, dim=dim, L=L, periodic=periodic,
                           stream=run_stream_id(N, r))
    res = run(state, spec, t_end, times, record_events=False)
    sx = np.stack([s.positions for s in res.snapshots]) if res.snapshots else np.empty((0, N, dim))
    sv = np.stack([s.velocities for s in res.snapshots]) if res.snapshots else np.empty((0, N, dim))
    return sx, sv, res.final.jump_count


def run_ensemble(N: int, runs: int, seed: int, law: InitialLaw, spec: KernelSpec,
                 t_end: float, times, *, dim: int = 1, L: float = 1.0,
                 periodic: bool = True, workers: int = 1) -> EnsembleResult:
    times = tuple(float(t) for t in times)
    jobs = [(N, r, seed, law, spec, dim, L, periodic, t_end, times) for r in range(runs)]
    if workers <= 1:
        out = [_one_run(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_one_run, jobs, chunksize=max(1, runs // (4 * workers))))
    pos = np.stack([o[0] for o in out])
    vel = np.stack([o[1] for o in out])
    jumps = np.array([o[2] for o in out], dtype=np.int64)
    return EnsembleResult(N, times, pos, vel, jumps)


@dataclass
class StudyReport:
    config: StudyConfig
    rows: list[dict] = field(default_factory=list)
    slopes: list[dict] = field(default_factory=list)
    A: float = math.nan

    def value(self, N: int, t: float, metric: str) -> float:
        for row in self.rows:
            if row["N"] == N and row["t"] == t and row["metric"] == metric:
                return row["value"]
        raise KeyError((N, t, metric))

    def series(self, t: float, metric: str) -> tuple[list[int], list[float]]:
        rows = [r for r in self.rows if r["t"] == t and r["metric"] == metric]
        return [r["N"] for r in rows], [r["value"] for r in rows]


def _bounds_for(N, t, s, A, alpha):
    p1 = cm.prop1_bound(s, N, A)
    th = cm.theorem1_bound(s, t, N, A, alpha)
    return p1, th, cm.is_vacuous(th, s)


def convergence_study(cfg: StudyConfig, *, workers: int | None = None) -> StudyReport:
    """Simulate ensembles for every N, solve the kinetic reference, and tabulate
    marginal distances, correlation defects and the analytic bounds."""
    workers = cfg.workers if workers is None else workers
    spec = cfg.kernel
    A = compute_A(spec)
    alpha = cfg.alpha[0]
    times = cfg.snapshot_times or (cfg.t_end,)
    report = StudyReport(cfg, A=A)
    if math.isfinite(A) and cm.is_vacuous(cm.theorem1_bound(1, max(times), max(cfg.N), A, alpha), 1):
        log.warning("theorem-1 bound is vacuous at t=%g for A=%.4g", max(times), A)

    refs = None
    if cfg.dim == 1:
        grid = grid_for_law(cfg.law, cfg.solver_Nx, cfg.solver_Nv, cfg.L)
        f0 = initial_distribution(grid, cfg.law)
        refs = solve(f0, spec, max(times), cfg.solver_dt, times)
        x_edges, v_edges = cm.histogram_for_grid(grid, cfg.x_bins)

    defect_rows: dict[tuple[float, str], list[tuple[int, float]]] = {}
    for N in cfg.N:
        log.info("N=%d: %d runs on %d worker(s)", N, cfg.runs, workers)
        ens = run_ensemble(N, cfg.runs, cfg.seed, cfg.law, spec, cfg.t_end, times,
                           dim=cfg.dim, L=cfg.L, periodic=cfg.periodic, workers=workers)
        for k, t in enumerate(times):
            snaps = ens.at(k)
            rows = []
            if refs is not None:
                p1, th, vac = _bounds_for(N, t, 1, A, alpha)
                f_ref = refs[k]
                for est in ("tagged", "pooled"):
                    hist = cm.empirical_marginal(snaps, x_edges, v_edges, est)
                    for metric in cfg.metrics:
                        val = cm.marginal_distance(hist, f_ref, metric)
                        rows.append((f"{metric}_{est}", val, math.nan, p1, th, vac))
                    if "L1" in cfg.metrics:
                        q = cm.solver_masses_on(hist, f_ref)
                        floor = cm.l1_noise_floor(q, hist.samples)
                        l1 = cm.marginal_distance(hist, f_ref, "L1")
                        rows.append((f"L1_noise_floor_{est}", floor, math.nan, p1, th, vac))
                        rows.append((f"L1_excess_{est}", l1 - floor, math.nan, p1, th, vac))
            p2, th2, vac2 = _bounds_for(N, t, 2, A, alpha)
            for pair in cm.DEFAULT_TEST_PAIRS:
                for est in ("tagged", "pooled"):
                    if cfg.runs < 2:
                        continue
                    m = cm.pair_moments(snaps, pair, cfg.L, est)
                    val, se = cm.chaos_defect(m)
                    name = f"defect_{est}:{pair.name}"
                    rows.append((name, val, se, p2, th2, vac2))
                    defect_rows.setdefault((t, name), []).append((N, val))
            rows.append(("mean_jumps_per_particle", float(ens.jump_counts.mean() / N),
                         float(ens.jump_counts.std(ddof=1) / N / math.sqrt(cfg.runs))
                         if cfg.runs > 1 else math.nan, math.nan, math.nan, False))
            for name, val, se, p1_, th_, vac_ in rows:
                report.rows.append({
                    "N": N, "t": t, "metric": name, "value": val, "stderr": se,
                    "prop1_bound": p1_, "theorem1_bound": th_, "bound_vacuous_flag": vac_,
                })
    for (t, name), pts in sorted(defect_rows.items()):
        ns = [p[0] for p in pts]
        vals = [p[1] for p in pts]
        report.slopes.append({"t": t, "metric": name, "slope": cm.loglog_slope(ns, vals)
                              if len(ns) > 1 else math.nan})
    return report


def bounds_table(Ns, times, js, alphas, A: float) -> list[dict]:
    rows = []
    for alpha in alphas:
        for j in js:
            for t in times:
                for N in Ns:
                    th = cm.theorem1_bound(j, t, N, A, alpha)
                    rows.append({
                        "N": N, "t": t, "j": j, "alpha": alpha, "A": A,
                        "prop1_bound": cm.prop1_bound(j, N, A),
                        "theorem1_bound": th,
                        "phi_k": cm.phi_iteration(int(math.ceil(8 * A * t)) if math.isfinite(A) else 0, N, alpha),
                        "bound_vacuous_flag": cm.is_vacuous(th, j),
                    })
    return rows


def kernel_diagnostics(spec: KernelSpec, Ns) -> dict:
    A = compute_A(spec)
    per_N = []
    for N in Ns:
        e = riemann_error(spec, N)
        row = {"N": N, "e_K": e, "riemann_bound": A / (N - 1),
               "riemann_bound_ok": abs(e) <= A / (N - 1), "alpha_N": alpha_N(spec, N)}
        if N > 2 * A + 1:
            row["alpha_bound"] = 4.0 * math.exp(A / (N - 1)) / (N - 1)
            row["alpha_bound_ok"] = row["alpha_N"] <= row["alpha_bound"]
        per_N.append(row)
    return {
        "kernel": spec.name,
        "truncation": spec.truncation,
        "normalization_residual": normalization_residual(spec),
        "A": A,
        "per_N": per_N,
    }
