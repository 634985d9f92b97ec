"""``topo-align`` command line.

    topo-align <simulate|solve|study|bounds|kernel-check> --config PATH
               [--out DIR] [--workers N] [--seed U64] [-v]

Exit codes: 0 success, 2 config error, 3 numerical degeneracy, 4 I/O error.
Outputs are staged and only moved into ``--out`` when the command succeeds.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

from . import io as tio
from .chaos_metrics import BoundHypothesisError
from .config import ConfigError, StudyConfig, parse_config, with_overrides
from .kernel import DegenerateNormalizerError, KernelError, compute_A
from .kinetic_solver import grid_for_law, initial_distribution, solve, write_csv, write_dump
from .particle_sim import run, sample_initial
from .study import (REPORT_COLUMNS, bounds_table, convergence_study, kernel_diagnostics,
                    run_stream_id)

log = logging.getLogger("topoalign")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

BOUND_COLUMNS = ("N", "t", "j", "alpha", "A", "prop1_bound", "theorem1_bound", "phi_k",
                 "bound_vacuous_flag")


def cmd_simulate(cfg: StudyConfig, out: Path) -> None:
    times = cfg.snapshot_times or (cfg.t_end,)
    for N in cfg.N:
        for r in range(cfg.runs):
            state = sample_initial(N, cfg.law, cfg.seed, dim=cfg.dim, L=cfg.L,
                                   periodic=cfg.periodic, stream=run_stream_id(N, r))
            res = run(state, cfg.kernel, cfg.t_end, times)
            prefix = f"N{N}_run{r:04d}"
            tio.write_event_log(out / f"{prefix}_events.csv", res.events)
            tio.write_snapshots(out, prefix, res.snapshots)
            log.debug("%s: %d events", prefix, len(res.events))
        log.info("simulated N=%d (%d runs)", N, cfg.runs)


def cmd_solve(cfg: StudyConfig, out: Path) -> None:
    if cfg.dim != 1:
        raise ConfigError("config error at geometry/dim: the kinetic solver is 1D only")
    grid = grid_for_law(cfg.law, cfg.solver_Nx, cfg.solver_Nv, cfg.L)
    f0 = initial_distribution(grid, cfg.law)
    times = cfg.snapshot_times or (cfg.t_end,)
    sols = solve(f0, cfg.kernel, cfg.t_end, cfg.solver_dt, times)
    files = []
    for k, (t, f) in enumerate(zip(times, sols)):
        write_csv(f, out / f"f_{k:04d}.csv")
        write_dump(f, out / f"f_{k:04d}.bin")
        files.append({"t": t, "csv": f"f_{k:04d}.csv", "dump": f"f_{k:04d}.bin",
                      "mass": f.mass})
    (out / "solve_manifest.json").write_text(json.dumps({"outputs": files}, indent=2) + "\n",
                                             encoding="utf-8")


def cmd_study(cfg: StudyConfig, out: Path, timestamp: bool = True) -> None:
    report = convergence_study(cfg)
    tio.write_table(out / "report.csv", REPORT_COLUMNS, report.rows,
                    provenance=cfg.to_json(), timestamp=timestamp)
    tio.write_table(out / "slopes.csv", ("t", "metric", "slope"), report.slopes,
                    provenance=cfg.to_json(), timestamp=timestamp)


def cmd_bounds(cfg: StudyConfig, out: Path) -> None:
    A = compute_A(cfg.kernel)
    rows = bounds_table(cfg.N, cfg.bound_t or (cfg.t_end,), cfg.bound_j, cfg.alpha, A)
    tio.write_table(out / "bounds.csv", BOUND_COLUMNS, rows, provenance=cfg.to_json())
    for row in rows:
        print(",".join(tio.fmt(row[c]) for c in BOUND_COLUMNS))


def cmd_kernel_check(cfg: StudyConfig, out: Path) -> None:
    diag = kernel_diagnostics(cfg.kernel, cfg.N)
    (out / "kernel_check.json").write_text(json.dumps(diag, indent=2) + "\n", encoding="utf-8")
    print(f"kernel: {diag['kernel']} (truncation {diag['truncation']})")
    print(f"normalization residual: {diag['normalization_residual']:.3e}")
    print(f"A: {diag['A']:.6g}")
    for row in diag["per_N"]:
        line = (f"N={row['N']}: e_K={row['e_K']:.6e} |e_K|<=A/(N-1): {row['riemann_bound_ok']} "
                f"alpha_N={row['alpha_N']:.6e}")
        if "alpha_bound_ok" in row:
            line += f" alpha_N<=4e^(A/(N-1))/(N-1): {row['alpha_bound_ok']}"
        print(line)


COMMANDS = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "study": cmd_study,
    "bounds": cmd_bounds,
    "kernel-check": cmd_kernel_check,
}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topo-align", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="study config (JSON)")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--workers", type=int, help="parallel ensemble workers")
    p.add_argument("--seed", type=int, help="override the config seed (u64)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        cfg = with_overrides(cfg, seed=args.seed, workers=args.workers, output_dir=args.out)
    except (ConfigError, KernelError) as exc:
        print(f"topo-align: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"topo-align: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    out = Path(cfg.output_dir)
    staging = None
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{out.name}.partial-", dir=out.parent))
        COMMANDS[args.command](cfg, staging)
        out.mkdir(parents=True, exist_ok=True)
        for item in sorted(staging.iterdir()):
            os.replace(item, out / item.name)
    except (ConfigError, KernelError, BoundHypothesisError) as exc:
        print(f"topo-align: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateNormalizerError, ArithmeticError) as exc:
        print(f"topo-align: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"topo-align: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        if staging is not None and staging.exists():
            shutil.rmtree(staging, ignore_errors=True)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
