"""Command-line entry point.

Subcommands: riccati, spectrum, kernel, solve, simulate, compare, volume,
verify, reproduce.  Every run writes its CSVs into --out and finishes with
a manifest.json listing parameters, timings and produced files; the
manifest is written last and marks a completed run.

Exit codes: 0 ok, 1 verification failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import importlib.resources
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .equilibrium import benchmark_strategy, mu_bar, solve_major
from .errors import ConfigError, NumericalError
from .model import cum_integral
from .operators import KernelTables, build_degenerate, spectrum_phi0
from .oracles import run_battery
from .riccati import solve_riccati
from .simulate import SimulationConfig, savings_bps, simulate_market, volume_curve

_FIGURES = {
    "fig1": "multiday.cfg",
    "fig2": "singleday.cfg",
    "fig3": "singleday.cfg",
    "fig4": "savings.cfg",
    "fig5": "volume.cfg",
}

_FLOAT_FMT = "%.17g"


class _Run:
    """Collects outputs and timings, then seals the manifest."""

    def __init__(self, out_dir: str, subcommand: str, config_path: str, cfg: RunConfig):
        self.out_dir = out_dir
        self.subcommand = subcommand
        self.config_path = config_path
        self.cfg = cfg
        self.outputs: list[str] = []
        self.timings: dict[str, float] = {}
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def table(self, name: str, header: list[str], columns: list[np.ndarray], fmts=None) -> None:
        """Write aligned columns as CSV with LF endings and 17 significant
        digits for floating values."""
        cols = [np.asarray(c) for c in columns]
        fmts = fmts or [_FLOAT_FMT] * len(cols)
        data = np.column_stack([c.astype(float) for c in cols])
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            np.savetxt(fh, data, fmt=list(fmts), delimiter=",", newline="\n")
        self.outputs.append(name)

    def rows(self, name: str, header: list[str], rows: list[list]) -> None:
        def fmt(v):
            if isinstance(v, float):
                return _FLOAT_FMT % v
            return str(v)

        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(fmt(v) for v in row) + "\n")
        self.outputs.append(name)

    def time_phase(self, name: str, fn):
        start = time.perf_counter()
        result = fn()
        self.timings[name] = time.perf_counter() - start
        return result

    def seal(self) -> None:
        manifest = {
            "artifact_version": __version__,
            "subcommand": self.subcommand,
            "config": self.config_path,
            "out_dir": os.path.abspath(self.out_dir),
            "seed": self.cfg.simulation.seed,
            "parameters": self.cfg.source,
            "resolved": {
                "grid_points": self.cfg.grid.n_points,
                "rank": self.cfg.rank,
                "spectrum_terms": self.cfg.spectrum_terms,
                "n_paths": self.cfg.simulation.n_paths,
                "threads": self.cfg.simulation.threads,
            },
            "timings_seconds": self.timings,
            "outputs": self.outputs,
        }
        with open(self.path("manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _solve_pipeline(cfg: RunConfig, run: _Run):
    tables = run.time_phase(
        "riccati", lambda: KernelTables(solve_riccati(cfg.params, cfg.penalty, cfg.grid))
    )
    op = run.time_phase("degenerate_operator", lambda: build_degenerate(tables, cfg.params, cfg.rank))
    strat = run.time_phase("solve_major", lambda: solve_major(op, tables, cfg.params, cfg.signal))
    return tables, op, strat


def _cmd_riccati(cfg: RunConfig, run: _Run) -> int:
    sol = run.time_phase("riccati", lambda: solve_riccati(cfg.params, cfg.penalty, cfg.grid))
    run.table(
        "riccati.csv",
        ["t", "r1", "xi_plus", "xi_minus", "cum_xi_minus_sq"],
        [cfg.grid.nodes, sol.r1, sol.xi_plus, sol.xi_minus, sol.cum_xi_minus_sq],
    )
    return 0


def _cmd_spectrum(cfg: RunConfig, run: _Run) -> int:
    spec = run.time_phase("spectrum", lambda: spectrum_phi0(cfg.params, cfg.spectrum_terms))
    idx = np.arange(1, spec.n_terms + 1)
    run.table(
        "spectrum.csv",
        ["n", "z_n", "zeta_n"],
        [idx, spec.roots, spec.eigenvalues],
        fmts=["%d", _FLOAT_FMT, _FLOAT_FMT],
    )
    return 0


def _cmd_kernel(cfg: RunConfig, run: _Run) -> int:
    tables = run.time_phase(
        "riccati", lambda: KernelTables(solve_riccati(cfg.params, cfg.penalty, cfg.grid))
    )
    stride = max(1, (cfg.grid.n_points - 1) // 50)
    t, mat = tables.g_matrix(stride=stride)
    rows_t = np.repeat(t, len(t))
    rows_s = np.tile(t, len(t))
    run.table("kernel.csv", ["t", "s", "G"], [rows_t, rows_s, mat.ravel()])
    return 0


def _cmd_solve(cfg: RunConfig, run: _Run) -> int:
    tables, _, strat = _solve_pipeline(cfg, run)
    grid = cfg.grid
    bench = benchmark_strategy(cfg.params, cfg.signal, grid.nodes)
    q_star = cfg.params.q0 - cum_integral(strat.nu0_hat, grid)
    q_bm = cfg.params.q0 - cum_integral(bench, grid)
    run.table(
        "solve.csv",
        ["t", "nu0_hat", "nu0_bm", "Q0_star", "Q0_bm", "mu_bar"],
        [grid.nodes, strat.nu0_hat, bench, q_star, q_bm, mu_bar(cfg.signal, grid.nodes)],
    )
    run.rows(
        "summary.csv",
        ["eta_n", "fuel_error", "rank", "fredholm_residual"],
        [[strat.eta_n, strat.fuel_error, strat.rank, strat.fredholm_residual]],
    )
    print(
        f"eta_n={strat.eta_n:.12g} fuel_error={strat.fuel_error:.3e} "
        f"rank={strat.rank} fredholm_residual={strat.fredholm_residual:.3e}"
    )
    return 0


def _write_paths(run: _Run, cfg: RunConfig, sim) -> None:
    grid = cfg.grid
    n, p = grid.n_points, sim.n_paths
    ids = np.repeat(np.arange(p), n)
    t = np.tile(grid.nodes, p)

    def flat(series, fallback=np.nan):
        if series is None:
            return np.full(p * n, fallback)
        return np.broadcast_to(series, (p, n)).ravel()

    run.table(
        "paths.csv",
        ["path_id", "t", "mu", "price", "nu0", "nu1", "Q0", "Q1"],
        [
            ids,
            t,
            flat(sim.mu),
            flat(sim.price),
            flat(sim.nu0),
            flat(sim.nu1),
            flat(sim.Q0),
            flat(sim.Q1),
        ],
        fmts=["%d"] + [_FLOAT_FMT] * 7,
    )
    run.table(
        "summary.csv",
        ["path_id", "X0_T", "X1_T"],
        [np.arange(p), sim.x0_terminal, sim.x1_terminal],
        fmts=["%d", _FLOAT_FMT, _FLOAT_FMT],
    )


def _cmd_simulate(cfg: RunConfig, run: _Run) -> int:
    tables, _, strat = _solve_pipeline(cfg, run)
    sim = run.time_phase(
        "simulate",
        lambda: simulate_market(cfg.params, cfg.signal, tables, strat.nu0_hat, cfg.simulation),
    )
    run.time_phase("write", lambda: _write_paths(run, cfg, sim))
    return 0


def _cmd_compare(cfg: RunConfig, run: _Run) -> int:
    tables, _, strat = _solve_pipeline(cfg, run)
    bench = benchmark_strategy(cfg.params, cfg.signal, cfg.grid.nodes)
    sim_cfg = cfg.simulation
    sim_opt = run.time_phase(
        "simulate_optimal",
        lambda: simulate_market(cfg.params, cfg.signal, tables, strat.nu0_hat, sim_cfg),
    )
    sim_bm = run.time_phase(
        "simulate_benchmark",
        lambda: simulate_market(cfg.params, cfg.signal, tables, bench, sim_cfg),
    )
    sav = savings_bps(sim_opt, sim_bm)
    valid = sav[np.isfinite(sav)]
    run.table(
        "savings.csv",
        ["path_id", "savings_bps"],
        [np.arange(len(sav)), sav],
        fmts=["%d", _FLOAT_FMT],
    )
    mean = float(valid.mean())
    se = float(valid.std(ddof=1) / np.sqrt(len(valid))) if len(valid) > 1 else float("nan")
    q25, med, q75 = (float(x) for x in np.percentile(valid, [25.0, 50.0, 75.0]))
    tstat = mean / se if se > 0 else float("nan")
    run.rows(
        "savings_summary.csv",
        ["n_paths", "n_valid", "mean_bps", "median_bps", "q25_bps", "q75_bps", "std_error_bps", "t_stat"],
        [[len(sav), len(valid), mean, med, q25, q75, se, tstat]],
    )
    print(f"savings mean={mean:.6g} bps (t={tstat:.3g}, {len(valid)} paths)")
    return 0


def _cmd_volume(cfg: RunConfig, run: _Run) -> int:
    tables, _, strat = _solve_pipeline(cfg, run)
    sim_cfg = cfg.simulation
    if "rates" not in sim_cfg.outputs:
        sim_cfg = dataclasses.replace(sim_cfg, outputs=sim_cfg.outputs | {"rates"})
    sim = run.time_phase(
        "simulate",
        lambda: simulate_market(cfg.params, cfg.signal, tables, strat.nu0_hat, sim_cfg),
    )
    curve = run.time_phase("volume", lambda: volume_curve(sim, sim_cfg))
    n_bins = len(curve.bin_start_minutes)
    p = sim.n_paths
    run.table(
        "volume.csv",
        ["bin_start_minutes", "path_id", "log_volume"],
        [
            np.tile(curve.bin_start_minutes, p),
            np.repeat(np.arange(p), n_bins),
            curve.log_volume.ravel(),
        ],
        fmts=[_FLOAT_FMT, "%d", _FLOAT_FMT],
    )

    def clock(minutes: float) -> str:
        total = int(round(10 * 60 + minutes))  # grid time 0 labels 10 AM
        return f"{total // 60:02d}:{total % 60:02d}"

    run.rows(
        "volume_median.csv",
        ["bin_start_minutes", "clock", "median_log_volume"],
        [
            [float(m), clock(m), float(v)]
            for m, v in zip(curve.bin_start_minutes, curve.median)
        ],
    )
    return 0


def _cmd_verify(cfg: RunConfig, run: _Run) -> int:
    checks = run.time_phase(
        "battery",
        lambda: run_battery(
            cfg.params,
            cfg.signal,
            cfg.penalty,
            cfg.grid,
            cfg.rank,
            seed=cfg.simulation.seed,
            mc_paths=min(cfg.simulation.n_paths, 500),
            threads=cfg.simulation.threads,
        ),
    )
    run.rows(
        "verify.csv",
        ["oracle", "statistic", "comparison", "threshold", "result"],
        [
            [c.name, c.statistic, c.comparison, c.threshold, "pass" if c.passed else "FAIL"]
            for c in checks
        ],
    )
    failed = [c for c in checks if not c.passed]
    for c in checks:
        status = "pass" if c.passed else "FAIL"
        print(f"{status:4s}  {c.name:32s} {c.statistic:.6e} {c.comparison} {c.threshold:.6e}")
    if failed:
        print(f"{len(failed)} oracle(s) failed", file=sys.stderr)
        return 1
    return 0


_DISPATCH = {
    "riccati": _cmd_riccati,
    "spectrum": _cmd_spectrum,
    "kernel": _cmd_kernel,
    "solve": _cmd_solve,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
    "volume": _cmd_volume,
    "verify": _cmd_verify,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stackliq",
        description="Leader-follower optimal-execution solver and market simulator.",
    )
    p.add_argument("--version", action="version", version=f"stackliq {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="configuration file")
        sp.add_argument("--out", default="stackliq_out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override [simulation] seed")
        sp.add_argument("--paths", type=int, default=None, help="override [simulation] n_paths")
        sp.add_argument("--rank", type=int, default=None, help="override [numerics] rank")
        sp.add_argument("--grid", type=int, default=None, help="override [grid] n_points")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (0 = cores)")

    for name in _DISPATCH:
        common(sub.add_parser(name))
    rep = sub.add_parser("reproduce", help="run a canned experiment")
    rep.add_argument("figure", choices=sorted(_FIGURES), help="which experiment to run")
    common(rep, config_required=False)
    return p


def _reproduce(figure: str) -> tuple[str, RunConfig, str]:
    resource = importlib.resources.files("stackliq").joinpath("configs", _FIGURES[figure])
    with importlib.resources.as_file(resource) as path:
        cfg = load_config(str(path))
        config_path = str(path)
    if figure == "fig1":
        # The multi-day illustration shows a handful of follower paths.
        cfg = cfg.with_overrides(n_paths=3)
    experiment = {"fig1": "simulate", "fig2": "simulate", "fig3": "simulate",
                  "fig4": "compare", "fig5": "volume"}[figure]
    return experiment, cfg, config_path


def _run(argv) -> int:
    args = _parser().parse_args(argv)
    if args.subcommand == "reproduce":
        experiment, cfg, config_path = _reproduce(args.figure)
        subcommand = f"reproduce {args.figure}"
    else:
        experiment = args.subcommand
        config_path = args.config
        cfg = load_config(config_path)
        subcommand = args.subcommand
    cfg = cfg.with_overrides(
        seed=args.seed,
        n_paths=args.paths,
        rank=args.rank,
        grid_points=args.grid,
        threads=args.threads,
    )
    run = _Run(args.out, subcommand, config_path, cfg)
    if args.subcommand == "reproduce" and experiment != "solve":
        # Figure runs also need the deterministic strategy curves.
        code = _cmd_solve(cfg, run)
        if code == 0:
            code = _DISPATCH[experiment](cfg, run)
    else:
        code = _DISPATCH[experiment](cfg, run)
    run.seal()
    return code


def main(argv=None) -> int:
    try:
        return _run(argv)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
