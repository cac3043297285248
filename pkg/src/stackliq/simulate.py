"""Monte Carlo market simulation: signal, price, executions, cash,
benchmark savings and intraday volume curves.

Paths use counter-based random streams keyed by (seed, path index), so a
path's noise does not depend on how many paths are drawn or in which order
they are generated; runs with a common seed consume identical noise, which
is what the benchmark comparison relies on.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .equilibrium import MinorResponse
from .model import ModelParams, SignalParams, TimeGrid, cum_integral, quad_integral
from .operators import KernelTables

_OUTPUT_FLAGS = frozenset({"signal", "noise", "price", "execution", "rates", "inventories"})
DEFAULT_OUTPUTS = frozenset({"signal", "noise", "price", "execution", "rates", "inventories"})


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo controls.

    ``outputs`` selects which per-node series the result keeps (terminal
    cash is always kept); ``bin_minutes`` is the volume-bin width and
    ``minutes_per_unit`` maps one grid time unit to clock minutes (60 when
    the horizon is in hours).
    """

    n_paths: int
    seed: int
    bin_minutes: int = 1
    minutes_per_unit: float = 60.0
    outputs: frozenset = DEFAULT_OUTPUTS
    threads: int = 0  # 0 = one worker per available core

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.bin_minutes < 1:
            raise ValueError(f"bin_minutes must be >= 1, got {self.bin_minutes}")
        if self.seed < 0 or self.seed > 2**64 - 1:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.threads < 0:
            raise ValueError(f"threads must be >= 0, got {self.threads}")
        unknown = set(self.outputs) - _OUTPUT_FLAGS
        if unknown:
            raise ValueError(f"unknown output flags: {sorted(unknown)}")


def path_stream(seed: int, path_index: int) -> np.random.Generator:
    """Independent counter-based stream for one path."""
    key = np.array([seed, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw_noise(cfg: SimulationConfig, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-path standard normal increments, shape (n_paths, n_steps) each."""
    z_mu = np.empty((cfg.n_paths, n_steps))
    z_m = np.empty((cfg.n_paths, n_steps))

    def fill(lo: int, hi: int) -> None:
        for k in range(lo, hi):
            gen = path_stream(cfg.seed, k)
            z_mu[k] = gen.standard_normal(n_steps)
            z_m[k] = gen.standard_normal(n_steps)

    workers = cfg.threads if cfg.threads > 0 else (os.cpu_count() or 1)
    if workers == 1 or cfg.n_paths < 2 * workers:
        fill(0, cfg.n_paths)
    else:
        chunk = math.ceil(cfg.n_paths / workers)
        bounds = [(i, min(i + chunk, cfg.n_paths)) for i in range(0, cfg.n_paths, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: fill(*b), bounds))
    return z_mu, z_m


def simulate_ou_path(signal: SignalParams, grid: TimeGrid, z: np.ndarray) -> np.ndarray:
    """Exact-transition sampling of the mean-reverting signal from given
    standard normal increments z of shape (..., n_points - 1)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != grid.n_points - 1:
        raise ValueError("need one normal increment per grid step")
    decay = math.exp(-signal.beta * grid.dt)
    scale = signal.sigma * math.sqrt((1.0 - decay * decay) / (2.0 * signal.beta))
    mu = np.empty(z.shape[:-1] + (grid.n_points,))
    mu[..., 0] = signal.m0
    for j in range(grid.n_points - 1):
        mu[..., j + 1] = mu[..., j] * decay + scale * z[..., j]
    return mu


@dataclass
class SimulationResult:
    """Per-path series (on the selected outputs) and terminal cash.

    ``nu0`` is the shared deterministic leader rate; stochastic series have
    shape (n_paths, n_points).  The visible price decomposes as
    price = M0 + price_noise + ∫mu - impact at every node.
    """

    grid: TimeGrid
    config: SimulationConfig
    nu0: np.ndarray
    x0_terminal: np.ndarray
    x1_terminal: np.ndarray
    mu: np.ndarray | None = None
    price_noise: np.ndarray | None = None
    price: np.ndarray | None = None
    exec_price_major: np.ndarray | None = None
    exec_price_minor: np.ndarray | None = None
    nu1: np.ndarray | None = None
    Q0: np.ndarray | None = None
    Q1: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.config.n_paths


def simulate_market(
    params: ModelParams,
    signal: SignalParams,
    tables: KernelTables,
    nu0,
    cfg: SimulationConfig,
) -> SimulationResult:
    """Simulate the market under a fixed leader rate with the follower
    playing her signal-adaptive best response path by path."""
    grid = tables.grid
    nu0 = np.asarray(nu0, dtype=float)
    if nu0.shape != (grid.n_points,):
        raise ValueError("leader rate must be sampled on the simulation grid")

    response = MinorResponse.build(tables, params, signal, nu0)
    z_mu, z_m = _draw_noise(cfg, grid.n_points - 1)
    mu = simulate_ou_path(signal, grid, z_mu)

    noise = np.zeros((cfg.n_paths, grid.n_points))
    np.cumsum(z_m * math.sqrt(grid.dt), axis=-1, out=noise[:, 1:])
    noise *= signal.sigmaM

    state = response.paths(mu)
    nu1 = state.nu1
    q1 = state.Q1

    drift = cum_integral(mu, grid)
    impact = cum_integral(params.kappa0 * nu0 + params.kappa1 * nu1, grid)
    price = signal.M0 + noise + drift - impact
    s0 = price - params.lambda0 * nu0
    s1 = price - params.lambda1 * nu1
    x0_terminal = params.x0 + quad_integral(s0 * nu0, grid)
    x1_terminal = params.x1 + quad_integral(s1 * nu1, grid)

    for name, arr in (("price", price), ("cash", x0_terminal), ("cash", x1_terminal)):
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite {name} series produced by the simulation")

    keep = cfg.outputs
    return SimulationResult(
        grid=grid,
        config=cfg,
        nu0=nu0,
        x0_terminal=x0_terminal,
        x1_terminal=x1_terminal,
        mu=mu if "signal" in keep else None,
        price_noise=noise if "noise" in keep else None,
        price=price if "price" in keep else None,
        exec_price_major=s0 if "execution" in keep else None,
        exec_price_minor=s1 if "execution" in keep else None,
        nu1=nu1 if "rates" in keep else None,
        Q0=params.q0 - cum_integral(nu0, grid) if "inventories" in keep else None,
        Q1=q1 if "inventories" in keep else None,
    )


def savings_bps(result_opt: SimulationResult, result_bm: SimulationResult) -> np.ndarray:
    """Per-path relative terminal-cash improvement, in basis points:

        (X0_opt - X0_bm) / X0_bm * 1e4.

    The two results must come from runs with a common seed and path count
    so the comparison is path-by-path on identical noise.  Paths with zero
    benchmark cash are reported as NaN.
    """
    if result_opt.config.seed != result_bm.config.seed:
        raise ValueError("savings need common random numbers: seeds differ")
    if result_opt.n_paths != result_bm.n_paths:
        raise ValueError("savings need matching path counts")
    bm = result_bm.x0_terminal
    opt = result_opt.x0_terminal
    out = np.full(bm.shape, np.nan)
    ok = bm != 0.0
    out[ok] = (opt[ok] - bm[ok]) / bm[ok] * 1.0e4
    return out


@dataclass(frozen=True)
class VolumeCurve:
    """Binned traded volume: log(1 + volume) per path per bin and the
    cross-sectional median per bin.  bin_start_minutes marks the left edge
    of each bin in clock minutes from the session open."""

    bin_start_minutes: np.ndarray
    log_volume: np.ndarray = field(repr=False)
    median: np.ndarray = field(repr=False)


def volume_curve(result: SimulationResult, cfg: SimulationConfig | None = None) -> VolumeCurve:
    """Aggregate |nu0| + |nu1| into uniform clock-minute bins.

    The bin width must divide the horizon and the grid intervals must align
    with the bins; within a bin, volume is the trapezoid integral of the
    absolute rates, so bin totals add up to the whole-horizon integral.
    """
    cfg = cfg or result.config
    if result.nu1 is None:
        raise ValueError("volume needs the 'rates' output flag on the simulation")
    grid = result.grid
    total_minutes = grid.T * cfg.minutes_per_unit
    n_bins_f = total_minutes / cfg.bin_minutes
    n_bins = round(n_bins_f)
    if abs(n_bins_f - n_bins) > 1e-9 or n_bins < 1:
        raise ValueError(
            f"bin width {cfg.bin_minutes} min does not divide the horizon of {total_minutes:g} min"
        )
    intervals = grid.n_points - 1
    if intervals % n_bins != 0:
        raise ValueError(
            f"bin misalignment: {intervals} grid intervals cannot be split into {n_bins} bins"
        )
    per_bin = intervals // n_bins
    rate = np.abs(result.nu0) + np.abs(result.nu1)
    seg = 0.5 * (rate[..., :-1] + rate[..., 1:]) * grid.dt
    volumes = seg.reshape(seg.shape[0], n_bins, per_bin).sum(axis=2)
    log_volume = np.log1p(volumes)
    starts = np.arange(n_bins) * float(cfg.bin_minutes)
    return VolumeCurve(
        bin_start_minutes=starts,
        log_volume=log_volume,
        median=np.median(log_volume, axis=0),
    )
