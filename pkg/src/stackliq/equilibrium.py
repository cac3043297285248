"""Leader-follower equilibrium of the execution game.

The liquidator's optimal deterministic rate solves a second-kind Fredholm
equation under a fuel constraint; we solve it with the rank-n degenerate
operator and, for the zero-penalty slice, cross-check against the
truncated eigen-resolvent.  The fast trader's response is path-wise and
signal-adaptive: a predictable process r0 drives the feedback rule
nu1 = -(r0 + r1 * Q1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .model import ModelParams, SignalParams, TimeGrid, cum_integral, inner_product, quad_integral
from .operators import (
    DegenerateOperator,
    KernelTables,
    SpectrumPhi0,
    apply_G,
    apply_K1_star,
    apply_Rn,
    apply_S,
    apply_resolvent,
)


def mu_bar(signal: SignalParams, t):
    """Expected signal value m0 * exp(-beta t) of the mean-reverting signal."""
    return signal.m0 * np.exp(-signal.beta * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class MajorStrategy:
    """Solved liquidator rate: the rank-n solution nu0_n, its uniform
    refinement nu0_hat, the fuel multiplier eta_n and diagnostics."""

    grid: TimeGrid
    nu0_n: np.ndarray = field(repr=False)
    nu0_hat: np.ndarray = field(repr=False)
    eta_n: float
    rank: int
    fuel_error: float
    fredholm_residual: float


def compute_eta_n(op: DegenerateOperator, s_mu_bar: np.ndarray, q0: float, lambda0: float) -> float:
    """Fuel multiplier eta_n = 2 lambda0 (q0 - <Rn S mu_bar, 1>) / <Rn 1, 1>.

    A non-positive denominator signals that the rank is too small.
    """
    grid = op.grid
    ones = np.ones(grid.n_points)
    denom = inner_product(apply_Rn(op, ones), ones, grid)
    if denom <= 0.0:
        raise NumericalError(
            f"<Rn 1, 1> = {denom:.3e} is not positive; increase the rank and retry"
        )
    num = q0 - inner_product(apply_Rn(op, s_mu_bar), ones, grid)
    return 2.0 * lambda0 * num / denom


def solve_major(
    op: DegenerateOperator,
    tables: KernelTables,
    params: ModelParams,
    signal: SignalParams,
) -> MajorStrategy:
    """Solve the liquidator's constrained problem at the operator's rank.

    nu0_n solves (I + c*G_n) nu = S mu_bar + eta_n/(2 lambda0); the
    refinement nu0_hat = -c*G nu0_n + S mu_bar + eta_n/(2 lambda0) restores
    uniform accuracy.  Both satisfy the fuel constraint to round-off because
    the cosine directions integrate to exactly zero on the grid.
    """
    grid = op.grid
    mubar = mu_bar(signal, grid.nodes)
    s_mubar = apply_S(tables, params, mubar)
    eta = compute_eta_n(op, s_mubar, params.q0, params.lambda0)
    rhs = s_mubar + eta / (2.0 * params.lambda0)
    nu0_n = apply_Rn(op, rhs)
    nu0_hat = -params.coupling * apply_G(tables, nu0_n) + rhs
    fuel_error = abs(quad_integral(nu0_hat, grid) - params.q0)
    residual = float(
        np.max(np.abs(nu0_hat + params.coupling * apply_G(tables, nu0_hat) - rhs))
    )
    return MajorStrategy(
        grid=grid,
        nu0_n=nu0_n,
        nu0_hat=nu0_hat,
        eta_n=eta,
        rank=op.n,
        fuel_error=fuel_error,
        fredholm_residual=residual,
    )


def solve_major_spectral(
    spec: SpectrumPhi0,
    tables: KernelTables,
    params: ModelParams,
    signal: SignalParams,
) -> np.ndarray:
    """Liquidator rate through the truncated eigen-resolvent (zero-penalty
    slice only); used as an independent route to validate the rank-n path."""
    grid = tables.grid
    ones = np.ones(grid.n_points)
    eig = spec.eigenfunctions(grid.nodes)
    mubar = mu_bar(signal, grid.nodes)
    s_mubar = apply_S(tables, params, mubar)
    r_one = apply_resolvent(spec, tables, params, ones, eig_samples=eig)
    r_smu = apply_resolvent(spec, tables, params, s_mubar, eig_samples=eig)
    denom = inner_product(r_one, ones, grid)
    if denom <= 0.0:
        raise NumericalError(f"<R 1, 1> = {denom:.3e} is not positive")
    eta = 2.0 * params.lambda0 * (params.q0 - inner_product(r_smu, ones, grid)) / denom
    return eta / (2.0 * params.lambda0) * r_one + r_smu


def benchmark_strategy(params: ModelParams, signal: SignalParams, t):
    """Liquidation rate of a leader who ignores the fast trader's flow:

        q0/T + (m0/(2 lambda0 beta)) * (1 - beta*T*exp(-beta t) - exp(-beta T)) / (beta T).

    Reduces to the constant q0/T schedule when m0 = 0; integrates to q0 for
    every parameter choice.
    """
    tt = np.asarray(t, dtype=float)
    bT = signal.beta * params.T
    base = params.q0 / params.T
    tilt = (signal.m0 / (2.0 * params.lambda0 * signal.beta)) * (
        (1.0 - bT * np.exp(-signal.beta * tt) - np.exp(-bT)) / bT
    )
    out = base + tilt
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class MinorPathState:
    """Follower state along one path (or a batch of paths): signal, the
    predictable driver r0, the trading rate and the inventory."""

    mu: np.ndarray | None
    r0: np.ndarray = field(repr=False)
    nu1: np.ndarray = field(repr=False)
    Q1: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MinorResponse:
    """Deterministic precomputation of the follower's best response to a
    fixed leader rate; per-path evaluation is then O(nodes).

    signal_weight(t) = ∫_t^T k(t,s) e^{-beta (s-t)} ds converts the current
    signal value into its expected future contribution, and flow_term is
    the K1*-image of the leader's rate.
    """

    grid: TimeGrid
    lambda1: float
    kappa0: float
    r1: np.ndarray = field(repr=False)
    xi_plus: np.ndarray = field(repr=False)
    xi_minus: np.ndarray = field(repr=False)
    signal_weight: np.ndarray = field(repr=False)
    flow_term: np.ndarray = field(repr=False)

    @classmethod
    def build(
        cls,
        tables: KernelTables,
        params: ModelParams,
        signal: SignalParams,
        nu0: np.ndarray,
    ) -> "MinorResponse":
        grid = tables.grid
        nodes = grid.nodes
        decay = np.exp(-signal.beta * nodes)
        c = cum_integral(tables.xi_plus * decay, grid)
        weight = tables.xi_minus / decay * (c[-1] - c)
        flow = apply_K1_star(tables, np.asarray(nu0, dtype=float))
        return cls(
            grid=grid,
            lambda1=params.lambda1,
            kappa0=params.kappa0,
            r1=tables.r1,
            xi_plus=tables.xi_plus,
            xi_minus=tables.xi_minus,
            signal_weight=weight,
            flow_term=flow,
        )

    def r0(self, mu_path) -> np.ndarray:
        """Predictable driver r0(t) for given signal path(s), shape (..., nodes)."""
        mu = np.asarray(mu_path, dtype=float)
        return (mu * self.signal_weight - self.kappa0 * self.flow_term) / (2.0 * self.lambda1)

    def paths(self, mu_path) -> MinorPathState:
        """Follower rate and inventory along the given signal path(s)."""
        mu = np.asarray(mu_path, dtype=float)
        r0 = self.r0(mu)
        q1 = self.xi_plus * cum_integral(self.xi_minus * r0, self.grid)
        nu1 = -(r0 + self.r1 * q1)
        return MinorPathState(mu=mu, r0=r0, nu1=nu1, Q1=q1)


def minor_r0_path(
    tables: KernelTables,
    params: ModelParams,
    signal: SignalParams,
    mu_path,
    nu0,
) -> np.ndarray:
    """Predictable driver of the follower's response for one signal path."""
    return MinorResponse.build(tables, params, signal, nu0).r0(mu_path)


def minor_strategy_path(tables: KernelTables, r0_path, mu_path=None) -> MinorPathState:
    """Follower inventory Q1 = xi_plus ∫_0^t xi_minus r0 and feedback rate
    nu1 = -(r0 + r1 Q1), evaluated from a precomputed r0 path."""
    grid = tables.grid
    r0 = np.asarray(r0_path, dtype=float)
    if r0.shape[-1] != grid.n_points:
        raise ValueError("r0 path not sampled on the tables' grid")
    q1 = tables.xi_plus * cum_integral(tables.xi_minus * r0, grid)
    nu1 = -(r0 + tables.r1 * q1)
    mu = None if mu_path is None else np.asarray(mu_path, dtype=float)
    return MinorPathState(mu=mu, r0=r0, nu1=nu1, Q1=q1)


def expected_minor_r0(
    tables: KernelTables, params: ModelParams, nu0, mu_bar_samples
) -> np.ndarray:
    """Cross-sectional mean of the follower's driver:

        E[r0](t) = (1/(2 l1)) (K1* mu_bar)(t) - (k0/(2 l1)) (K1* nu0)(t).
    """
    k_mu = apply_K1_star(tables, np.asarray(mu_bar_samples, dtype=float))
    k_nu = apply_K1_star(tables, np.asarray(nu0, dtype=float))
    return (k_mu - params.kappa0 * k_nu) / (2.0 * params.lambda1)


def expected_minor_rate(
    tables: KernelTables, params: ModelParams, nu0, mu_bar_samples
) -> np.ndarray:
    """Cross-sectional mean of the follower's optimal rate:

        E[nu1](t) = (k0/(2 l1)) [(K1* nu0)(t) + r1(t) (G nu0)(t)]
                  - (1/(2 l1)) [(K1* mu_bar)(t) + r1(t) (G mu_bar)(t)].
    """
    nu = np.asarray(nu0, dtype=float)
    mb = np.asarray(mu_bar_samples, dtype=float)
    lead = apply_K1_star(tables, nu) + tables.r1 * apply_G(tables, nu)
    sig = apply_K1_star(tables, mb) + tables.r1 * apply_G(tables, mb)
    return (params.kappa0 * lead - sig) / (2.0 * params.lambda1)
