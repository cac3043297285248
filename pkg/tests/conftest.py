"""Shared solved environments; building them once keeps the suite fast."""

from types import SimpleNamespace

import pytest

import stackliq as sl

IMPACT = dict(lambda0=1.0, lambda1=1.0, kappa0=2.0, kappa1=2.0, q0=10.0)


def _solve_env(params, signal, phi, n_points=2001, rank=300):
    grid = sl.build_grid(params.T, n_points)
    tables = sl.KernelTables(sl.solve_riccati(params, phi, grid))
    op = sl.build_degenerate(tables, params, rank)
    strat = sl.solve_major(op, tables, params, signal)
    return SimpleNamespace(
        params=params, signal=signal, phi=phi, grid=grid, tables=tables, op=op, strat=strat
    )


@pytest.fixture(scope="session")
def singleday():
    """Six-hour liquidation with a flat running penalty (time unit: hours)."""
    params = sl.ModelParams(alpha=50.0, T=6.0, **IMPACT)
    signal = sl.SignalParams(m0=-0.5, beta=0.1, sigma=1.5, M0=100.0, sigmaM=1.0)
    return _solve_env(params, signal, sl.PenaltySpec.constant(1.0))


@pytest.fixture(scope="session")
def multiday():
    """Business-week liquidation with the steep periodic end-of-day penalty."""
    params = sl.ModelParams(alpha=10.0, T=5.0, **IMPACT)
    signal = sl.SignalParams(m0=-0.5, beta=0.1, sigma=4.0, M0=100.0, sigmaM=1.0)
    return _solve_env(params, signal, sl.PenaltySpec.periodic(500.0, 15.0, 1.0))


@pytest.fixture(scope="session")
def nopenalty():
    """Zero running penalty, where the explicit eigensystem is available."""
    params = sl.ModelParams(alpha=10.0, T=6.0, **IMPACT)
    signal = sl.SignalParams(m0=-0.5, beta=0.1, sigma=1.5, M0=100.0, sigmaM=1.0)
    env = _solve_env(params, signal, sl.PenaltySpec.zero())
    env.spectrum = sl.spectrum_phi0(params, 200)
    return env
