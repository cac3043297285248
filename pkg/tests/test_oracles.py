import numpy as np
import pytest

import stackliq as sl
from stackliq.equilibrium import MinorResponse
from stackliq.oracles import (
    fbsde_residual,
    gateaux_derivative,
    h0_discrete,
    h0_quadratic_gap,
    h1_discrete_pathwise,
    random_fuel_neutral_direction,
    run_battery,
)
from stackliq.simulate import path_stream


class TestLeaderObjective:
    def test_components_reconcile(self, singleday):
        rep = h0_discrete(
            singleday.strat.nu0_hat,
            singleday.tables,
            singleday.params,
            singleday.signal,
            singleday.grid,
        )
        assert np.isfinite(rep.value)
        assert sum(rep.components.values()) == pytest.approx(rep.value, rel=1e-10)
        assert rep.theta == pytest.approx(49.0)

    def test_rejects_fuel_violation(self, singleday):
        bad = singleday.strat.nu0_hat + 0.1
        with pytest.raises(ValueError):
            h0_discrete(bad, singleday.tables, singleday.params, singleday.signal, singleday.grid)

    def test_constant_rate_optimal_without_signal_or_coupling(self):
        p = sl.ModelParams(
            lambda0=1.0, lambda1=1.0, kappa0=2.0, kappa1=1e-12, alpha=1.0, q0=10.0, T=6.0
        )
        sig = sl.SignalParams(m0=0.0, beta=0.1, sigma=1.0, M0=100.0, sigmaM=1.0)
        g = sl.build_grid(6.0, 801)
        tables = sl.KernelTables(sl.solve_riccati(p, sl.PenaltySpec.zero(), g))
        twap = np.full(g.n_points, 10.0 / 6.0)
        base = h0_discrete(twap, tables, p, sig, g).value
        rng = np.random.default_rng(0)
        for _ in range(100):
            eps = rng.uniform(0.001, 0.1)
            cand = twap + eps * random_fuel_neutral_direction(g, rng)
            assert h0_discrete(cand, tables, p, sig, g).value <= base

    def test_quadratic_identity(self, singleday):
        rng = np.random.default_rng(1)
        other = singleday.strat.nu0_hat + 0.7 * random_fuel_neutral_direction(
            singleday.grid, rng
        )
        measured, predicted = h0_quadratic_gap(
            singleday.strat.nu0_hat,
            other,
            0.35,
            singleday.tables,
            singleday.params,
            singleday.signal,
            singleday.grid,
        )
        assert measured == pytest.approx(predicted, rel=1e-8, abs=1e-10)

    def test_concavity_sampling(self, singleday):
        rng = np.random.default_rng(2)
        for _ in range(10):
            other = singleday.strat.nu0_hat + rng.uniform(0.1, 1.0) * (
                random_fuel_neutral_direction(singleday.grid, rng)
            )
            rho = rng.uniform(0.1, 0.9)
            measured, _ = h0_quadratic_gap(
                singleday.strat.nu0_hat,
                other,
                rho,
                singleday.tables,
                singleday.params,
                singleday.signal,
                singleday.grid,
            )
            assert measured >= -1e-10

    def test_stationarity_discriminates(self, singleday):
        rng = np.random.default_rng(3)
        omega = random_fuel_neutral_direction(singleday.grid, rng)
        at_solution = abs(
            gateaux_derivative(
                singleday.strat.nu0_hat,
                singleday.tables,
                singleday.params,
                singleday.signal,
                omega,
                singleday.grid,
            )
        )
        bench = sl.benchmark_strategy(singleday.params, singleday.signal, singleday.grid.nodes)
        at_benchmark = max(
            abs(
                gateaux_derivative(
                    bench,
                    singleday.tables,
                    singleday.params,
                    singleday.signal,
                    random_fuel_neutral_direction(singleday.grid, rng),
                    singleday.grid,
                )
            )
            for _ in range(20)
        )
        assert at_solution < 1e-4
        assert at_benchmark > 1e-2


class TestFollowerObjective:
    def test_idle_follower_keeps_initial_cash(self, singleday):
        g = singleday.grid
        zeros = np.zeros(g.n_points)
        val = h1_discrete_pathwise(
            zeros, zeros, zeros, singleday.strat.nu0_hat,
            singleday.params, singleday.phi, g,
        )
        assert val == singleday.params.x1

    def test_terminal_penalty_monotone_in_alpha(self, singleday):
        g = singleday.grid
        rng = np.random.default_rng(4)
        nu1 = rng.standard_normal(g.n_points) * 0.1
        q1 = -sl.cum_integral(nu1, g)
        assert abs(q1[-1]) > 1e-3
        mu = rng.standard_normal(g.n_points)
        lo = sl.ModelParams(lambda0=1, lambda1=1, kappa0=2, kappa1=2, alpha=10, q0=10, T=6)
        hi = sl.ModelParams(lambda0=1, lambda1=1, kappa0=2, kappa1=2, alpha=20, q0=10, T=6)
        v_lo = h1_discrete_pathwise(nu1, q1, mu, singleday.strat.nu0_hat, lo, singleday.phi, g)
        v_hi = h1_discrete_pathwise(nu1, q1, mu, singleday.strat.nu0_hat, hi, singleday.phi, g)
        assert v_hi < v_lo

    def test_equilibrium_beats_perturbed_feedback(self, singleday):
        # Common-random-path Monte Carlo: the solved response should beat
        # deterministic perturbations of its rate within three standard errors.
        g = singleday.grid
        n_paths = 2000
        z = np.empty((n_paths, g.n_points - 1))
        for k in range(n_paths):
            z[k] = path_stream(99, k).standard_normal(g.n_points - 1)
        mu = sl.simulate_ou_path(singleday.signal, g, z)
        response = MinorResponse.build(
            singleday.tables, singleday.params, singleday.signal, singleday.strat.nu0_hat
        )
        state = response.paths(mu)
        base = h1_discrete_pathwise(
            state.nu1, state.Q1, mu, singleday.strat.nu0_hat,
            singleday.params, singleday.phi, g,
        )
        rng = np.random.default_rng(5)
        for _ in range(50):
            eps = rng.uniform(0.01, 0.2)
            omega = random_fuel_neutral_direction(g, rng)
            nu1 = state.nu1 + eps * omega
            q1 = -sl.cum_integral(nu1, g)
            cand = h1_discrete_pathwise(
                nu1, q1, mu, singleday.strat.nu0_hat,
                singleday.params, singleday.phi, g,
            )
            gap = base - cand
            se = gap.std(ddof=1) / np.sqrt(n_paths)
            assert gap.mean() >= -3.0 * se


class TestFirstOrderSystem:
    def test_zero_driver_zero_residual(self, singleday):
        g = singleday.grid
        zeros = np.zeros(g.n_points)
        state = sl.minor_strategy_path(singleday.tables, zeros)
        res = fbsde_residual(state, zeros, zeros, singleday.params, singleday.tables)
        assert res.drift == 0.0 and res.terminal == 0.0

    def test_deterministic_signal_residuals(self, singleday):
        def residuals(n):
            g = sl.build_grid(6.0, n)
            tables = sl.KernelTables(
                sl.solve_riccati(singleday.params, singleday.phi, g)
            )
            sig0 = sl.SignalParams(m0=-0.5, beta=0.1, sigma=0.0, M0=100.0, sigmaM=0.0)
            nu0 = sl.benchmark_strategy(singleday.params, sig0, g.nodes)
            response = MinorResponse.build(tables, singleday.params, sig0, nu0)
            mu = sl.mu_bar(sig0, g.nodes)
            state = response.paths(mu)
            return fbsde_residual(state, nu0, mu, singleday.params, tables)

        coarse = residuals(1001)
        fine = residuals(2001)
        assert coarse.terminal < 1e-6 and fine.terminal < 1e-6
        assert coarse.drift / fine.drift > 1.8  # at least first-order decay


class TestBattery:
    def test_all_pass_on_reference_setup(self, singleday):
        checks = run_battery(
            singleday.params,
            singleday.signal,
            singleday.phi,
            singleday.grid,
            rank=300,
            seed=17,
            mc_paths=200,
            threads=2,
        )
        failed = [c.name for c in checks if not c.passed]
        assert failed == []
        names = {c.name for c in checks}
        assert {"fuel_constraint", "fredholm_residual", "gateaux_stationarity"} <= names
