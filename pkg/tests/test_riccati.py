import math

import numpy as np
import pytest

import stackliq as sl
from stackliq.errors import NumericalError

IMPACT = dict(lambda0=1.0, lambda1=1.0, kappa0=2.0, kappa1=2.0, q0=10.0)


def constant_penalty_gain(params, level, t):
    """Independent closed form for a constant running penalty.

    With w = sqrt(level/lambda1) the gain follows the tanh branch when the
    terminal value lies inside (-w, w) and the coth branch outside.
    """
    w = math.sqrt(level / params.lambda1)
    rT = params.terminal_gain
    if abs(rT) < w:
        return w * np.tanh(w * (t - params.T) + np.arctanh(rT / w))
    if abs(rT) == w:
        return np.full_like(np.asarray(t, dtype=float), rT)
    return w / np.tanh(w * (t - params.T) + np.arctanh(w / rT))


class TestZeroPenalty:
    def test_degenerate_terminal_condition_gives_flat_zero(self):
        p = sl.ModelParams(alpha=1.0, T=4.0, **IMPACT)  # 2*alpha == kappa1
        g = sl.build_grid(4.0, 801)
        sol = sl.solve_riccati(p, sl.PenaltySpec.zero(), g)
        assert np.max(np.abs(sol.r1)) == 0.0
        assert np.allclose(sol.xi_plus, 1.0) and np.allclose(sol.xi_minus, 1.0)
        assert sol.cum_xi_minus_sq == pytest.approx(g.nodes, abs=1e-12)

    @pytest.mark.parametrize("alpha", [10.0, 50.0])
    def test_matches_closed_form(self, alpha):
        p = sl.ModelParams(alpha=alpha, T=6.0, **IMPACT)
        g = sl.build_grid(6.0, 2001)
        sol = sl.solve_riccati(p, sl.PenaltySpec.zero(), g)
        closed = sl.riccati_closed_form_phi0(p, g)
        assert np.max(np.abs(sol.r1 - closed)) < 1e-8

    def test_closed_form_values(self):
        g = sl.build_grid(6.0, 7)
        p10 = sl.ModelParams(alpha=10.0, T=6.0, **IMPACT)
        r = sl.riccati_closed_form_phi0(p10, g)
        assert r[0] == pytest.approx(-18.0 / 110.0)
        assert r[-1] == pytest.approx(-9.0)
        p50 = sl.ModelParams(alpha=50.0, T=6.0, **IMPACT)
        assert sl.riccati_closed_form_phi0(p50, g)[0] == pytest.approx(-98.0 / 590.0)

    def test_closed_form_degenerate_case(self):
        p = sl.ModelParams(alpha=1.0, T=6.0, **IMPACT)
        g = sl.build_grid(6.0, 11)
        assert np.all(sl.riccati_closed_form_phi0(p, g) == 0.0)

    def test_gain_stays_nonpositive(self):
        p = sl.ModelParams(alpha=10.0, T=6.0, **IMPACT)
        g = sl.build_grid(6.0, 501)
        sol = sl.solve_riccati(p, sl.PenaltySpec.zero(), g)
        assert np.all(sol.r1 <= 0.0)


class TestConstantPenalty:
    @pytest.mark.parametrize("alpha,level", [(10.0, 1.0), (0.6, 4.0), (50.0, 1.0)])
    def test_matches_hyperbolic_closed_form(self, alpha, level):
        p = sl.ModelParams(
            lambda0=1.0, lambda1=1.0, kappa0=2.0, kappa1=1.2 if alpha == 0.6 else 2.0,
            alpha=alpha, q0=10.0, T=6.0,
        )
        g = sl.build_grid(6.0, 2001)
        sol = sl.solve_riccati(p, sl.PenaltySpec.constant(level), g)
        exact = constant_penalty_gain(p, level, g.nodes)
        assert np.max(np.abs(sol.r1 - exact)) < 1e-8


class TestSolution:
    def test_exponential_pair_is_reciprocal(self, multiday):
        ric = multiday.tables.riccati
        assert np.max(np.abs(ric.xi_plus * ric.xi_minus - 1.0)) < 1e-10
        assert ric.xi_plus[0] == 1.0 and ric.xi_minus[0] == 1.0

    def test_cumulative_square_integral_monotone(self, multiday):
        ric = multiday.tables.riccati
        assert ric.cum_xi_minus_sq[0] == 0.0
        assert np.all(np.diff(ric.cum_xi_minus_sq) >= 0.0)

    def test_terminal_value_exact(self, singleday):
        ric = singleday.tables.riccati
        assert ric.r1[-1] == singleday.params.terminal_gain

    def test_backward_residual_second_order(self):
        p = sl.ModelParams(alpha=10.0, T=6.0, **IMPACT)
        phi = sl.PenaltySpec.constant(1.0)

        def residual(n):
            g = sl.build_grid(6.0, n)
            sol = sl.solve_riccati(p, phi, g)
            phis = sl.phi_eval(phi, g.nodes, 6.0)
            dr = (sol.r1[2:] - sol.r1[:-2]) / (2.0 * g.dt)
            rhs = phis[1:-1] / p.lambda1 - sol.r1[1:-1] ** 2
            return np.max(np.abs(dr - rhs))

        r1, r2 = residual(1001), residual(2001)
        assert r1 / r2 == pytest.approx(4.0, rel=0.3)

    def test_blowup_guard(self):
        p = sl.ModelParams(alpha=10.0, T=6.0, **IMPACT)
        g = sl.build_grid(6.0, 101)
        with pytest.raises(NumericalError):
            sl.solve_riccati(p, sl.PenaltySpec.constant(1.0e20), g)

    def test_horizon_mismatch_rejected(self):
        p = sl.ModelParams(alpha=10.0, T=6.0, **IMPACT)
        with pytest.raises(ValueError):
            sl.solve_riccati(p, sl.PenaltySpec.zero(), sl.build_grid(5.0, 101))
