"""Leader-follower optimal execution with a price-predicting signal.

A slow institutional liquidator (deterministic, fuel-constrained rate)
plays first; a high-frequency trader with periodic inventory penalties
best-responds path by path.  The package solves both problems — a backward
Riccati ODE plus a second-kind Fredholm equation handled by degenerate
kernels or, on the zero-penalty slice, an explicit eigen-resolvent — and
simulates the resulting market at desk scale.
"""

__version__ = "1.0.0"

from .errors import ConfigError, NumericalError
from .model import (
    ModelParams,
    PenaltySpec,
    SignalParams,
    TimeGrid,
    build_grid,
    cosine_basis,
    cum_integral,
    inner_product,
    phi_eval,
    quad_integral,
)
from .riccati import RiccatiSolution, riccati_closed_form_phi0, solve_riccati
from .operators import (
    DegenerateOperator,
    KernelTables,
    SpectrumPhi0,
    apply_G,
    apply_K1_star,
    apply_Rn,
    apply_S,
    apply_resolvent,
    build_degenerate,
    resolvent_kernel_truncated,
    spectrum_phi0,
)
from .equilibrium import (
    MajorStrategy,
    MinorPathState,
    MinorResponse,
    benchmark_strategy,
    compute_eta_n,
    expected_minor_r0,
    expected_minor_rate,
    minor_r0_path,
    minor_strategy_path,
    mu_bar,
    solve_major,
    solve_major_spectral,
)
from .simulate import (
    SimulationConfig,
    SimulationResult,
    VolumeCurve,
    savings_bps,
    simulate_market,
    simulate_ou_path,
    volume_curve,
)
from .oracles import (
    ObjectiveReport,
    fbsde_residual,
    gateaux_derivative,
    h0_discrete,
    h1_discrete_pathwise,
    operator_ode_residual,
    run_battery,
)
from .config import RunConfig, load_config

__all__ = [name for name in dir() if not name.startswith("_")]
