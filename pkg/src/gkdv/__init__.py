"""Conservative Fourier pseudo-spectral solvers for the generalized KdV equation."""

from .diagnostics import (
    ConvergenceRow,
    ReferenceMismatch,
    attach_breather_columns,
    convergence_study,
    drift_series,
    linf_error,
    make_reference,
    max_drifts,
)
from .integrators import (
    SCHEMES,
    FixedPointError,
    RunLog,
    SingularStepError,
    StageStats,
    StepperConfig,
    cn_dispersion_step,
    etdrk4_coefficients,
    etdrk4_coefficients_direct,
    evolve,
    make_stepper,
    step_irk_direct,
    step_mcn,
    step_metdrk4,
    step_sav_irk,
    step_sav_lf,
    step_strang,
)
from .sav import (
    AdjustmentRequired,
    C0Policy,
    InvariantRecord,
    SavState,
    adjust_c0,
    init_sav,
    invariants,
    mass_drift_bound,
    rhs_f,
    rhs_g,
)
from .scenarios import (
    SCENARIO_NAMES,
    BreatherParams,
    Scenario,
    TwoSolitonParams,
    breather,
    breather_diagnostics,
    get_scenario,
    q_soliton_constants,
    scatter_ic,
    two_soliton,
)
from .spectral import (
    SingularModeError,
    SpectralGrid,
    apply_d1,
    apply_d2,
    apply_d3,
    inner_h,
    make_grid,
    norm_h,
    solve_block,
    solve_block2,
)
from .tableaus import ButcherTableau, gauss_legendre_tableau, symplectic_residual

__version__ = "0.1.0"
