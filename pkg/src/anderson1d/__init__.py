"""Simulation toolkit for the 1D discrete random chain (Anderson model).

Transfer matrices and Prufer phases, eigensolvers with independent
cross-checks, forward-backward spectral sampling, Lyapunov/variance and
density-of-states estimators, and reproducible parallel Monte Carlo.
"""

from .asymptotics import (
    DosCurve,
    LyapunovEstimate,
    MixingEstimate,
    ParamTable,
    build_param_table,
    dos_counting,
    dos_invariant,
    invariant_measure,
    lyapunov,
    lyapunov_grid,
    mixing_estimate,
    rescaled_walk,
    rescaled_walks,
    walk_stats,
    weak_disorder_reference,
)
from .engine import Accumulator, derive_rng, parallel_map_reduce
from .experiments import (
    FigureData,
    TailEnsemble,
    TemperatureResult,
    critical_preset,
    figure_data,
    tails_experiment,
    temperature_profile,
)
from .fbprocess import (
    EmpiricalDensity,
    FbSample,
    Observable,
    backward_sample,
    draw_fb_sample,
    dtheta_identity_check,
    fb_weight,
    forward_sample,
    indicator,
    indicator_psi2,
    indicator_sin2,
    lhs_estimate,
    observable_one,
    phase_density,
    rhs_estimate,
    support_grid,
)
from .prufer import (
    Disorder,
    PotentialSpec,
    PruferPath,
    Transfer2,
    forward_path,
    lift_step,
    phase_step,
    phase_step_inv,
    sample_disorder,
    transfer_matrix,
    wrap_2pi,
    wrap_pi,
)
from .spectrum import (
    EigvecProfile,
    LiftingError,
    Spectrum,
    eigenvalues_dirichlet,
    eigenvalues_periodic,
    eigenvector,
    sturm_count,
    theta_end,
)

__version__ = "0.1.0"
