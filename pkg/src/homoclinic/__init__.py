"""Positive homoclinic solutions of discrete p_k-Laplacian equations on Z."""

from .audit import (
    check_F1,
    check_F2,
    check_sign_intervals,
    estimate_F4,
    modified_height_bound,
    run_audits,
    spike_condition_scan,
)
from .energy import (
    energy_J,
    grad_J,
    make_certificate,
    phi,
    psi,
    ricceri_bound,
    ricceri_sequence,
    spike_energy,
    truncate,
)
from .lattice import (
    ExponentSeq,
    LatticeVector,
    Problem,
    WeightSeq,
    alpha,
    forward_diff,
    luxemburg_norm,
    modular,
    rule_from_string,
    sup_norm,
)
from .logdomain import IndeterminateSign, LogReal
from .nonlinearity import (
    CustomFamily,
    PiecewiseLinear,
    SignIntervalFamily,
    ZeroFamily,
    eval_F,
    eval_f,
    make_decay_family,
    make_growth_family,
    make_modified_height_family,
    make_single_site_family,
)
from .solver import (
    SolverConfig,
    adapt_window,
    minimize_box,
    solution_ladder,
    verify_solution,
)

__version__ = "0.1.0"
