"""Numerical laboratory for doubly nonlinear parabolic equations

    d/dt beta(u) + (-Delta_p) u + mu (-Delta)^s_q u = Div f(u) + g

on an interval with zero exterior data.
"""
from .diagnostics import (DiagnosticsReport, certify_eps_approximation, check_comparison,
                          check_contraction, check_energy_dissipation, detect_blowup,
                          detect_extinction, sample_accretivity, stationary_residual)
from .elliptic import (EllipticProblem, SolveReport, SolverSettings, minimize_inner,
                       objective_Jw, solve_resolvent, solve_stationary)
from .grid import Field, Grid, build_grid, lp_norm, w1p_seminorm, wsq_seminorm
from .nonlinearities import (BetaSpec, FluxSpec, SourceSpec, f_monotone_split, f_truncate,
                             g_truncate, validate_regime)
from .operators import (ModelParams, apply_A_mu, apply_divergence_flux, apply_frac_q_laplacian,
                        apply_p_laplacian, build_nonlocal_kernel, duality_pairing, energy_E,
                        energy_I, energy_J)
from .stepper import SchemeConfig, Trajectory, interpolants, run_trajectory, step

__version__ = "0.1.0"
