"""Dressing engine for lattice and q-difference integrable hierarchies.

Solutions are built by acting with a rational group element ``g`` on a seed
kernel chi0(lam, mu) through a ratio of determinants, and checked against the
bilinear identity and the nonlinear equations it generates.
"""
from .dressing import (DressedKernel, TauValue, as_seed, dress, dress_regularized,
                       elementary_factor, tau, tau_form_check)
from .errors import (CircleHitsSingularity, ContourTooTight, DegenerateDenominator,
                     DiagonalProximity, DressingError, EvaluationAtDivisor, GridBounds,
                     NonConvergent, NotSimpleRoot, NumericError, OrderOverflow, PoleProximity,
                     RankDeficientFit, TruncationOverflow, UnknownField, ValidationError)
from .hierarchy import (FlowSpec, Grid, Solution, apply_D, diff_lattice, diff_q,
                        forward_difference, group_element, q_exp_truncated, shift, wave_function)
from .kernel import (FiniteRankKernel, PerturbationTerm, SeedKernel, cauchy_partial,
                     offset_vacuum, rank_perturbed, vacuum)
from .rational import (RationalDivisorFunction, SheetedPoint, evaluate, inverse,
                       log_derivative_at_simple_root, multiply, power)
from .report import ResidualReport
from .verify import (ContourSpec, analytic_property_check, double_integral_check,
                     hirota_residual, kp_linear_residual, membership_residual, n2_residual,
                     nwave_q_residual)

__version__ = "0.1.0"
