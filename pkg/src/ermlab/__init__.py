"""Numerical laboratory for localized complexity bounds of empirical risk minimization
over finite probability spaces."""

__version__ = "0.1.0"

from .classes import (
    BernsteinCert,
    ClassOracle,
    DiscreteMeasure,
    FuncVec,
    FunctionClass,
    JointDistribution,
    LossSpec,
    StarHull,
    SubClass,
    bernstein_certificate,
    empirical_slab,
    excess_loss_class,
    expectation,
    level_set,
    make_measure,
    moment2,
    star_hull,
    sublevel_class,
)
from .complexity import (
    BracketPair,
    ComplexityCurve,
    EmpiricalCurve,
    FixedPointResult,
    empirical_xi_curve,
    epsilon_brackets,
    epsilon_threshold,
    exact_xi_curve,
    fixed_point,
    xi_curve,
)
from .empirical import (
    MinimizerResult,
    RademacherDraw,
    Sample,
    draw_sample,
    empirical_mean,
    minimize_empirical,
    rademacher_average,
    sup_deviation,
)
from .rng import Stream, make_stream
from .scenarios import GapClassSpec, build_gap_class, classification_scenario, gap_experiment
from .selection import NestedProblem, SelectionResult, hypotheses_check, make_nested, oracle_check, select
from .theorems import (
    BoundReport,
    RatioCheckReport,
    concentration_profile,
    ratio_check,
    theorem12_bound,
    validate_theorem12,
    validate_theorem31,
)
