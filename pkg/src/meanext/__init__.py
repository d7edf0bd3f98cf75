"""Extend two-variable means to n variables by iteration, on positive reals and SPD matrices."""

__version__ = "0.1.0"

from .axioms import AxiomReport, check_n_var_axioms, check_two_var_axioms
from .engine import (
    SCALARS,
    BatchResult,
    ConvergenceConfig,
    CycleMapping,
    ElementDomain,
    ExtensionResult,
    IterationState,
    RateReport,
    compare_rates,
    extend_mean,
    extend_mean_batch,
    make_evaluator,
    neighbor_as_cycle,
    random_cycle_mapping,
    spread,
    step_cycle,
    step_neighbor,
    step_variation,
)
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    EvaluatorError,
    MeanExtError,
    PreconditionError,
)
from .means import (
    ARITHMETIC,
    BUILTIN_MEANS,
    GEOMETRIC,
    HARMONIC,
    LOGARITHMIC,
    TwoVarMean,
    eval_mean,
    parse_mean_spec,
    power_mean,
)
from .oracles import TraceEndpoints, arithmetic_n, arithmetic_trace_endpoints, geometric_n, harmonic_n
from .spd import (
    OperatorMean,
    SandwichConfig,
    SandwichReport,
    SpdMatrix,
    eval_operator_mean,
    loewner_leq,
    sandwich_verify,
    spd_add,
    spd_domain,
    spd_inverse,
    spd_norm,
    spd_scale,
    spd_sqrt,
)
