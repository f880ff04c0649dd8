"""Jacobian-routed multi-objective optimization of prompt perturbations
on a standalone bilinear logit model."""

from .attribution import (
    AlignKind,
    AlignmentMode,
    AlignScale,
    GradientSet,
    J6_LABELS,
    JPLUS_LABELS,
    align,
    compute_gradient_set,
    default_alignment,
    logit_field,
    score_j6,
    score_jplus,
)
from .probgen import Family, GeneratorSpec, conflict_certificate, generate, roleswap_certificate
from .model import (
    ObjectiveKind,
    ObjectivePair,
    Perturbations,
    ProblemInstance,
    WMode,
    compute_logits,
    confidence_loss,
    fd_gradient,
    grad_h,
    grad_logits_conf,
    grad_logits_heat,
    grad_w,
    heat_loss,
    objectives,
    set_validation,
    softmax,
    zero_perturbations,
)
from .optimizer import (
    NonFiniteLossError,
    RunConfig,
    RunResult,
    StopReason,
    TraceRecord,
    init_perturbations,
    run,
    stop_check,
)
from .serialize import (
    InstanceFormatError,
    load_instance,
    read_trace,
    save_instance,
    selection_counts,
    write_summary,
    write_trace,
)
from .strategies import (
    PreNorm,
    StrategyConfig,
    StrategyKind,
    UpdateDecision,
    contrast_weights,
    gradsurgery_baseline,
    hard_route_j6,
    hard_route_jplus,
    project_conflicts,
    scalarized_baseline,
    soft_update,
    soft_weights,
    static_baseline,
)

__version__ = "0.1.0"
