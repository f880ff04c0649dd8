"""Jacobian blocks and the 6- and 15-component attribution score vectors.

The four blocks are the gradients of the two objectives with respect to
the two parameter groups.  Scores mix squared norms with inner products;
an inner product between an h-shaped and a w-shaped gradient is only
directly defined when the shapes match (SINGLE_ROW / BROADCAST), so a
``pushforward`` alignment is provided that compares the logit-space
changes the two gradients induce under the model's local linearization
(exact here, the model being bilinear).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    Perturbations,
    ProblemInstance,
    WMode,
    compute_logits,
    embed_matrix,
    grad_h,
    grad_logits_conf,
    grad_logits_heat,
    grad_w,
    hidden_matrix,
    softmax,
)

__all__ = [
    "AlignKind",
    "AlignScale",
    "AlignmentMode",
    "GradientSet",
    "default_alignment",
    "compute_gradient_set",
    "logit_field",
    "align",
    "score_j6",
    "score_jplus",
    "J6_LABELS",
    "JPLUS_LABELS",
]

# Canonical slot order of the 6-score vector.  Slots 0..5 line up with the
# soft-strategy weights: alpha_0 scales the h->heat direction, alpha_2 the
# w->heat direction, alpha_3 h->conf, alpha_4 w->conf; 1 and 5 are the two
# cross-objective alignment slots.
J6_LABELS = (
    "h_heat_strength",    # ||J11||^2
    "align_hheat_wconf",  # <J11, J22>
    "w_heat_strength",    # ||J12||^2
    "h_conf_strength",    # ||J21||^2
    "w_conf_strength",    # ||J22||^2
    "align_hconf_wheat",  # <J21, J12>
)

# 1-based action-table order of the 15-score vector (position i holds
# component i+1).
JPLUS_LABELS = (
    "h_heat_strength",     # 1:  ||J11||^2
    "w_heat_strength",     # 2:  ||J12||^2
    "h_conf_strength",     # 3:  ||J21||^2
    "w_conf_strength",     # 4:  ||J22||^2
    "align_hheat_wconf",   # 5:  <J11, J22>
    "align_hconf_wheat",   # 6:  <J21, J12>
    "h_consistency",       # 7:  <J11, J21>
    "w_consistency",       # 8:  <J12, J22>
    "joint_alignment",     # 9:  <J11+J21, J12+J22>
    "hheat_vs_total_w",    # 10: <J11, J12+J22>
    "hconf_vs_total_w",    # 11: <J21, J12+J22>
    "wheat_vs_total_h",    # 12: <J11+J21, J12>
    "wconf_vs_total_h",    # 13: <J11+J21, J22>
    "h_total_strength",    # 14: ||J11+J21||^2
    "w_total_strength",    # 15: ||J12+J22||^2
)


class AlignKind(str, Enum):
    DIRECT = "direct"
    PUSHFORWARD = "pushforward"


class AlignScale(str, Enum):
    RAW = "raw"
    COSINE = "cosine"


@dataclass(frozen=True)
class AlignmentMode:
    """How cross-shape inner products are taken and scaled."""

    kind: AlignKind = AlignKind.DIRECT
    scale: AlignScale = AlignScale.RAW


def default_alignment(w_mode: WMode) -> AlignmentMode:
    """Pushforward for FULL_MATRIX (h and w shapes differ there), direct
    otherwise (w is h-shaped in SINGLE_ROW and BROADCAST modes)."""
    if WMode(w_mode) is WMode.FULL_MATRIX:
        return AlignmentMode(AlignKind.PUSHFORWARD, AlignScale.RAW)
    return AlignmentMode(AlignKind.DIRECT, AlignScale.RAW)


@dataclass(frozen=True, eq=False)
class GradientSet:
    """The four Jacobian blocks at the current point.

    J11 = grad_h heat, J12 = grad_w heat, J21 = grad_h conf,
    J22 = grad_w conf.  J11/J21 share the h shape, J12/J22 the w shape.
    """

    J11: np.ndarray
    J12: np.ndarray
    J21: np.ndarray
    J22: np.ndarray

    def __post_init__(self) -> None:
        if self.J11.shape != self.J21.shape:
            raise ValueError("J11 and J21 must share the h shape")
        if self.J12.shape != self.J22.shape:
            raise ValueError("J12 and J22 must share the w shape")
        for block in (self.J11, self.J12, self.J21, self.J22):
            if not np.isfinite(block).all():
                raise ValueError("gradient blocks must be finite")

    def scaled(self, c: float) -> "GradientSet":
        return GradientSet(self.J11 * c, self.J12 * c, self.J21 * c, self.J22 * c)

    def norms(self) -> tuple[float, float, float, float]:
        """Euclidean norms (n11, n12, n21, n22)."""
        return (
            float(np.linalg.norm(self.J11)),
            float(np.linalg.norm(self.J12)),
            float(np.linalg.norm(self.J21)),
            float(np.linalg.norm(self.J22)),
        )


def compute_gradient_set(instance: ProblemInstance, pert: Perturbations) -> GradientSet:
    """All four blocks at the current (h, w)."""
    logits = compute_logits(instance, pert)
    g_heat = np.empty_like(logits)
    g_conf = np.empty_like(logits)
    for t in range(instance.T):
        p = softmax(logits[t])
        g_heat[t] = grad_logits_heat(p, int(instance.y[t]))
        g_conf[t] = grad_logits_conf(p)
    return GradientSet(
        J11=grad_h(instance, pert, g_heat),
        J12=grad_w(instance, pert, g_heat),
        J21=grad_h(instance, pert, g_conf),
        J22=grad_w(instance, pert, g_conf),
    )


def logit_field(
    g: np.ndarray, group: str, instance: ProblemInstance, pert: Perturbations
) -> np.ndarray:
    """Logit-space change (T x V) induced by moving parameter group
    ``group`` ("h" or "w") along g, holding the other group fixed."""
    T, V = instance.T, instance.V
    if group == "h":
        if g.shape != (instance.d,):
            raise ValueError("h-group gradient must have shape (d,)")
        return np.broadcast_to(embed_matrix(instance, pert) @ g, (T, V)).copy()
    if group != "w":
        raise ValueError("group must be 'h' or 'w'")
    A = hidden_matrix(instance, pert)
    if instance.w_mode is WMode.FULL_MATRIX:
        if g.shape != (V, instance.d):
            raise ValueError("w-group gradient must have shape (V, d)")
        return A @ g.T
    if g.shape != (instance.d,):
        raise ValueError("w-group gradient must have shape (d,)")
    col = A @ g
    if instance.w_mode is WMode.SINGLE_ROW:
        field = np.zeros((T, V))
        field[:, instance.v_star] = col
        return field
    return np.repeat(col[:, None], V, axis=1)


def _scaled_dot(a: np.ndarray, b: np.ndarray, scale: AlignScale) -> float:
    raw = float(a @ b)
    if scale is AlignScale.COSINE:
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
        if na == 0.0 or nb == 0.0:
            return 0.0
        return raw / (na * nb)
    return raw


def align(
    g_a: np.ndarray,
    g_b: np.ndarray,
    mode: AlignmentMode,
    instance: ProblemInstance,
    pert: Perturbations,
    group_a: str = "h",
    group_b: str = "w",
) -> float:
    """Inner product of two parameter-space gradients.

    DIRECT flattens both operands (shapes must match).  PUSHFORWARD maps
    each operand to its induced logit-space field first, then takes the
    product there.  COSINE divides by the operand norms in the space the
    product was taken, returning 0 when either norm is 0.
    """
    if mode.kind is AlignKind.DIRECT:
        a = np.asarray(g_a, dtype=np.float64).ravel()
        b = np.asarray(g_b, dtype=np.float64).ravel()
        if a.shape != b.shape:
            raise ValueError(
                f"direct alignment requires matching shapes, got {g_a.shape} vs {g_b.shape}"
            )
    else:
        a = logit_field(np.asarray(g_a, dtype=np.float64), group_a, instance, pert).ravel()
        b = logit_field(np.asarray(g_b, dtype=np.float64), group_b, instance, pert).ravel()
    return _scaled_dot(a, b, mode.scale)


def _sq_norm(g: np.ndarray) -> float:
    flat = g.ravel()
    return float(flat @ flat)


def score_j6(
    gs: GradientSet,
    mode: AlignmentMode,
    instance: ProblemInstance,
    pert: Perturbations,
) -> np.ndarray:
    """The 6-score vector in canonical slot order (see J6_LABELS).

    The four squared norms are always taken in native parameter space;
    only the two cross-shape alignment slots go through ``align``.
    """
    s = np.empty(6)
    s[0] = _sq_norm(gs.J11)
    s[1] = align(gs.J11, gs.J22, mode, instance, pert)
    s[2] = _sq_norm(gs.J12)
    s[3] = _sq_norm(gs.J21)
    s[4] = _sq_norm(gs.J22)
    s[5] = align(gs.J21, gs.J12, mode, instance, pert)
    return s


def score_jplus(
    gs: GradientSet,
    mode: AlignmentMode,
    instance: ProblemInstance,
    pert: Perturbations,
) -> np.ndarray:
    """The 15-score vector in action-table order (see JPLUS_LABELS).

    Group sums J11+J21 and J12+J22 are formed in native parameter space.
    Cross-shape products (components 5, 6, 9-13) go through ``align``;
    the same-group consistency products (7, 8) are native inner products
    with the same scale applied.
    """
    sum_h = gs.J11 + gs.J21
    sum_w = gs.J12 + gs.J22
    s = np.empty(15)
    s[0] = _sq_norm(gs.J11)
    s[1] = _sq_norm(gs.J12)
    s[2] = _sq_norm(gs.J21)
    s[3] = _sq_norm(gs.J22)
    s[4] = align(gs.J11, gs.J22, mode, instance, pert)
    s[5] = align(gs.J21, gs.J12, mode, instance, pert)
    s[6] = _scaled_dot(gs.J11.ravel(), gs.J21.ravel(), mode.scale)
    s[7] = _scaled_dot(gs.J12.ravel(), gs.J22.ravel(), mode.scale)
    s[8] = align(sum_h, sum_w, mode, instance, pert)
    s[9] = align(gs.J11, sum_w, mode, instance, pert)
    s[10] = align(gs.J21, sum_w, mode, instance, pert)
    s[11] = align(sum_h, gs.J12, mode, instance, pert)
    s[12] = align(sum_h, gs.J22, mode, instance, pert)
    s[13] = _sq_norm(sum_h)
    s[14] = _sq_norm(sum_w)
    return s
