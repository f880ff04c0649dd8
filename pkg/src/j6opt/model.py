"""Bilinear logit model, its two objectives, and their analytic gradients.

The model scores V vocabulary tokens at T positions as

    logits = (H + h) (W + w)^T

where H (T x d hidden states) and W (V x d embeddings) are frozen and
(h, w) are small additive perturbations.  Two losses are defined on the
logits: ``heat`` (mean cross-entropy against the target tokens, to be
driven down for fidelity) and ``confidence`` (mean negative entropy of
the softmax, to be driven down for certainty).  A central-difference
oracle provides an independent check of every analytic gradient.

All numerics are float64.  Every public function is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "WMode",
    "ObjectiveKind",
    "ProblemInstance",
    "Perturbations",
    "ObjectivePair",
    "set_validation",
    "w_shape",
    "zero_perturbations",
    "hidden_matrix",
    "embed_matrix",
    "compute_logits",
    "softmax",
    "heat_loss",
    "confidence_loss",
    "objectives",
    "grad_logits_heat",
    "grad_logits_conf",
    "grad_h",
    "grad_w",
    "fd_gradient",
]

# Tolerances for the self-check (test) mode.
ZERO_SUM_TOL = 1e-10
BOUNDS_TOL = 1e-12

_validation = False


def set_validation(enabled: bool) -> None:
    """Enable per-forward-pass invariant checks (zero-sum gradients,
    entropy and loss bounds).  Intended for test runs; off by default."""
    global _validation
    _validation = bool(enabled)


class WMode(str, Enum):
    """Shape semantics of the embedding perturbation w."""

    FULL_MATRIX = "full_matrix"  # w is V x d, added row-wise to W
    SINGLE_ROW = "single_row"    # w is length d, added to row v_star only
    BROADCAST = "broadcast"      # w is length d, added to every row (gradient-dead)


class ObjectiveKind(str, Enum):
    HEAT = "heat"
    CONF = "conf"


def w_shape(V: int, d: int, w_mode: WMode) -> tuple[int, ...]:
    """Shape of the w perturbation for a given mode."""
    return (V, d) if w_mode is WMode.FULL_MATRIX else (d,)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Frozen base representations plus targets and w-mode.

    v_star selects the embedding row perturbed in SINGLE_ROW mode.  When
    left unspecified it defaults to the target token of the last
    position (and to 0 outside SINGLE_ROW mode, where it is unused).
    """

    V: int
    d: int
    T: int
    H: np.ndarray
    W: np.ndarray
    y: np.ndarray
    w_mode: WMode = WMode.FULL_MATRIX
    v_star: int | None = None

    def __post_init__(self) -> None:
        for name in ("V", "d", "T"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        object.__setattr__(self, "V", int(self.V))
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "T", int(self.T))
        H = np.asarray(self.H, dtype=np.float64)
        W = np.asarray(self.W, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if H.shape != (self.T, self.d):
            raise ValueError(f"H must have shape {(self.T, self.d)}, got {H.shape}")
        if W.shape != (self.V, self.d):
            raise ValueError(f"W must have shape {(self.V, self.d)}, got {W.shape}")
        if y.shape != (self.T,):
            raise ValueError(f"y must have shape {(self.T,)}, got {y.shape}")
        if not (np.isfinite(H).all() and np.isfinite(W).all()):
            raise ValueError("H and W must be finite")
        if y.min(initial=0) < 0 or y.max(initial=0) >= self.V:
            raise ValueError("y entries must lie in [0, V)")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w_mode", WMode(self.w_mode))
        v_star = self.v_star
        if v_star is None:
            v_star = int(y[-1]) if self.w_mode is WMode.SINGLE_ROW else 0
        v_star = int(v_star)
        if not 0 <= v_star < self.V:
            raise ValueError("v_star must lie in [0, V)")
        object.__setattr__(self, "v_star", v_star)


@dataclass(eq=False)
class Perturbations:
    """The tunable pair: h is added to every row of H, w to W per w_mode."""

    h: np.ndarray
    w: np.ndarray

    def __post_init__(self) -> None:
        self.h = np.asarray(self.h, dtype=np.float64)
        self.w = np.asarray(self.w, dtype=np.float64)
        if not (np.isfinite(self.h).all() and np.isfinite(self.w).all()):
            raise ValueError("perturbations must be finite")

    def copy(self) -> "Perturbations":
        return Perturbations(self.h.copy(), self.w.copy())


@dataclass(frozen=True)
class ObjectivePair:
    """Current values of the two losses, in nats."""

    ob1: float  # heat: mean cross-entropy, >= 0
    ob2: float  # confidence: mean negative entropy, in [-log V, 0]


def zero_perturbations(instance: ProblemInstance) -> Perturbations:
    return Perturbations(
        np.zeros(instance.d), np.zeros(w_shape(instance.V, instance.d, instance.w_mode))
    )


def _check_shapes(instance: ProblemInstance, pert: Perturbations) -> None:
    if pert.h.shape != (instance.d,):
        raise ValueError(f"h must have shape {(instance.d,)}, got {pert.h.shape}")
    expected = w_shape(instance.V, instance.d, instance.w_mode)
    if pert.w.shape != expected:
        raise ValueError(
            f"w must have shape {expected} in {instance.w_mode.value} mode, got {pert.w.shape}"
        )


def hidden_matrix(instance: ProblemInstance, pert: Perturbations) -> np.ndarray:
    """H + h, shape (T, d)."""
    _check_shapes(instance, pert)
    return instance.H + pert.h


def embed_matrix(instance: ProblemInstance, pert: Perturbations) -> np.ndarray:
    """W with w folded in per w_mode, shape (V, d)."""
    _check_shapes(instance, pert)
    B = instance.W.copy()
    if instance.w_mode is WMode.FULL_MATRIX:
        B += pert.w
    elif instance.w_mode is WMode.SINGLE_ROW:
        B[instance.v_star] += pert.w
    else:  # broadcast
        B += pert.w[None, :]
    return B


def compute_logits(instance: ProblemInstance, pert: Perturbations) -> np.ndarray:
    """logits[t, v] = (H[t] + h) . (W[v] + w_row(v)), shape (T, V)."""
    return hidden_matrix(instance, pert) @ embed_matrix(instance, pert).T


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax of a single logit vector."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("softmax takes a single logit vector; got a matrix")
    if not np.isfinite(z).all():
        raise ValueError("softmax input must be finite")
    e = np.exp(z - z.max())
    p = e / e.sum()
    if _validation:
        assert abs(p.sum() - 1.0) < BOUNDS_TOL, "softmax output must sum to 1"
        assert (p >= 0).all(), "softmax output must be non-negative"
    return p


def _row_logp(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax of a (T, V) logit matrix."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError("logits must be a (T, V) matrix")
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def heat_loss(logits: np.ndarray, y: np.ndarray) -> float:
    """Mean over positions of -log softmax(logits[t])[y[t]], in nats."""
    logp = _row_logp(logits)
    y = np.asarray(y, dtype=np.int64)
    loss = float(-logp[np.arange(logp.shape[0]), y].mean())
    if _validation and np.isfinite(loss):
        assert loss >= 0.0, "heat loss must be non-negative"
    return loss


def confidence_loss(logits: np.ndarray) -> float:
    """Mean over positions of sum_v p_v log p_v (negative entropy, nats)."""
    logp = _row_logp(logits)
    p = np.exp(logp)
    # p underflows to 0 only with logp finite, so p * logp is exactly 0 there.
    loss = float((p * logp).sum(axis=1).mean())
    if _validation and np.isfinite(loss):
        V = logits.shape[1]
        assert -math.log(V) - BOUNDS_TOL <= loss <= 0.0, "confidence out of [-log V, 0]"
    return loss


def objectives(instance: ProblemInstance, pert: Perturbations) -> ObjectivePair:
    """Both losses from a single forward pass."""
    logits = compute_logits(instance, pert)
    return ObjectivePair(heat_loss(logits, instance.y), confidence_loss(logits))


def grad_logits_heat(p: np.ndarray, y_t: int) -> np.ndarray:
    """d(cross-entropy)/d(logits) for one position: p - onehot(y_t)."""
    g = np.asarray(p, dtype=np.float64).copy()
    g[y_t] -= 1.0
    if _validation:
        assert abs(g.sum()) < ZERO_SUM_TOL, "heat logit gradient must sum to 0"
    return g


def grad_logits_conf(p: np.ndarray) -> np.ndarray:
    """d(negative entropy)/d(logits) for one position: p_k (log p_k + E)."""
    p = np.asarray(p, dtype=np.float64)
    logp = np.log(np.where(p > 0, p, 1.0))
    entropy = float(-(p * logp).sum())
    g = p * (logp + entropy)
    if _validation:
        assert abs(g.sum()) < ZERO_SUM_TOL, "confidence logit gradient must sum to 0"
    return g


def grad_h(instance: ProblemInstance, pert: Perturbations, g_logits: np.ndarray) -> np.ndarray:
    """Pull a logit-space gradient back to h: (1/T) sum_tv g[t,v] (W[v]+w_row(v))."""
    g = np.asarray(g_logits, dtype=np.float64)
    if g.shape != (instance.T, instance.V):
        raise ValueError(f"g_logits must have shape {(instance.T, instance.V)}, got {g.shape}")
    return (g @ embed_matrix(instance, pert)).sum(axis=0) / instance.T


def grad_w(instance: ProblemInstance, pert: Perturbations, g_logits: np.ndarray) -> np.ndarray:
    """Pull a logit-space gradient back to w, shaped per w_mode.

    In BROADCAST mode this is (1/T) sum_t (sum_v g[t,v]) (H[t]+h), which
    vanishes for both objectives because their logit gradients are
    zero-sum per position.
    """
    g = np.asarray(g_logits, dtype=np.float64)
    if g.shape != (instance.T, instance.V):
        raise ValueError(f"g_logits must have shape {(instance.T, instance.V)}, got {g.shape}")
    A = hidden_matrix(instance, pert)
    if instance.w_mode is WMode.FULL_MATRIX:
        return (g.T @ A) / instance.T
    if instance.w_mode is WMode.SINGLE_ROW:
        return (g[:, instance.v_star] @ A) / instance.T
    return (g.sum(axis=1) @ A) / instance.T


def _loss_value(objective: ObjectiveKind, instance: ProblemInstance, pert: Perturbations) -> float:
    logits = compute_logits(instance, pert)
    if ObjectiveKind(objective) is ObjectiveKind.HEAT:
        return heat_loss(logits, instance.y)
    return confidence_loss(logits)


def fd_gradient(
    objective: ObjectiveKind,
    which: str,
    instance: ProblemInstance,
    pert: Perturbations,
    eps: float = 1e-5,
) -> np.ndarray:
    """Central finite differences of a loss w.r.t. h or w.

    Independent oracle for grad_h/grad_w: touches only the forward pass,
    never the analytic gradient code.

    Args:
        objective: which loss to differentiate.
        which: "h" or "w".
        eps: step size; error is O(eps^2) at smooth points.
    """
    if which not in ("h", "w"):
        raise ValueError("which must be 'h' or 'w'")
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = pert.copy()
    target = base.h if which == "h" else base.w
    grad = np.zeros_like(target)
    for idx in np.ndindex(target.shape):
        orig = target[idx]
        target[idx] = orig + eps
        f_plus = _loss_value(objective, instance, base)
        target[idx] = orig - eps
        f_minus = _loss_value(objective, instance, base)
        target[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * eps)
    return grad
