"""Seeded synthetic instance generation, including engineered conflict
families.

Conflict families are defined by measurable certificates, not closed-form
constructions: the generator rejection-samples plain Gaussian draws until
the certificate holds, so every emitted instance carries its property by
test rather than by trust.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .attribution import compute_gradient_set
from .model import (
    Perturbations,
    ProblemInstance,
    WMode,
    compute_logits,
    grad_logits_conf,
    grad_logits_heat,
    softmax,
    zero_perturbations,
)

__all__ = [
    "Family",
    "GeneratorSpec",
    "generate",
    "conflict_certificate",
    "roleswap_certificate",
    "ROLESWAP_RATIO_MAX",
]

# Accept thresholds for the conflict families.
ROLESWAP_RATIO_MAX = 0.05
_MAX_DRAWS = 50_000


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    CONFLICTING = "conflicting"
    ROLE_SWAP = "role-swap"


@dataclass(frozen=True)
class GeneratorSpec:
    V: int
    d: int
    T: int
    seed: int = 0
    family: Family = Family.GAUSSIAN
    w_mode: WMode = WMode.FULL_MATRIX
    v_star: int | None = None  # None -> target token of the last position

    def __post_init__(self) -> None:
        if self.V < 2:
            raise ValueError("V must be at least 2")
        if self.d < 1 or self.T < 1:
            raise ValueError("d and T must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "w_mode", WMode(self.w_mode))
        if self.v_star is not None and not 0 <= int(self.v_star) < self.V:
            raise ValueError("v_star must lie in [0, V)")


def _logit_gradient_fields(
    instance: ProblemInstance, pert: Perturbations
) -> tuple[np.ndarray, np.ndarray]:
    logits = compute_logits(instance, pert)
    g_heat = np.empty_like(logits)
    g_conf = np.empty_like(logits)
    for t in range(instance.T):
        p = softmax(logits[t])
        g_heat[t] = grad_logits_heat(p, int(instance.y[t]))
        g_conf[t] = grad_logits_conf(p)
    return g_heat, g_conf


def conflict_certificate(instance: ProblemInstance) -> float:
    """Inner product of the two logit-space objective gradients at zero
    perturbations; negative means the objectives pull logits apart."""
    g_heat, g_conf = _logit_gradient_fields(instance, zero_perturbations(instance))
    return float(g_heat.ravel() @ g_conf.ravel())


def roleswap_certificate(instance: ProblemInstance) -> float:
    """||grad_h heat||^2 / ||grad_w heat||^2 at zero perturbations; small
    means the h route to heat is suppressed while the w route is live."""
    gs = compute_gradient_set(instance, zero_perturbations(instance))
    n11 = float(gs.J11.ravel() @ gs.J11.ravel())
    n12 = float(gs.J12.ravel() @ gs.J12.ravel())
    if n12 == 0.0:
        return np.inf
    return n11 / n12


def _draw(rng: np.random.Generator, spec: GeneratorSpec) -> ProblemInstance:
    H = rng.standard_normal((spec.T, spec.d))
    W = rng.standard_normal((spec.V, spec.d))
    y = rng.integers(0, spec.V, size=spec.T)
    return ProblemInstance(
        V=spec.V, d=spec.d, T=spec.T, H=H, W=W, y=y, w_mode=spec.w_mode, v_star=spec.v_star
    )


def _accept(instance: ProblemInstance, family: Family) -> bool:
    if family is Family.GAUSSIAN:
        return True
    if family is Family.CONFLICTING:
        # Sharpening must initially fight correctness: every target sits
        # below the current argmax, and the logit gradients oppose.
        logits = compute_logits(instance, zero_perturbations(instance))
        if any(int(instance.y[t]) == int(np.argmax(logits[t])) for t in range(instance.T)):
            return False
        return conflict_certificate(instance) < 0.0
    return roleswap_certificate(instance) < ROLESWAP_RATIO_MAX


def generate(spec: GeneratorSpec) -> ProblemInstance:
    """Draw an instance of the requested family; deterministic per spec."""
    rng = np.random.default_rng(spec.seed)
    for _ in range(_MAX_DRAWS):
        instance = _draw(rng, spec)
        if _accept(instance, spec.family):
            return instance
    raise RuntimeError(
        f"no {spec.family.value} instance found in {_MAX_DRAWS} draws for {spec}"
    )
