"""Self-adversarial margin loss and a from-scratch lazy sparse Adam.

The loss over one positive distance d⁺ and negatives d⁻ⱼ:

    L = −log σ(γ − d⁺) − Σⱼ pⱼ · log σ(d⁻ⱼ − γ)
    pⱼ = softmax(−temperature · d⁻ⱼ)

with pⱼ treated as constants in the backward pass, so

    ∂L/∂d⁺  = σ(d⁺ − γ)        ∂L/∂d⁻ⱼ = −pⱼ · σ(γ − d⁻ⱼ)

Adam updates only the rows touched by a batch; one global step counter
drives bias correction for all tables and the two λ scalars, and λ is
clamped to ≥ 0 after every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GeokgeError
from .features import KINDS
from .model import EmbeddingSpace

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8


class OptimError(GeokgeError):
    """Non-finite gradients or malformed sparse-gradient input."""


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def log_sigmoid(x):
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def nsa_loss(d_pos, d_neg, gamma: float, temperature: float):
    """Loss and its distance-gradients for a batch.

    d_pos: (B,), d_neg: (B, N) with N >= 1. Returns (loss (B,),
    dL/dd_pos (B,), dL/dd_neg (B, N)).
    """
    d_pos = np.atleast_1d(np.asarray(d_pos, dtype=np.float64))
    d_neg = np.asarray(d_neg, dtype=np.float64)
    if d_neg.ndim == 1:
        d_neg = d_neg[None, :] if d_pos.shape == (1,) else d_neg[:, None]
    if d_neg.shape[1] < 1:
        raise OptimError("need at least one negative per positive")
    a = -temperature * d_neg
    a = a - a.max(axis=1, keepdims=True)
    p = np.exp(a)
    p /= p.sum(axis=1, keepdims=True)
    loss = -log_sigmoid(gamma - d_pos) - (p * log_sigmoid(d_neg - gamma)).sum(axis=1)
    d_dpos = sigmoid(d_pos - gamma)
    d_dneg = -p * sigmoid(gamma - d_neg)
    return loss, d_dpos, d_dneg


# sparse gradient container: table name -> (rows, per-row gradients)
TABLE_NAMES = (
    "ent_phase",
    "ent_mod",
    "rel_phase",
    "rel_mod_raw",
    *(f"feat_phase.{k}" for k in KINDS),
    *(f"feat_mod_raw.{k}" for k in KINDS),
)


@dataclass
class SparseGrads:
    tables: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    lam_triplet: float | None = None
    lam_align: float | None = None


def _resolve_table(es: EmbeddingSpace, name: str) -> np.ndarray:
    if "." in name:
        base, kind = name.split(".", 1)
        return getattr(es, base)[kind]
    return getattr(es, name)


@dataclass
class AdamState:
    step: int
    m1: dict[str, np.ndarray]
    m2: dict[str, np.ndarray]
    lam_m: dict[str, list[float]]

    @classmethod
    def for_space(cls, es: EmbeddingSpace) -> "AdamState":
        m1 = {name: np.zeros_like(_resolve_table(es, name)) for name in TABLE_NAMES}
        m2 = {name: np.zeros_like(_resolve_table(es, name)) for name in TABLE_NAMES}
        return cls(step=0, m1=m1, m2=m2,
                   lam_m={"triplet": [0.0, 0.0], "align": [0.0, 0.0]})


def _scalar_adam(state: AdamState, which: str, value: float, grad: float,
                 lr: float, bc1: float, bc2: float) -> float:
    m, v = state.lam_m[which]
    m = BETA1 * m + (1.0 - BETA1) * grad
    v = BETA2 * v + (1.0 - BETA2) * grad * grad
    state.lam_m[which] = [m, v]
    value -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return max(value, 0.0)


def adam_step(es: EmbeddingSpace, grads: SparseGrads, state: AdamState, lr: float) -> None:
    """One bias-corrected update over exactly the rows present in `grads`."""
    for name, (rows, g) in grads.tables.items():
        if not np.isfinite(g).all():
            bad = int(np.count_nonzero(~np.isfinite(g).all(axis=1)))
            raise OptimError(
                f"non-finite gradient for {name}: {bad} of {len(rows)} rows "
                f"at step {state.step + 1}"
            )
    for which, val in (("triplet", grads.lam_triplet), ("align", grads.lam_align)):
        if val is not None and not np.isfinite(val):
            raise OptimError(f"non-finite lambda_{which} gradient at step {state.step + 1}")

    state.step += 1
    bc1 = 1.0 - BETA1 ** state.step
    bc2 = 1.0 - BETA2 ** state.step
    for name, (rows, g) in grads.tables.items():
        kernels.adam_update_rows(
            _resolve_table(es, name), state.m1[name], state.m2[name],
            rows, g, lr, BETA1, BETA2, ADAM_EPS, bc1, bc2,
        )
    if grads.lam_triplet is not None:
        es.lam_triplet = _scalar_adam(state, "triplet", es.lam_triplet,
                                      grads.lam_triplet, lr, bc1, bc2)
    if grads.lam_align is not None:
        es.lam_align = _scalar_adam(state, "align", es.lam_align,
                                    grads.lam_align, lr, bc1, bc2)
