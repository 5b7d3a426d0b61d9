"""Embedding tables and the two distance functions with analytic gradients.

Entities and relation terms live in polar form: a phase table (radians,
interpreted modulo 2π but stored unconstrained) and a modulus table.
Relation and feature-category moduli pass through abs() wherever they are
used, so the stored values stay unconstrained while the effective moduli
are nonnegative. Each feature kind (TOPO/DIR/DIS) has its own category
tables shaped like the relation tables.

Distances (smaller = more plausible):
  triplet(h, r, t)  = ||h_m ∘ |r_m| − t_m||₂  + λ_t · Σ|sin((h_p + r_p − t_p)/2)|
  alignment(r, g)   = |||r_m| − |g_m|||₂      + λ_a · Σ|sin((r_p − g_p)/2)|

Gradients are closed form. Non-differentiable points (L2 norm at zero,
sign at zero) use the subgradient-0 convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .features import KINDS


class ScoreBreakdown(NamedTuple):
    modulus_part: float
    phase_part: float
    total: float


@dataclass
class EmbeddingSpace:
    k: int
    ent_phase: np.ndarray
    ent_mod: np.ndarray
    rel_phase: np.ndarray
    rel_mod_raw: np.ndarray
    feat_phase: dict[str, np.ndarray]
    feat_mod_raw: dict[str, np.ndarray]
    lam_triplet: float = 1.0
    lam_align: float = 1.0

    @property
    def n_entities(self) -> int:
        return self.ent_phase.shape[0]

    @property
    def n_relations(self) -> int:
        return self.rel_phase.shape[0]

    def feat_sizes(self) -> dict[str, int]:
        return {kind: self.feat_phase[kind].shape[0] for kind in KINDS}

    def copy(self) -> "EmbeddingSpace":
        return EmbeddingSpace(
            k=self.k,
            ent_phase=self.ent_phase.copy(),
            ent_mod=self.ent_mod.copy(),
            rel_phase=self.rel_phase.copy(),
            rel_mod_raw=self.rel_mod_raw.copy(),
            feat_phase={k: v.copy() for k, v in self.feat_phase.items()},
            feat_mod_raw={k: v.copy() for k, v in self.feat_mod_raw.items()},
            lam_triplet=self.lam_triplet,
            lam_align=self.lam_align,
        )


MOD_INIT_RANGE = 0.05


def init_params(
    n_entities: int,
    n_relations: int,
    feat_sizes: Mapping[str, int],
    k: int,
    seed,
) -> EmbeddingSpace:
    """Seeded initialization: phases ~ U[0, 2π), raw moduli ~ U[−0.05, 0.05],
    both λ scalars at 1. `seed` may be an int or a numpy SeedSequence."""
    if k < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {k}")
    rng = np.random.default_rng(seed)

    def phases(n):
        return rng.uniform(0.0, 2.0 * np.pi, size=(n, k))

    def mods(n):
        return rng.uniform(-MOD_INIT_RANGE, MOD_INIT_RANGE, size=(n, k))

    ent_phase = phases(n_entities)
    ent_mod = mods(n_entities)
    rel_phase = phases(n_relations)
    rel_mod_raw = mods(n_relations)
    feat_phase = {}
    feat_mod_raw = {}
    for kind in KINDS:
        feat_phase[kind] = phases(feat_sizes[kind])
        feat_mod_raw[kind] = mods(feat_sizes[kind])
    return EmbeddingSpace(
        k=k,
        ent_phase=ent_phase,
        ent_mod=ent_mod,
        rel_phase=rel_phase,
        rel_mod_raw=rel_mod_raw,
        feat_phase=feat_phase,
        feat_mod_raw=feat_mod_raw,
    )


def _breakdown(u: np.ndarray, half: np.ndarray, lam: float) -> ScoreBreakdown:
    mod_part = float(np.sqrt((u * u).sum()))
    phase_part = float(np.abs(np.sin(half)).sum())
    return ScoreBreakdown(mod_part, phase_part, mod_part + lam * phase_part)


def triplet_distance(es: EmbeddingSpace, h: int, r: int, t: int) -> ScoreBreakdown:
    u = es.ent_mod[h] * np.abs(es.rel_mod_raw[r]) - es.ent_mod[t]
    half = (es.ent_phase[h] + es.rel_phase[r] - es.ent_phase[t]) * 0.5
    return _breakdown(u, half, es.lam_triplet)


def alignment_distance(es: EmbeddingSpace, r: int, kind: str, g: int) -> ScoreBreakdown:
    u = np.abs(es.rel_mod_raw[r]) - np.abs(es.feat_mod_raw[kind][g])
    half = (es.rel_phase[r] - es.feat_phase[kind][g]) * 0.5
    return _breakdown(u, half, es.lam_align)


class TripletGrad(NamedTuple):
    """d(total)/dθ for one triplet; arrays are per-coordinate rows."""

    h_phase: np.ndarray
    h_mod: np.ndarray
    r_phase: np.ndarray
    r_mod_raw: np.ndarray
    t_phase: np.ndarray
    t_mod: np.ndarray
    lam: float


class AlignmentGrad(NamedTuple):
    r_phase: np.ndarray
    r_mod_raw: np.ndarray
    g_phase: np.ndarray
    g_mod_raw: np.ndarray
    lam: float


def _l2_direction(u: np.ndarray) -> np.ndarray:
    norm = float(np.sqrt((u * u).sum()))
    if norm == 0.0:
        return np.zeros_like(u)
    return u / norm


def _phase_term_grad(half: np.ndarray) -> np.ndarray:
    return 0.5 * np.cos(half) * np.sign(np.sin(half))


def grad_triplet(es: EmbeddingSpace, h: int, r: int, t: int) -> TripletGrad:
    hm = es.ent_mod[h]
    rm_raw = es.rel_mod_raw[r]
    rm = np.abs(rm_raw)
    u = hm * rm - es.ent_mod[t]
    direction = _l2_direction(u)
    half = (es.ent_phase[h] + es.rel_phase[r] - es.ent_phase[t]) * 0.5
    s = es.lam_triplet * _phase_term_grad(half)
    return TripletGrad(
        h_phase=s,
        h_mod=direction * rm,
        r_phase=s.copy(),
        r_mod_raw=direction * hm * np.sign(rm_raw),
        t_phase=-s,
        t_mod=-direction,
        lam=float(np.abs(np.sin(half)).sum()),
    )


def grad_alignment(es: EmbeddingSpace, r: int, kind: str, g: int) -> AlignmentGrad:
    rm_raw = es.rel_mod_raw[r]
    gm_raw = es.feat_mod_raw[kind][g]
    u = np.abs(rm_raw) - np.abs(gm_raw)
    direction = _l2_direction(u)
    half = (es.rel_phase[r] - es.feat_phase[kind][g]) * 0.5
    s = es.lam_align * _phase_term_grad(half)
    return AlignmentGrad(
        r_phase=s,
        r_mod_raw=direction * np.sign(rm_raw),
        g_phase=-s,
        g_mod_raw=-direction * np.sign(gm_raw),
        lam=float(np.abs(np.sin(half)).sum()),
    )
