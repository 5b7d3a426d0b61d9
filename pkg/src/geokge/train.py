"""Joint training of triplet and alignment objectives, plus checkpoints.

Per epoch: shuffle the train triples; for every triplet batch run one
self-adversarial loss step, then (when alignment is active) one equally
sized batch of alignment pairs drawn with replacement proportionally to
their train-split counts. Both steps share one Adam state and one global
step counter. With align_weight 0 or no enabled kinds the alignment pass
is skipped entirely, so runs reduce exactly to the plain baseline: same
RNG streams, same step sequence, feature tables untouched.

Randomness: the seed spawns three independent child streams (init,
triplet, alignment), so toggling alignment never perturbs the triplet
stream.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from . import kernels
from .errors import GeokgeError
from .features import KINDS, AlignmentPair
from .kgdata import FilterIndex, Triple, build_filter_index
from .model import EmbeddingSpace, init_params
from .optim import AdamState, OptimError, SparseGrads, adam_step, nsa_loss

MAX_NEG_RETRIES = 100
CHECKPOINT_MAGIC = b"GEOKGE01"


class ConfigError(GeokgeError):
    pass


class CheckpointError(GeokgeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    k: int = 200
    gamma: float = 0.01
    lr: float = 0.01
    neg_rate: int = 5
    epochs: int = 1000
    batch_size: int = 512
    adversarial_temperature: float = 1.0
    align_weight: float = 1.0
    enabled_kinds: tuple[str, ...] = ()
    seed: int = 0
    # reserved extension point; the distance used here has no mixture bias
    use_mixture_bias: bool = False

    def validate(self) -> "TrainConfig":
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.neg_rate < 1:
            raise ConfigError(f"neg_rate must be >= 1, got {self.neg_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.adversarial_temperature <= 0:
            raise ConfigError(
                f"adversarial_temperature must be > 0, got {self.adversarial_temperature}"
            )
        if self.align_weight < 0:
            raise ConfigError(f"align_weight must be >= 0, got {self.align_weight}")
        bad = [k for k in self.enabled_kinds if k not in KINDS]
        if bad:
            raise ConfigError(f"unknown feature kinds {bad}; valid: {list(KINDS)}")
        if self.use_mixture_bias:
            raise ConfigError("use_mixture_bias is a reserved extension point (must stay false)")
        return self

    def as_meta(self) -> dict[str, str]:
        return {
            f"config.{f.name}": _format_value(getattr(self, f.name))
            for f in fields(self)
        }


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_kinds(text: str) -> tuple[str, ...]:
    names = [p.strip().upper() for p in text.split(",") if p.strip()]
    bad = [n for n in names if n not in KINDS]
    if bad:
        raise ConfigError(f"unknown feature kinds {bad}; valid: {list(KINDS)}")
    return tuple(k for k in KINDS if k in names)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


_CONFIG_CASTS = {
    "k": int,
    "gamma": float,
    "lr": float,
    "neg_rate": int,
    "epochs": int,
    "batch_size": int,
    "adversarial_temperature": float,
    "align_weight": float,
    "enabled_kinds": parse_kinds,
    "seed": int,
    "use_mixture_bias": _parse_bool,
}


def parse_config_file(path) -> dict:
    """Read `key = value` lines; unknown keys are rejected."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            cast = _CONFIG_CASTS.get(key)
            if cast is None:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                out[key] = cast(value)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def config_from(file_values: dict | None = None, **overrides) -> TrainConfig:
    merged = dict(file_values or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(merged) - {f.name for f in fields(TrainConfig)}
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    return TrainConfig(**merged).validate()


def sample_triplet_negatives(
    triple: Triple,
    n: int,
    flt: FilterIndex,
    rng: np.random.Generator,
    n_entities: int,
) -> tuple[list[Triple], int]:
    """Corrupt head or tail (fair coin per negative) with a uniform entity.

    Known-true results are redrawn up to MAX_NEG_RETRIES times; on
    exhaustion the last draw is accepted (never the positive itself) and
    the second return value counts those acceptances.
    """
    negs = []
    exhausted = 0
    for _ in range(n):
        corrupt_head = rng.random() < 0.5
        cand = triple
        for _attempt in range(MAX_NEG_RETRIES):
            e = int(rng.integers(n_entities))
            cand = Triple(e, triple.r, triple.t) if corrupt_head else Triple(triple.h, triple.r, e)
            if cand not in flt:
                break
        else:
            exhausted += 1
            orig = triple.h if corrupt_head else triple.t
            if e == orig:
                e = (e + 1) % n_entities
                cand = (
                    Triple(e, triple.r, triple.t) if corrupt_head
                    else Triple(triple.h, triple.r, e)
                )
        negs.append(cand)
    return negs, exhausted


def sample_alignment_negatives(
    pair: AlignmentPair,
    n: int,
    vocab_size: int,
    rng: np.random.Generator,
) -> list[int]:
    """Uniform different-category replacements of pair.g; empty if the
    kind's vocabulary has a single category."""
    if vocab_size < 2:
        return []
    out = []
    for _ in range(n):
        for _attempt in range(MAX_NEG_RETRIES):
            c = int(rng.integers(vocab_size))
            if c != pair.g:
                break
        else:
            c = (pair.g + 1) % vocab_size
        out.append(c)
    return out


@dataclass
class TrainResult:
    es: EmbeddingSpace
    loss_curve: list[tuple[float, float]]
    counters: dict[str, int]
    rng_digest: str


def _as_i64(seq) -> np.ndarray:
    return np.asarray(seq, dtype=np.int64)


def _triplet_batch_grads(es, state, cfg, flt, batch, rng, counters, grp, grm):
    """Accumulate this batch's triplet gradients; relation grads go into the
    shared scratch arrays so the caller can merge both objectives into one
    optimizer step."""
    B = len(batch)
    K = cfg.neg_rate
    h = _as_i64([tr.h for tr in batch])
    r = _as_i64([tr.r for tr in batch])
    t = _as_i64([tr.t for tr in batch])
    nh = np.empty(B * K, dtype=np.int64)
    nr = np.empty(B * K, dtype=np.int64)
    nt = np.empty(B * K, dtype=np.int64)
    for i, tr in enumerate(batch):
        negs, exhausted = sample_triplet_negatives(tr, K, flt, rng, es.n_entities)
        counters["triplet_negative_retry_exhausted"] += exhausted
        for j, ng in enumerate(negs):
            nh[i * K + j], nr[i * K + j], nt[i * K + j] = ng

    d_pos = kernels.triplet_scores(
        es.ent_phase, es.ent_mod, es.rel_phase, es.rel_mod_raw, h, r, t, es.lam_triplet
    )
    d_neg = kernels.triplet_scores(
        es.ent_phase, es.ent_mod, es.rel_phase, es.rel_mod_raw, nh, nr, nt, es.lam_triplet
    ).reshape(B, K)
    loss, w_pos, w_neg = nsa_loss(d_pos, d_neg, cfg.gamma, cfg.adversarial_temperature)
    if not np.isfinite(loss).all():
        raise OptimError(f"non-finite triplet loss at step {state.step + 1}")

    w = np.concatenate([w_pos, w_neg.ravel()]) / B
    ah = np.concatenate([h, nh])
    ar = np.concatenate([r, nr])
    at = np.concatenate([t, nt])
    gep = np.zeros_like(es.ent_phase)
    gem = np.zeros_like(es.ent_mod)
    dlam = kernels.triplet_grad_accum(
        es.ent_phase, es.ent_mod, es.rel_phase, es.rel_mod_raw,
        ah, ar, at, es.lam_triplet, w, gep, gem, grp, grm,
    )
    ent_rows = np.unique(np.concatenate([ah, at]))
    return float(loss.sum()), ent_rows, gep, gem, ar, dlam


def _align_batch_grads(es, state, cfg, pool, sizes, draw, rng, grp, grm):
    """Accumulate alignment gradients for one weighted draw; feature-table
    grads returned per kind, relation grads added to the shared scratch."""
    K = cfg.neg_rate
    by_kind: dict[str, list[AlignmentPair]] = {}
    for idx in draw:
        p = pool[idx]
        by_kind.setdefault(p.kind, []).append(p)

    tables = {}
    rel_rows_parts = []
    dlam = 0.0
    loss_sum = 0.0
    alpha = cfg.align_weight
    for kind in KINDS:
        pairs = by_kind.get(kind)
        if not pairs:
            continue
        B = len(pairs)
        r = _as_i64([p.r for p in pairs])
        g = _as_i64([p.g for p in pairs])
        ng = np.empty(B * K, dtype=np.int64)
        for i, p in enumerate(pairs):
            negs = sample_alignment_negatives(p, K, sizes[kind], rng)
            for j, c in enumerate(negs):
                ng[i * K + j] = c
        nr = np.repeat(r, K)
        fp = es.feat_phase[kind]
        fm = es.feat_mod_raw[kind]
        d_pos = kernels.align_scores(es.rel_phase, es.rel_mod_raw, fp, fm, r, g, es.lam_align)
        d_neg = kernels.align_scores(
            es.rel_phase, es.rel_mod_raw, fp, fm, nr, ng, es.lam_align
        ).reshape(B, K)
        loss, w_pos, w_neg = nsa_loss(d_pos, d_neg, cfg.gamma, cfg.adversarial_temperature)
        if not np.isfinite(loss).all():
            raise OptimError(f"non-finite alignment loss at step {state.step + 1}")
        loss_sum += float(loss.sum())

        w = np.concatenate([w_pos, w_neg.ravel()]) * (alpha / len(draw))
        ar = np.concatenate([r, nr])
        ag = np.concatenate([g, ng])
        gfp = np.zeros_like(fp)
        gfm = np.zeros_like(fm)
        dlam += kernels.align_grad_accum(
            es.rel_phase, es.rel_mod_raw, fp, fm, ar, ag, es.lam_align, w,
            grp, grm, gfp, gfm,
        )
        feat_rows = np.unique(ag)
        tables[f"feat_phase.{kind}"] = (feat_rows, gfp[feat_rows])
        tables[f"feat_mod_raw.{kind}"] = (feat_rows, gfm[feat_rows])
        rel_rows_parts.append(ar)

    return loss_sum, tables, rel_rows_parts, dlam


def train(
    train_triples: Sequence[Triple],
    n_entities: int,
    n_relations: int,
    feat_sizes: dict[str, int],
    alignment_pairs: Sequence[AlignmentPair],
    config: TrainConfig,
    log=None,
) -> TrainResult:
    """Optimize an EmbeddingSpace; see the module docstring for the loop shape."""
    cfg = config.validate()
    if not train_triples:
        raise ConfigError("cannot train on an empty triple sequence")

    root = np.random.SeedSequence(cfg.seed)
    init_ss, triplet_ss, align_ss = root.spawn(3)
    es = init_params(n_entities, n_relations, feat_sizes, cfg.k, init_ss)
    state = AdamState.for_space(es)
    rng_t = np.random.default_rng(triplet_ss)
    rng_a = np.random.default_rng(align_ss)

    flt = build_filter_index([train_triples])
    counters = {
        "triplet_negative_retry_exhausted": 0,
        "alignment_pairs_dropped_small_vocab": 0,
    }

    pool = [p for p in alignment_pairs if feat_sizes[p.kind] >= 2]
    counters["alignment_pairs_dropped_small_vocab"] = len(alignment_pairs) - len(pool)
    align_on = cfg.align_weight > 0.0 and bool(pool) and bool(cfg.enabled_kinds)
    if align_on:
        weights = np.array([p.weight for p in pool], dtype=np.float64)
        probs = weights / weights.sum()
    sizes = dict(feat_sizes)

    n_train = len(train_triples)
    loss_curve: list[tuple[float, float]] = []
    for epoch in range(cfg.epochs):
        perm = rng_t.permutation(n_train)
        if align_on:
            epoch_draw = rng_a.choice(len(pool), size=n_train, replace=True, p=probs)
        triplet_sum = 0.0
        align_sum = 0.0
        for start in range(0, n_train, cfg.batch_size):
            rows = perm[start : start + cfg.batch_size]
            batch = [train_triples[i] for i in rows]
            grp = np.zeros_like(es.rel_phase)
            grm = np.zeros_like(es.rel_mod_raw)
            t_loss, ent_rows, gep, gem, rel_t, dlam_t = _triplet_batch_grads(
                es, state, cfg, flt, batch, rng_t, counters, grp, grm
            )
            triplet_sum += t_loss
            tables = {
                "ent_phase": (ent_rows, gep[ent_rows]),
                "ent_mod": (ent_rows, gem[ent_rows]),
            }
            rel_parts = [rel_t]
            dlam_a = None
            if align_on:
                draw = epoch_draw[start : start + cfg.batch_size]
                a_loss, feat_tables, rel_a, dlam_a = _align_batch_grads(
                    es, state, cfg, pool, sizes, draw, rng_a, grp, grm
                )
                align_sum += a_loss
                tables.update(feat_tables)
                rel_parts.extend(rel_a)
            rel_rows = np.unique(np.concatenate(rel_parts))
            tables["rel_phase"] = (rel_rows, grp[rel_rows])
            tables["rel_mod_raw"] = (rel_rows, grm[rel_rows])
            adam_step(
                es,
                SparseGrads(tables=tables, lam_triplet=dlam_t, lam_align=dlam_a),
                state,
                cfg.lr,
            )
        mean_triplet = triplet_sum / n_train
        mean_align = cfg.align_weight * align_sum / n_train if align_on else 0.0
        loss_curve.append((mean_triplet, mean_align))
        if log is not None:
            log(f"epoch {epoch + 1}/{cfg.epochs} triplet_loss={mean_triplet:.6f} "
                f"align_loss={mean_align:.6f}")

    digest = hashlib.sha256(
        (str(rng_t.bit_generator.state) + str(rng_a.bit_generator.state)).encode()
    ).hexdigest()
    return TrainResult(es=es, loss_curve=loss_curve, counters=counters, rng_digest=digest)


# --------------------------------------------------------------------------
# checkpoint format: magic, little-endian int32 header
# (k, |E|, |R|, |TOPO|, |DIR|, |DIS|, epoch), float64 tables row-major in
# declared order, then the two lambda scalars. Everything else (config echo,
# vocabulary hashes, RNG digest) lives in the `<path>.meta` text sidecar.


@dataclass
class Checkpoint:
    es: EmbeddingSpace
    epoch: int
    meta: dict[str, str] = field(default_factory=dict)


def _tables_in_order(es: EmbeddingSpace):
    yield es.ent_phase
    yield es.ent_mod
    yield es.rel_phase
    yield es.rel_mod_raw
    for kind in KINDS:
        yield es.feat_phase[kind]
    for kind in KINDS:
        yield es.feat_mod_raw[kind]


def save_checkpoint(path, es: EmbeddingSpace, epoch: int, meta: dict[str, str]) -> None:
    sizes = es.feat_sizes()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack(
            "<7i", es.k, es.n_entities, es.n_relations,
            sizes["TOPO"], sizes["DIR"], sizes["DIS"], epoch,
        ))
        for table in _tables_in_order(es):
            fh.write(np.ascontiguousarray(table, dtype="<f8").tobytes())
        fh.write(struct.pack("<2d", es.lam_triplet, es.lam_align))
    with open(f"{path}.meta", "w", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"{key} = {meta[key]}\n")


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(CHECKPOINT_MAGIC) + 28 or blob[:6] != CHECKPOINT_MAGIC[:6]:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {blob[:8]!r}"
        )
    off = len(CHECKPOINT_MAGIC)
    k, n_e, n_r, n_topo, n_dir, n_dis, epoch = struct.unpack_from("<7i", blob, off)
    off += 28
    if min(k, n_e, n_r, n_topo, n_dir, n_dis) < 1 or epoch < 0:
        raise CheckpointError(f"{path}: implausible header {(k, n_e, n_r)}")
    sizes = {"TOPO": n_topo, "DIR": n_dir, "DIS": n_dis}
    counts = [n_e, n_e, n_r, n_r] + [sizes[kd] for kd in KINDS] * 2
    expected = off + sum(c * k for c in counts) * 8 + 16
    if len(blob) != expected:
        raise CheckpointError(
            f"{path}: truncated or oversized ({len(blob)} bytes, expected {expected})"
        )

    def take(rows):
        nonlocal off
        n = rows * k * 8
        arr = np.frombuffer(blob, dtype="<f8", count=rows * k, offset=off)
        off += n
        return arr.reshape(rows, k).copy()

    ent_phase = take(n_e)
    ent_mod = take(n_e)
    rel_phase = take(n_r)
    rel_mod_raw = take(n_r)
    feat_phase = {kind: take(sizes[kind]) for kind in KINDS}
    feat_mod_raw = {kind: take(sizes[kind]) for kind in KINDS}
    lam_triplet, lam_align = struct.unpack_from("<2d", blob, off)
    es = EmbeddingSpace(
        k=k, ent_phase=ent_phase, ent_mod=ent_mod,
        rel_phase=rel_phase, rel_mod_raw=rel_mod_raw,
        feat_phase=feat_phase, feat_mod_raw=feat_mod_raw,
        lam_triplet=lam_triplet, lam_align=lam_align,
    )
    meta = {}
    try:
        with open(f"{path}.meta", encoding="utf-8") as fh:
            for line in fh:
                if "=" in line:
                    key, _, value = line.partition("=")
                    meta[key.strip()] = value.strip()
    except OSError:
        pass
    return Checkpoint(es=es, epoch=epoch, meta=meta)


def check_space_dims(es: EmbeddingSpace, n_entities: int, n_relations: int) -> None:
    if es.n_entities != n_entities or es.n_relations != n_relations:
        raise CheckpointError(
            f"checkpoint tables are {es.n_entities}x{es.n_relations} "
            f"(entities x relations) but the dataset has {n_entities}x{n_relations}"
        )
