"""Filtered link-prediction ranking and metric aggregation.

Each evaluation triple is queried three ways (replace head, tail,
relation). Candidates that form a different known-true triple are
dropped before ranking; score ties share an averaged rank, so ranks are
half-integers. The entity task pools head and tail queries, and the
overall task pools all three streams, which equals the
(2 * entity + relation) / 3 weighting of per-task MRRs exactly.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import GeokgeError
from .kgdata import FilterIndex, Triple, Vocabulary
from .model import EmbeddingSpace

SLOTS = ("head", "relation", "tail")


class EvalError(GeokgeError):
    pass


class Metrics(NamedTuple):
    mrr: float
    h1: float
    h3: float
    h5: float
    h10: float


class EvalReport(NamedTuple):
    entity: Metrics
    relation: Metrics
    overall: Metrics
    n_triples: int


def _query_parts(es: EmbeddingSpace, triple: Triple, slot: str):
    """Candidate index arrays for one slot plus the true candidate id and
    the ids to filter out (known-true answers other than the target)."""
    if slot == "head":
        n = es.n_entities
        cand = np.arange(n, dtype=np.int64)
        h, r, t = cand, np.full(n, triple.r, np.int64), np.full(n, triple.t, np.int64)
        true_id = triple.h
    elif slot == "tail":
        n = es.n_entities
        cand = np.arange(n, dtype=np.int64)
        h, r, t = np.full(n, triple.h, np.int64), np.full(n, triple.r, np.int64), cand
        true_id = triple.t
    elif slot == "relation":
        n = es.n_relations
        cand = np.arange(n, dtype=np.int64)
        h, r, t = np.full(n, triple.h, np.int64), cand, np.full(n, triple.t, np.int64)
        true_id = triple.r
    else:
        raise EvalError(f"unknown query slot {slot!r}")
    return h, r, t, true_id


def _known_ids(flt: FilterIndex, triple: Triple, slot: str) -> Iterable[int]:
    if slot == "head":
        return flt.heads(triple.r, triple.t)
    if slot == "tail":
        return flt.tails(triple.h, triple.r)
    return flt.relations(triple.h, triple.t)


def query_distances(es: EmbeddingSpace, triple: Triple, slot: str) -> np.ndarray:
    h, r, t, _ = _query_parts(es, triple, slot)
    return kernels.triplet_scores(
        es.ent_phase, es.ent_mod, es.rel_phase, es.rel_mod_raw, h, r, t, es.lam_triplet
    )


def rank_query(es: EmbeddingSpace, triple: Triple, slot: str, flt: FilterIndex) -> float:
    d = query_distances(es, triple, slot)
    _, _, _, true_id = _query_parts(es, triple, slot)
    kept = np.ones(len(d), dtype=bool)
    for known in _known_ids(flt, triple, slot):
        kept[known] = False
    kept[true_id] = True
    dt = d[true_id]
    smaller = int(np.count_nonzero(kept & (d < dt)))
    ties = int(np.count_nonzero(kept & (d == dt))) - 1
    return 1.0 + smaller + ties / 2.0


def predict_topk(
    es: EmbeddingSpace,
    triple: Triple,
    slot: str,
    flt: FilterIndex,
    vocab: Vocabulary,
    k: int = 10,
    target: int | None = None,
) -> list[tuple[int, str, float]]:
    """Top-k candidates as (ordinal rank, name, distance), ties broken by id.

    Known-true candidates are filtered out; pass ``target`` to keep one
    specific answer in the ranking (the evaluation convention). Open-slot
    prediction leaves it None, since the point is to surface new links.
    """
    d = query_distances(es, triple, slot)
    kept = np.ones(len(d), dtype=bool)
    for known in _known_ids(flt, triple, slot):
        kept[known] = False
    if target is not None:
        kept[target] = True
    ids = np.flatnonzero(kept)
    order = np.lexsort((ids, d[ids]))
    out = []
    for pos, oi in enumerate(order[:k], start=1):
        cid = int(ids[oi])
        out.append((pos, vocab.name(cid), float(d[cid])))
    return out


def metrics_from_ranks(ranks: Sequence[float]) -> Metrics:
    if len(ranks) == 0:
        raise EvalError("cannot aggregate metrics over zero queries")
    a = np.asarray(ranks, dtype=np.float64)
    return Metrics(
        mrr=float(np.mean(1.0 / a)),
        h1=float(np.mean(a <= 1)),
        h3=float(np.mean(a <= 3)),
        h5=float(np.mean(a <= 5)),
        h10=float(np.mean(a <= 10)),
    )


def pool_overall(entity: Metrics, relation: Metrics) -> Metrics:
    return Metrics(*((2.0 * e + r) / 3.0 for e, r in zip(entity, relation)))


def evaluate_split(
    es: EmbeddingSpace,
    triples: Sequence[Triple],
    flt: FilterIndex,
) -> EvalReport:
    if not triples:
        raise EvalError("cannot evaluate an empty triple sequence")
    entity_ranks: list[float] = []
    relation_ranks: list[float] = []
    for tr in triples:
        entity_ranks.append(rank_query(es, tr, "head", flt))
        entity_ranks.append(rank_query(es, tr, "tail", flt))
        relation_ranks.append(rank_query(es, tr, "relation", flt))
    entity = metrics_from_ranks(entity_ranks)
    relation = metrics_from_ranks(relation_ranks)
    overall = metrics_from_ranks(entity_ranks + relation_ranks)
    return EvalReport(entity=entity, relation=relation, overall=overall,
                      n_triples=len(triples))


def format_metrics_tsv(report: EvalReport, full_precision: bool = False) -> str:
    fmt = (lambda v: repr(v)) if full_precision else (lambda v: f"{v:.3f}")
    lines = ["task\tMRR\tH@1\tH@3\tH@5\tH@10"]
    for task, m in (("entity", report.entity), ("relation", report.relation),
                    ("overall", report.overall)):
        lines.append("\t".join([task] + [fmt(v) for v in m]))
    return "\n".join(lines) + "\n"


def format_predictions_tsv(rows: Sequence[tuple[int, str, float]]) -> str:
    lines = ["rank\tname\tdistance"]
    for rank, name, dist in rows:
        lines.append(f"{rank}\t{name}\t{repr(dist)}")
    return "\n".join(lines) + "\n"
