import numpy as np
import pytest

from geokge.evaluate import (
    EvalError,
    EvalReport,
    Metrics,
    evaluate_split,
    format_metrics_tsv,
    format_predictions_tsv,
    metrics_from_ranks,
    pool_overall,
    predict_topk,
    query_distances,
    rank_query,
)
from geokge.kgdata import Triple, Vocabulary, build_filter_index
from geokge.model import init_params, triplet_distance

SIZES = {"TOPO": 2, "DIR": 9, "DIS": 2}


def space(n_ent=9, n_rel=4, k=6, seed=0):
    return init_params(n_ent, n_rel, SIZES, k, seed)


def brute_force_rank(es, triple, slot, flt):
    """Filtered rank straight from the definition: enumerate candidates,
    drop other known-true answers, average over score ties."""
    if slot == "head":
        cands = [(i, Triple(i, triple.r, triple.t)) for i in range(es.n_entities)]
        true_id = triple.h
    elif slot == "tail":
        cands = [(i, Triple(triple.h, triple.r, i)) for i in range(es.n_entities)]
        true_id = triple.t
    else:
        cands = [(i, Triple(triple.h, i, triple.t)) for i in range(es.n_relations)]
        true_id = triple.r
    dt = triplet_distance(es, *cands[true_id][1]).total
    smaller = ties = 0
    for cid, cand in cands:
        if cid != true_id and cand in flt:
            continue
        d = triplet_distance(es, *cand).total
        if d < dt:
            smaller += 1
        elif d == dt and cid != true_id:
            ties += 1
    return 1.0 + smaller + ties / 2.0


def random_kg(rng, n_ent=9, n_rel=4, n=25):
    seen = set()
    while len(seen) < n:
        seen.add(Triple(int(rng.integers(n_ent)), int(rng.integers(n_rel)),
                        int(rng.integers(n_ent))))
    return sorted(seen)


# ---------------------------------------------------------------- ranking


@pytest.mark.parametrize("seed", range(6))
def test_rank_query_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    es = space(seed=seed)
    triples = random_kg(rng)
    flt = build_filter_index([triples])
    for tr in triples[:8]:
        for slot in ("head", "relation", "tail"):
            assert rank_query(es, tr, slot, flt) == brute_force_rank(es, tr, slot, flt)


def test_rank_is_one_when_true_candidate_wins():
    es = space()
    # make the true triple exact: distance 0, everything else far
    es.ent_mod[:] = 1.0
    es.ent_phase[:] = 0.0
    es.rel_phase[:] = 1.0
    es.rel_mod_raw[:] = 2.0
    es.ent_mod[3] = 2.5
    es.rel_mod_raw[1] = 2.0
    es.rel_phase[1] = 0.0
    es.ent_mod[7] = 5.0  # equals 2.5 * |2.0|, uniquely
    tr = Triple(3, 1, 7)
    flt = build_filter_index([[tr]])
    assert rank_query(es, tr, "tail", flt) == 1.0


def test_filtering_removes_known_competitors():
    es = space(seed=2)
    # tail query for (0, 0, ?): make candidates 5 and 6 strictly better
    # than 4 by constructing exact matches, then mark them known-true
    es.ent_phase[:] = 0.0
    es.rel_phase[0] = 0.0
    es.ent_mod[5] = es.ent_mod[0] * np.abs(es.rel_mod_raw[0])
    es.ent_mod[6] = es.ent_mod[0] * np.abs(es.rel_mod_raw[0])
    known = [Triple(0, 0, 5), Triple(0, 0, 6), Triple(0, 0, 4)]
    flt = build_filter_index([known])
    unfiltered = build_filter_index([[Triple(0, 0, 4)]])
    r_f = rank_query(es, Triple(0, 0, 4), "tail", flt)
    r_u = rank_query(es, Triple(0, 0, 4), "tail", unfiltered)
    assert r_u >= r_f + 2.0


def test_tied_scores_share_half_ranks():
    es = space()
    es.ent_phase[:] = 0.0
    es.ent_mod[:] = 1.0
    es.rel_phase[:] = 0.0
    es.rel_mod_raw[:] = 1.0
    # every candidate scores identically: rank = 1 + (n-1)/2
    tr = Triple(0, 0, 1)
    flt = build_filter_index([[tr]])
    assert rank_query(es, tr, "tail", flt) == 1.0 + (es.n_entities - 1) / 2.0


def test_query_distances_match_model():
    es = space(seed=5)
    tr = Triple(2, 1, 3)
    d = query_distances(es, tr, "head")
    for i in (0, 4, 8):
        assert d[i] == pytest.approx(triplet_distance(es, i, 1, 3).total, rel=1e-12)
    with pytest.raises(EvalError, match="slot"):
        query_distances(es, tr, "sideways")


# ---------------------------------------------------------------- metrics


def test_metrics_hand_example():
    m = metrics_from_ranks([1.0, 2.0, 4.0])
    assert m.mrr == pytest.approx((1.0 + 0.5 + 0.25) / 3.0, abs=1e-15)
    assert m.h1 == pytest.approx(1.0 / 3.0)
    assert m.h3 == pytest.approx(2.0 / 3.0)
    assert m.h5 == 1.0
    assert m.h10 == 1.0


def test_half_ranks_count_toward_hits():
    m = metrics_from_ranks([1.5, 3.5, 10.5])
    assert m.h1 == 0.0
    assert m.h3 == pytest.approx(1.0 / 3.0)
    assert m.h10 == pytest.approx(2.0 / 3.0)


def test_metrics_reject_empty():
    with pytest.raises(EvalError, match="zero queries"):
        metrics_from_ranks([])


def test_pool_overall_weighting():
    e = Metrics(0.3, 0.1, 0.2, 0.3, 0.4)
    r = Metrics(0.6, 0.4, 0.5, 0.6, 0.7)
    o = pool_overall(e, r)
    assert o.mrr == pytest.approx((2 * 0.3 + 0.6) / 3.0, abs=1e-15)
    assert o.h10 == pytest.approx((2 * 0.4 + 0.7) / 3.0, abs=1e-15)


def test_evaluate_split_pools_exactly():
    rng = np.random.default_rng(3)
    es = space(seed=3)
    triples = random_kg(rng, n=15)
    flt = build_filter_index([triples])
    rep = evaluate_split(es, triples, flt)
    assert rep.n_triples == 15
    # overall over the pooled rank list equals the 2:1 task mix because
    # entity queries outnumber relation queries exactly two to one
    pooled = pool_overall(rep.entity, rep.relation)
    for a, b in zip(rep.overall, pooled):
        assert a == pytest.approx(b, abs=1e-12)
    with pytest.raises(EvalError, match="empty"):
        evaluate_split(es, [], flt)


# ---------------------------------------------------------------- prediction


def test_predict_topk_orders_and_filters():
    es = space(seed=7)
    vocab = Vocabulary()
    for i in range(9):
        vocab.add(f"e{i}")
    triples = [Triple(0, 0, 1), Triple(0, 0, 2)]
    flt = build_filter_index([triples])
    rows = predict_topk(es, Triple(0, 0, 1), "tail", flt, vocab, k=5)
    names = [nm for _, nm, _ in rows]
    assert "e1" not in names and "e2" not in names  # known answers dropped
    dists = [d for _, _, d in rows]
    assert dists == sorted(dists)
    assert [r for r, _, _ in rows] == [1, 2, 3, 4, 5]


def test_predict_topk_target_stays_visible():
    es = space(seed=8)
    vocab = Vocabulary()
    for i in range(9):
        vocab.add(f"e{i}")
    flt = build_filter_index([[Triple(0, 0, 3)]])
    rows = predict_topk(es, Triple(0, 0, 3), "tail", flt, vocab, k=9, target=3)
    assert "e3" in [nm for _, nm, _ in rows]


def test_predict_topk_breaks_ties_by_id():
    es = space()
    es.ent_phase[:] = 0.0
    es.ent_mod[:] = 1.0
    es.rel_phase[:] = 0.0
    es.rel_mod_raw[:] = 1.0
    vocab = Vocabulary()
    for i in range(9):
        vocab.add(f"e{i}")
    flt = build_filter_index([[Triple(0, 0, 0)]])
    rows = predict_topk(es, Triple(0, 0, 0), "tail", flt, vocab, k=4)
    # e0 is the known answer and gets filtered; the rest tie and sort by id
    assert [nm for _, nm, _ in rows] == ["e1", "e2", "e3", "e4"]


# ---------------------------------------------------------------- formatting


def test_metrics_tsv_shape():
    m = Metrics(0.123456, 0.1, 0.2, 0.3, 0.4)
    text = format_metrics_tsv(EvalReport(entity=m, relation=m, overall=m, n_triples=1))
    lines = text.strip().split("\n")
    assert lines[0].split("\t") == ["task", "MRR", "H@1", "H@3", "H@5", "H@10"]
    assert lines[1].split("\t")[0] == "entity"
    assert lines[1].split("\t")[1] == "0.123"


def test_predictions_tsv_full_precision():
    text = format_predictions_tsv([(1, "alpha", 0.1), (2, "beta", 2.5)])
    lines = text.strip().split("\n")
    assert lines[0] == "rank\tname\tdistance"
    assert lines[1] == f"1\talpha\t{repr(0.1)}"
