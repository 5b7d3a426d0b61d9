import random

import pytest

from geokge.kgdata import (
    FilterIndex,
    SplitError,
    Triple,
    TripleFileError,
    Vocabulary,
    build_filter_index,
    ingest_triples,
    parse_triple_lines,
    split_dataset,
    write_triples,
)


def test_vocabulary_first_seen_order_and_stability():
    v = Vocabulary()
    assert v.add("b") == 0
    assert v.add("a") == 1
    assert v.add("b") == 0
    assert len(v) == 2
    assert v.name(1) == "a"
    assert v.id("a") == 1
    assert "a" in v and "zz" not in v


def test_vocabulary_content_hash_sensitive_to_order_and_concat():
    assert Vocabulary(["a", "b"]).content_hash() != Vocabulary(["b", "a"]).content_hash()
    # separator prevents ("ab","c") colliding with ("a","bc")
    assert Vocabulary(["ab", "c"]).content_hash() != Vocabulary(["a", "bc"]).content_hash()
    assert Vocabulary(["a"]).content_hash() == Vocabulary(["a"]).content_hash()


def test_parse_triple_lines_skips_comments_and_blank():
    records = parse_triple_lines(["a\tr\tb\n", "", "   ", "# comment\n", "c\tr\td"])
    assert [(h, r, t) for h, r, t, _ in records] == [("a", "r", "b"), ("c", "r", "d")]
    assert [ln for _, _, _, ln in records] == [1, 5]


@pytest.mark.parametrize("line", ["a\tb", "a\tr\t", "a\tr\tb\tc", "a r b"])
def test_parse_triple_lines_rejects_malformed(line):
    with pytest.raises(TripleFileError, match="line 1"):
        parse_triple_lines([line])


def test_ingest_round_trip(tmp_path):
    p = tmp_path / "triples.tsv"
    p.write_text("x\tlikes\ty\ny\tlikes\tx\nx\tnear\tz\n")
    ev, rv, triples = ingest_triples(p)
    assert ev.names == ["x", "y", "z"]
    assert rv.names == ["likes", "near"]
    assert triples == [Triple(0, 0, 1), Triple(1, 0, 0), Triple(0, 1, 2)]
    out = tmp_path / "out.tsv"
    write_triples(out, triples, ev, rv)
    assert out.read_text() == "x\tlikes\ty\ny\tlikes\tx\nx\tnear\tz\n"


def test_ingest_empty_file_rejected(tmp_path):
    p = tmp_path / "empty.tsv"
    p.write_text("# only a comment\n")
    with pytest.raises(TripleFileError, match="no triples"):
        ingest_triples(p)


def test_ingest_keeps_duplicates_unless_dedup(tmp_path):
    p = tmp_path / "dup.tsv"
    p.write_text("a\tr\tb\na\tr\tb\n")
    assert len(ingest_triples(p)[2]) == 2
    assert len(ingest_triples(p, dedup=True)[2]) == 1


def test_split_sizes_87_3_10():
    triples = [Triple(i, 0, i + 1) for i in range(4613)]
    s = split_dataset(triples, (87, 3, 10), seed=0)
    assert (len(s.train), len(s.valid), len(s.test)) == (4014, 138, 461)


def test_split_is_seeded_shuffle_partition():
    triples = [Triple(i, 0, i) for i in range(100)]
    s1 = split_dataset(triples, (80, 10, 10), seed=3)
    s2 = split_dataset(triples, (80, 10, 10), seed=3)
    assert s1.train == s2.train and s1.valid == s2.valid and s1.test == s2.test
    s3 = split_dataset(triples, (80, 10, 10), seed=4)
    assert s1.train != s3.train
    combined = sorted(s1.train + s1.valid + s1.test)
    assert combined == sorted(triples)
    # the shuffle is the documented one
    order = list(range(100))
    random.Random(3).shuffle(order)
    assert s1.train == [triples[i] for i in order[:80]]


def test_split_rejects_bad_ratios():
    triples = [Triple(i, 0, i) for i in range(50)]
    with pytest.raises(SplitError):
        split_dataset(triples, (90, 10, 10), seed=0)
    with pytest.raises(SplitError):
        split_dataset(triples, (100, 0, 0), seed=0)
    with pytest.raises(SplitError):
        split_dataset([Triple(0, 0, 1)], (87, 3, 10), seed=0)


def test_split_floor_allocation_remainder_to_train():
    triples = [Triple(i, 0, i) for i in range(10)]
    s = split_dataset(triples, (50, 25, 25), seed=0)
    assert (len(s.train), len(s.valid), len(s.test)) == (6, 2, 2)
    # 33.4% of 10 floors to 3, train picks up the slack
    s = split_dataset(triples, (33.2, 33.4, 33.4), seed=0)
    assert (len(s.train), len(s.valid), len(s.test)) == (4, 3, 3)


def test_filter_index_projections():
    flt = build_filter_index([[Triple(0, 0, 1), Triple(0, 0, 2), Triple(3, 1, 1)]])
    assert Triple(0, 0, 1) in flt
    assert (0, 0, 3) not in flt
    assert flt.tails(0, 0) == {1, 2}
    assert flt.heads(0, 1) == {0}
    assert flt.heads(1, 1) == {3}
    assert flt.relations(0, 1) == {0}
    assert flt.tails(9, 9) == set()


def test_filter_index_dedups():
    flt = FilterIndex()
    flt.add(Triple(1, 2, 3))
    flt.add(Triple(1, 2, 3))
    assert len(flt.known) == 1
