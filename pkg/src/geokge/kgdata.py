"""Symbolic knowledge-graph storage: vocabularies, triples, splits, filter index.

Triple files are UTF-8 text, one ``head<TAB>relation<TAB>tail`` per line.
Lines starting with ``#`` are comments; blank lines are skipped.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import GeokgeError


class TripleFileError(GeokgeError):
    """Raised for malformed or empty triple files."""


class SplitError(GeokgeError):
    """Raised for impossible split ratios or too few triples."""


class Triple(NamedTuple):
    h: int
    r: int
    t: int


class Vocabulary:
    """Bijective mapping between names and dense 0-based ids.

    Names keep first-seen order, so re-adding an existing name is a no-op
    and ids are stable under re-ingestion.
    """

    def __init__(self, names: Iterable[str] = ()):
        self.names: list[str] = []
        self.index: dict[str, int] = {}
        for n in names:
            self.add(n)

    def add(self, name: str) -> int:
        ident = self.index.get(name)
        if ident is None:
            ident = len(self.names)
            self.names.append(name)
            self.index[name] = ident
        return ident

    def id(self, name: str) -> int:
        return self.index[name]

    def name(self, ident: int) -> str:
        return self.names[ident]

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.names == other.names

    def content_hash(self) -> str:
        """sha256 over the ordered names; used for cross-file consistency checks."""
        h = hashlib.sha256()
        for n in self.names:
            h.update(n.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()


@dataclass
class SplitDataset:
    train: list[Triple]
    valid: list[Triple]
    test: list[Triple]
    split_seed: int


@dataclass
class FilterIndex:
    """Known-true triples with the three projection maps used by filtered ranking."""

    known: set[Triple] = field(default_factory=set)
    by_hr: dict[tuple[int, int], set[int]] = field(default_factory=dict)
    by_rt: dict[tuple[int, int], set[int]] = field(default_factory=dict)
    by_ht: dict[tuple[int, int], set[int]] = field(default_factory=dict)

    def add(self, triple: Triple) -> None:
        triple = Triple(*triple)
        if triple in self.known:
            return
        self.known.add(triple)
        self.by_hr.setdefault((triple.h, triple.r), set()).add(triple.t)
        self.by_rt.setdefault((triple.r, triple.t), set()).add(triple.h)
        self.by_ht.setdefault((triple.h, triple.t), set()).add(triple.r)

    def __contains__(self, triple) -> bool:
        return Triple(*triple) in self.known

    def tails(self, h: int, r: int) -> set[int]:
        return self.by_hr.get((h, r), set())

    def heads(self, r: int, t: int) -> set[int]:
        return self.by_rt.get((r, t), set())

    def relations(self, h: int, t: int) -> set[int]:
        return self.by_ht.get((h, t), set())


def parse_triple_lines(lines: Iterable[str]) -> list[tuple[str, str, str, int]]:
    """Parse raw lines into (head, relation, tail, line_number) records."""
    records = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3 or any(p == "" for p in parts):
            raise TripleFileError(
                f"line {lineno}: expected 3 non-empty tab-separated fields, got {parts!r}"
            )
        records.append((parts[0], parts[1], parts[2], lineno))
    return records


def ingest_triples(
    path,
    entity_vocab: Vocabulary | None = None,
    relation_vocab: Vocabulary | None = None,
    dedup: bool = False,
) -> tuple[Vocabulary, Vocabulary, list[Triple]]:
    """Read a triple file, extending the vocabularies in first-seen order.

    Duplicate lines are kept unless ``dedup`` is set; ingestion is lossless
    by default.
    """
    entity_vocab = entity_vocab if entity_vocab is not None else Vocabulary()
    relation_vocab = relation_vocab if relation_vocab is not None else Vocabulary()
    with open(path, encoding="utf-8") as fh:
        records = parse_triple_lines(fh)
    if not records:
        raise TripleFileError(f"{path}: no triples found")
    triples: list[Triple] = []
    seen: set[Triple] = set()
    for head, rel, tail, _ in records:
        triple = Triple(entity_vocab.add(head), relation_vocab.add(rel), entity_vocab.add(tail))
        if dedup:
            if triple in seen:
                continue
            seen.add(triple)
        triples.append(triple)
    return entity_vocab, relation_vocab, triples


def write_triples(path, triples: Sequence[Triple], entity_vocab: Vocabulary,
                  relation_vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tr in triples:
            fh.write(f"{entity_vocab.name(tr.h)}\t{relation_vocab.name(tr.r)}\t{entity_vocab.name(tr.t)}\n")


def _part_size(n: int, pct: float) -> int:
    # guard against float noise just below an exact integer
    return int(math.floor(n * pct / 100.0 + 1e-9))


def split_dataset(triples: Sequence[Triple], ratio: tuple[float, float, float],
                  seed: int) -> SplitDataset:
    """Deterministic seeded shuffle followed by a contiguous train/valid/test cut.

    Valid and test get floor allocations of their percentages; the remainder
    goes to train.
    """
    tr_pct, va_pct, te_pct = ratio
    if min(tr_pct, va_pct, te_pct) <= 0:
        raise SplitError(f"ratio percentages must be positive, got {ratio}")
    if not math.isclose(tr_pct + va_pct + te_pct, 100.0, abs_tol=1e-9):
        raise SplitError(f"ratio must sum to 100, got {ratio}")
    n = len(triples)
    n_valid = _part_size(n, va_pct)
    n_test = _part_size(n, te_pct)
    n_train = n - n_valid - n_test
    if min(n_train, n_valid, n_test) < 1:
        raise SplitError(
            f"{n} triples cannot fill every part of a {ratio} split; "
            f"sizes would be ({n_train}, {n_valid}, {n_test})"
        )
    order = list(range(n))
    random.Random(seed).shuffle(order)
    shuffled = [triples[i] for i in order]
    return SplitDataset(
        train=shuffled[:n_train],
        valid=shuffled[n_train:n_train + n_valid],
        test=shuffled[n_train + n_valid:],
        split_seed=seed,
    )


def build_filter_index(splits: Iterable[Sequence[Triple]]) -> FilterIndex:
    """Index the union of the given splits for known-true membership queries."""
    index = FilterIndex()
    for split in splits:
        for triple in split:
            index.add(triple)
    return index
