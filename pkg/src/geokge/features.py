"""Categorical geometric features for entity pairs.

Every ordered (head, tail) pair occurring in a triple set gets three
categories: a nine-intersection topology pattern, a compass octant of the
head→tail centroid bearing (or DIR_NONE when the centroids coincide), and a
natural-breaks bin of the centroid distance. Relation↔category alignment
pairs are aggregated from the train split only.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import GeokgeError
from .geometry import (
    OCTANT_NAMES,
    CoincidentCentroidsError,
    Geometry,
    centroid,
    compass_octant,
    de9im,
)
from .kgdata import Triple, Vocabulary

KINDS = ("TOPO", "DIR", "DIS")
DIR_NONE = "DIR_NONE"


class FeatureError(GeokgeError):
    pass


@dataclass(frozen=True)
class JenksBreaks:
    """Class boundaries from optimal 1-D classification.

    `classify` is total: the first interval is unbounded below, the last
    unbounded above, and a value equal to a boundary falls in the lower bin.
    """

    boundaries: tuple[float, ...]
    k: int

    def __post_init__(self):
        if self.k != len(self.boundaries) + 1:
            raise FeatureError("class count must be len(boundaries) + 1")
        if any(b >= c for b, c in zip(self.boundaries, self.boundaries[1:])):
            raise FeatureError("boundaries must be strictly increasing")


def assign_bin(d: float, breaks: JenksBreaks) -> int:
    return bisect_left(breaks.boundaries, d)


def _class_costs(p1, p2, i, s):
    # identical arithmetic to the kernel DP so backtracking re-derives its minima
    return (p2[s] - p2[i]) - (p1[s] - p1[i]) ** 2 / (s - i)


def jenks_breaks(values: Sequence[float], k: int) -> JenksBreaks:
    """Optimal K-class 1-D classification of a value multiset.

    Exact dynamic program minimizing total within-class squared deviation;
    ties broken toward the lowest-index partition. Fewer distinct values
    than classes falls back to one class per distinct value, with a warning.
    """
    if k < 1:
        raise FeatureError(f"class count must be >= 1, got {k}")
    vals = np.sort(np.asarray(list(values), dtype=np.float64))
    n = len(vals)
    if n == 0:
        raise FeatureError("cannot fit breaks on an empty value set")
    if not np.isfinite(vals).all():
        raise FeatureError("values must be finite")
    n_distinct = len(np.unique(vals))
    if n_distinct < k:
        warnings.warn(
            f"only {n_distinct} distinct values for {k} classes; "
            f"falling back to {n_distinct} classes",
            RuntimeWarning,
            stacklevel=2,
        )
        k = n_distinct
    if k == 1:
        return JenksBreaks((), 1)
    p1 = np.concatenate(([0.0], np.cumsum(vals)))
    p2 = np.concatenate(([0.0], np.cumsum(vals * vals)))
    B = kernels.jenks_cost_table(p1, p2, k)
    starts = [0]
    i = 0
    for m in range(k, 1, -1):
        s = np.arange(i + 1, n - m + 2)
        costs = _class_costs(p1, p2, i, s) + B[m - 1, i + 1 : n - m + 2]
        i = int(i + 1 + np.argmin(costs))
        starts.append(i)
    boundaries = []
    for s0 in starts[1:]:
        b = float(vals[s0 - 1] + vals[s0]) / 2.0
        if boundaries and b <= boundaries[-1]:
            # optimal splits never separate equal values when k <= distinct
            # count, so collapsing here is pure defensiveness
            warnings.warn("collapsing duplicate class boundary", RuntimeWarning, stacklevel=2)
            continue
        boundaries.append(b)
    return JenksBreaks(tuple(boundaries), len(boundaries) + 1)


class PairFeature(NamedTuple):
    topo: int
    direction: int
    distance: int


@dataclass
class FeatureSet:
    """Per-pair categorical features plus their vocabularies and breaks."""

    pairs: dict[tuple[int, int], PairFeature]
    topo_vocab: Vocabulary
    dir_vocab: Vocabulary
    dis_vocab: Vocabulary
    breaks: JenksBreaks
    missing: tuple[str, ...] = ()

    def vocab(self, kind: str) -> Vocabulary:
        return {"TOPO": self.topo_vocab, "DIR": self.dir_vocab, "DIS": self.dis_vocab}[kind]

    def sizes(self) -> dict[str, int]:
        return {kind: len(self.vocab(kind)) for kind in KINDS}


def _dir_vocab() -> Vocabulary:
    v = Vocabulary()
    for name in OCTANT_NAMES:
        v.add(name)
    v.add(DIR_NONE)
    return v


def _bin_label(i: int) -> str:
    return f"bin{i:02d}"


def extract_pair_features(
    triples: Sequence[Triple],
    entity_vocab: Vocabulary,
    geoms: Mapping[str, Geometry],
    k_dis: int,
) -> FeatureSet:
    """Compute topology/direction/distance categories for every distinct
    ordered entity pair in `triples`.

    Distance breaks are fit on the multiset of centroid distances of those
    same pairs. Pairs with a missing geometry are skipped and reported via
    `FeatureSet.missing`.
    """
    if k_dis < 1:
        raise FeatureError(f"distance class count must be >= 1, got {k_dis}")
    pair_ids = sorted({(tr.h, tr.t) for tr in triples})
    missing: set[str] = set()
    usable: list[tuple[int, int]] = []
    for h, t in pair_ids:
        absent = [n for n in (entity_vocab.name(h), entity_vocab.name(t)) if n not in geoms]
        if absent:
            missing.update(absent)
        else:
            usable.append((h, t))
    if not usable:
        raise FeatureError("no entity pair has geometry on both sides")

    cents = {}
    for h, t in usable:
        for e in (h, t):
            if e not in cents:
                cents[e] = centroid(geoms[entity_vocab.name(e)])

    distances = [
        math.hypot(cents[h][0] - cents[t][0], cents[h][1] - cents[t][1])
        for h, t in usable
    ]
    breaks = jenks_breaks(distances, k_dis)

    dir_vocab = _dir_vocab()
    dis_vocab = Vocabulary()
    for i in range(breaks.k):
        dis_vocab.add(_bin_label(i))

    patterns = {}
    for h, t in usable:
        patterns[(h, t)] = de9im(geoms[entity_vocab.name(h)], geoms[entity_vocab.name(t)])
    topo_vocab = Vocabulary()
    for pat in sorted(set(patterns.values())):
        topo_vocab.add(pat)

    pairs = {}
    for (h, t), d in zip(usable, distances):
        try:
            direction = compass_octant(cents[h], cents[t])
        except CoincidentCentroidsError:
            direction = dir_vocab.id(DIR_NONE)
        pairs[(h, t)] = PairFeature(
            topo=topo_vocab.id(patterns[(h, t)]),
            direction=direction,
            distance=assign_bin(d, breaks),
        )
    return FeatureSet(
        pairs=pairs,
        topo_vocab=topo_vocab,
        dir_vocab=dir_vocab,
        dis_vocab=dis_vocab,
        breaks=breaks,
        missing=tuple(sorted(missing)),
    )


class AlignmentPair(NamedTuple):
    r: int
    kind: str
    g: int
    weight: float


def build_alignment_pairs(
    train: Sequence[Triple],
    fs: FeatureSet,
    enabled: Iterable[str],
) -> list[AlignmentPair]:
    """Aggregate (relation, feature category) pairs over the train split.

    Weights are raw occurrence counts; triples whose pair has no features
    are skipped. Output is sorted for deterministic downstream sampling.
    """
    enabled = tuple(k for k in KINDS if k in set(enabled))
    counts: dict[tuple[int, str, int], int] = {}
    for tr in train:
        pf = fs.pairs.get((tr.h, tr.t))
        if pf is None:
            continue
        by_kind = {"TOPO": pf.topo, "DIR": pf.direction, "DIS": pf.distance}
        for kind in enabled:
            key = (tr.r, kind, by_kind[kind])
            counts[key] = counts.get(key, 0) + 1
    return [
        AlignmentPair(r, kind, g, float(c))
        for (r, kind, g), c in sorted(counts.items())
    ]


def write_features(path, fs: FeatureSet, entity_vocab: Vocabulary) -> None:
    """Write the features table and its breaks sidecar (`<path>.breaks`)."""
    with open(path, "w", encoding="utf-8") as fh:
        for (h, t) in sorted(fs.pairs):
            pf = fs.pairs[(h, t)]
            fh.write(
                f"{entity_vocab.name(h)}\t{entity_vocab.name(t)}\t"
                f"{fs.topo_vocab.name(pf.topo)}\t{fs.dir_vocab.name(pf.direction)}\t"
                f"{fs.dis_vocab.name(pf.distance)}\n"
            )
    with open(f"{path}.breaks", "w", encoding="utf-8") as fh:
        for b in fs.breaks.boundaries:
            fh.write(f"{b!r}\n")


def read_features(path, entity_vocab: Vocabulary) -> FeatureSet:
    """Rebuild a FeatureSet from the files written by write_features."""
    try:
        with open(f"{path}.breaks", encoding="utf-8") as fh:
            boundaries = tuple(float(line.strip()) for line in fh if line.strip())
    except OSError as exc:
        raise FeatureError(f"missing breaks sidecar for {path}: {exc}") from exc
    breaks = JenksBreaks(boundaries, len(boundaries) + 1)

    dir_vocab = _dir_vocab()
    dis_vocab = Vocabulary()
    for i in range(breaks.k):
        dis_vocab.add(_bin_label(i))

    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise FeatureError(f"{path}:{lineno}: expected 5 tab-separated fields")
            rows.append((lineno, parts))

    topo_vocab = Vocabulary()
    for pat in sorted({parts[2] for _, parts in rows}):
        topo_vocab.add(pat)

    pairs = {}
    for lineno, (hn, tn, pat, octant, bin_label) in rows:
        for name, vocab, what in ((octant, dir_vocab, "octant"), (bin_label, dis_vocab, "bin")):
            if name not in vocab:
                raise FeatureError(f"{path}:{lineno}: unknown {what} label {name!r}")
        if hn not in entity_vocab or tn not in entity_vocab:
            raise FeatureError(f"{path}:{lineno}: entity not in vocabulary")
        pairs[(entity_vocab.id(hn), entity_vocab.id(tn))] = PairFeature(
            topo=topo_vocab.id(pat),
            direction=dir_vocab.id(octant),
            distance=dis_vocab.id(bin_label),
        )
    return FeatureSet(
        pairs=pairs,
        topo_vocab=topo_vocab,
        dir_vocab=dir_vocab,
        dis_vocab=dis_vocab,
        breaks=breaks,
    )
