"""Synthetic geospatial KG generator with controllable regularities.

Entities are scattered around cluster centers and carry point, polyline,
or polygon geometries. Relation terms come in ten archetype groups of
three synonyms each; a triple's term is picked from the group whose
archetype the ordered entity pair actually exhibits (topological
predicates first, then distance terciles, then compass cardinal), so the
geometric features the pipeline later extracts genuinely predict the
relation. A configurable fraction of uniformly mislabeled noise triples
is mixed in.

Engineered structures guarantee pool coverage for the rarer archetypes:
each cluster gets one oversized polygon at its center (containment) and
up to two pairs of squares sharing an edge exactly (touching).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import GeokgeError
from .geometry import (
    POINT,
    POLYGON,
    POLYLINE,
    CoincidentCentroidsError,
    Geometry,
    GeometryError,
    centroid,
    compass_octant,
    de9im,
)

ARCHETYPES = (
    "CONTAINS", "WITHIN", "OVERLAP", "TOUCHES", "NEAR",
    "FAR", "NORTH", "EAST", "SOUTH", "WEST",
)

DEFAULT_GROUPS: dict[str, tuple[str, str, str]] = {
    "CONTAINS": ("contains", "encloses", "surrounds"),
    "WITHIN": ("within", "inside", "enclosed_by"),
    "OVERLAP": ("crosses", "overlaps", "intersects"),
    "TOUCHES": ("touches", "borders", "adjacent_to"),
    "NEAR": ("near", "close_to", "beside"),
    "FAR": ("far_from", "distant_from", "remote_from"),
    "NORTH": ("north_of", "northward_of", "due_north_of"),
    "EAST": ("east_of", "eastward_of", "due_east_of"),
    "SOUTH": ("south_of", "southward_of", "due_south_of"),
    "WEST": ("west_of", "westward_of", "due_west_of"),
}

_CARDINAL = ("NORTH", "EAST", "SOUTH", "WEST")
_CLUSTER_SIGMA = 30.0


class SynthError(GeokgeError):
    pass


@dataclass(frozen=True)
class GenConfig:
    n_entities: int = 500
    n_triples: int = 3000
    noise_rate: float = 0.1
    seed: int = 7
    extent: float = 1000.0

    def validate(self) -> "GenConfig":
        if self.n_entities < 8:
            raise SynthError(f"n_entities must be >= 8, got {self.n_entities}")
        if self.n_triples < 1:
            raise SynthError(f"n_triples must be >= 1, got {self.n_triples}")
        if not 0.0 <= self.noise_rate < 1.0:
            raise SynthError(f"noise_rate must be in [0, 1), got {self.noise_rate}")
        if self.extent <= 0:
            raise SynthError(f"extent must be > 0, got {self.extent}")
        return self


@dataclass
class SynthResult:
    entities: list[str]
    geoms: dict[str, Geometry]
    triples: list[tuple[str, str, str]]
    groups: list[tuple[str, str]]
    report: dict = field(default_factory=dict)


def _star_polygon(rng, cx: float, cy: float, r_base: float) -> Geometry:
    for _ in range(20):
        n = int(rng.integers(5, 10))
        ang = np.sort(rng.uniform(0.0, 2.0 * math.pi, n))
        gaps = np.diff(np.append(ang, ang[0] + 2.0 * math.pi))
        if gaps.min() < 1e-2:
            continue
        rad = r_base * rng.uniform(0.7, 1.3, n)
        pts = [(cx + rad[i] * math.cos(ang[i]), cy + rad[i] * math.sin(ang[i]))
               for i in range(n)]
        pts.append(pts[0])
        try:
            return Geometry(POLYGON, tuple(pts))
        except GeometryError:
            continue
    raise SynthError("could not build a valid star polygon after 20 tries")


def _square(cx: float, cy: float, side: float) -> Geometry:
    h = side / 2.0
    x0, y0, x1, y1 = cx - h, cy - h, cx + h, cy + h
    return Geometry(POLYGON, ((x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)))


def _translate(g: Geometry, dx: float, dy: float) -> Geometry:
    return Geometry(g.kind, tuple((x + dx, y + dy) for x, y in g.coords))


def _walk_polyline(rng, x: float, y: float) -> Geometry:
    n = int(rng.integers(3, 7))
    pts = [(x, y)]
    for _ in range(n - 1):
        step = rng.normal(0.0, 20.0, 2)
        while math.hypot(step[0], step[1]) < 1.0:
            step = rng.normal(0.0, 20.0, 2)
        px, py = pts[-1]
        pts.append((px + float(step[0]), py + float(step[1])))
    return Geometry(POLYLINE, tuple(pts))


def _build_geometries(cfg: GenConfig, rng) -> tuple[list[str], dict[str, Geometry], list[list[int]]]:
    n = cfg.n_entities
    names = [f"e{i:04d}" for i in range(n)]
    n_clusters = min(n, max(4, n // 25))
    centers = rng.uniform(0.0, cfg.extent, (n_clusters, 2))
    clusters = [[i for i in range(n) if i % n_clusters == c] for c in range(n_clusters)]

    geoms: dict[str, Geometry] = {}
    for c, members in enumerate(clusters):
        cx, cy = float(centers[c, 0]), float(centers[c, 1])
        poly_seen = 0
        pending_square: Geometry | None = None
        for e in members:
            off = rng.normal(0.0, _CLUSTER_SIGMA, 2)
            x, y = cx + float(off[0]), cy + float(off[1])
            u = rng.random()
            if u < 0.3:
                geoms[names[e]] = Geometry(POINT, ((x, y),))
            elif u < 0.5:
                geoms[names[e]] = _walk_polyline(rng, x, y)
            else:
                poly_seen += 1
                if poly_seen == 1:
                    # cluster container: big enough to hold members near the center
                    geoms[names[e]] = _star_polygon(rng, cx, cy, float(rng.uniform(40.0, 60.0)))
                elif poly_seen in (2, 4):
                    sq = _square(x, y, float(rng.uniform(8.0, 20.0)))
                    geoms[names[e]] = sq
                    pending_square = sq
                elif poly_seen in (3, 5) and pending_square is not None:
                    side = pending_square.coords[1][0] - pending_square.coords[0][0]
                    geoms[names[e]] = _translate(pending_square, side, 0.0)
                    pending_square = None
                else:
                    geoms[names[e]] = _star_polygon(rng, x, y, float(rng.uniform(3.0, 25.0)))
    return names, geoms, clusters


def _bbox(g: Geometry) -> tuple[float, float, float, float]:
    xs = [p[0] for p in g.coords]
    ys = [p[1] for p in g.coords]
    return min(xs), min(ys), max(xs), max(ys)


def _bbox_disjoint(a, b) -> bool:
    return a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1]


_TRANSPOSE_IDX = (0, 3, 6, 1, 4, 7, 2, 5, 8)


class _Classifier:
    """Archetype classification with a pattern cache keyed on unordered pairs."""

    def __init__(self, geoms: dict[str, Geometry], names: list[str], t1: float, t2: float):
        self.geoms = geoms
        self.names = names
        self.t1 = t1
        self.t2 = t2
        self.cents = {nm: centroid(g) for nm, g in geoms.items()}
        self.boxes = {nm: _bbox(g) for nm, g in geoms.items()}
        self._pat: dict[tuple[str, str], str] = {}

    def pattern(self, a: str, b: str) -> str:
        if a <= b:
            key, flip = (a, b), False
        else:
            key, flip = (b, a), True
        pat = self._pat.get(key)
        if pat is None:
            pat = de9im(self.geoms[key[0]], self.geoms[key[1]])
            self._pat[key] = pat
        if flip:
            pat = "".join(pat[i] for i in _TRANSPOSE_IDX)
        return pat

    def classify(self, h: str, t: str) -> str:
        if not _bbox_disjoint(self.boxes[h], self.boxes[t]):
            pat = self.pattern(h, t)
            ii, ib, ie = pat[0], pat[1], pat[2]
            bi, bb, be = pat[3], pat[4], pat[5]
            ei, eb = pat[6], pat[7]
            if ii != "F" and ie == "F" and be == "F":
                return "WITHIN"
            if ii != "F" and ei == "F" and eb == "F":
                return "CONTAINS"
            if ii != "F":
                return "OVERLAP"
            if ib != "F" or bi != "F" or bb != "F":
                return "TOUCHES"
        ch = self.cents[h]
        ct = self.cents[t]
        dist = math.hypot(ch[0] - ct[0], ch[1] - ct[1])
        if dist <= self.t1:
            return "NEAR"
        if dist >= self.t2:
            return "FAR"
        try:
            octant = compass_octant(ct, ch)
        except CoincidentCentroidsError:
            return "NEAR"
        return _CARDINAL[((octant + 1) // 2) % 4]


def _distance_terciles(names, cents, rng) -> tuple[float, float]:
    n = len(names)
    n_probe = min(2000, n * (n - 1))
    dists = np.empty(n_probe)
    for i in range(n_probe):
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        while b == a:
            b = int(rng.integers(n))
        ca, cb = cents[names[a]], cents[names[b]]
        dists[i] = math.hypot(ca[0] - cb[0], ca[1] - cb[1])
    t1, t2 = np.quantile(dists, [1.0 / 3.0, 2.0 / 3.0])
    return float(t1), float(t2)


def generate(cfg: GenConfig) -> SynthResult:
    cfg = cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    names, geoms, clusters = _build_geometries(cfg, rng)

    cents = {nm: centroid(g) for nm, g in geoms.items()}
    t1, t2 = _distance_terciles(names, cents, rng)
    clf = _Classifier(geoms, names, t1, t2)

    pools: dict[str, list[tuple[str, str]]] = {a: [] for a in ARCHETYPES}
    seen_pairs: set[tuple[str, str]] = set()

    def add_pair(i: int, j: int) -> None:
        h, t = names[i], names[j]
        if (h, t) in seen_pairs:
            return
        seen_pairs.add((h, t))
        pools[clf.classify(h, t)].append((h, t))

    for members in clusters:
        for i in members:
            for j in members:
                if i != j:
                    add_pair(i, j)

    n = cfg.n_entities
    n_clusters = len(clusters)
    for _ in range(max(4 * cfg.n_triples, 4000)):
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        if a == b or a % n_clusters == b % n_clusters:
            continue
        add_pair(a, b)

    # each accepted pair emits one triple whose term is a uniform draw from
    # its archetype's synonym group, so the same configuration shows up
    # under varying vocabulary across pairs
    queues: dict[str, deque] = {}
    pool_sizes: dict[str, int] = {}
    for arch in ARCHETYPES:
        idx = rng.permutation(len(pools[arch]))
        queues[arch] = deque(pools[arch][i] for i in idx)
        pool_sizes[arch] = len(pools[arch])

    n_noise = int(round(cfg.n_triples * cfg.noise_rate))
    clean_target = cfg.n_triples - n_noise
    produced: dict[str, int] = {a: 0 for a in ARCHETYPES}
    triples: list[tuple[str, str, str]] = []
    seen: set[tuple[str, str, str]] = set()
    while len(triples) < clean_target and any(queues.values()):
        for arch in ARCHETYPES:
            if len(triples) >= clean_target:
                break
            q = queues[arch]
            if q:
                h, t = q.popleft()
                group = DEFAULT_GROUPS[arch]
                term = group[int(rng.integers(len(group)))]
                cand = (h, term, t)
                seen.add(cand)
                triples.append(cand)
                produced[arch] += 1

    all_terms = [t for a in ARCHETYPES for t in DEFAULT_GROUPS[a]]
    noise: list[tuple[str, str, str]] = []
    attempts = 0
    while len(noise) < n_noise and attempts < 50 * n_noise + 100:
        attempts += 1
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        if a == b:
            continue
        term = all_terms[int(rng.integers(len(all_terms)))]
        cand = (names[a], term, names[b])
        if cand in seen:
            continue
        seen.add(cand)
        noise.append(cand)

    triples.extend(noise)
    order = rng.permutation(len(triples))
    triples = [triples[i] for i in order]

    groups = [(term, arch) for arch in ARCHETYPES for term in DEFAULT_GROUPS[arch]]
    report = {
        "requested": cfg.n_triples,
        "produced": len(triples),
        "clean": len(triples) - len(noise),
        "noise": len(noise),
        "shortfall": cfg.n_triples - len(triples),
        "tercile_low": t1,
        "tercile_high": t2,
        "per_archetype": produced,
        "pool_sizes": pool_sizes,
    }
    return SynthResult(entities=names, geoms=geoms, triples=triples,
                       groups=groups, report=report)


def format_report(result: SynthResult) -> str:
    r = result.report
    lines = [
        f"entities = {len(result.entities)}",
        f"triples_requested = {r['requested']}",
        f"triples_produced = {r['produced']}",
        f"clean = {r['clean']}",
        f"noise = {r['noise']}",
        f"shortfall = {r['shortfall']}",
        f"tercile_low = {r['tercile_low']:.3f}",
        f"tercile_high = {r['tercile_high']:.3f}",
    ]
    for arch in ARCHETYPES:
        lines.append(
            f"archetype {arch}: pairs={r['pool_sizes'][arch]} produced={r['per_archetype'][arch]}"
        )
    return "\n".join(lines) + "\n"
