"""Planar footprint geometry kernel.

Supports three footprint kinds (point, polyline, single-ring polygon) with a
small WKT subset, centroid and distance computation, an equirectangular
lon/lat projection, 8-sector compass bearings, and nine-intersection
topology matrices.

All tolerance decisions go through the single constant ``EPS`` (absolute,
in frame units): coordinates are snapped to the EPS grid on construction,
and the orientation / on-segment predicates treat anything below EPS as
zero.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import GeokgeError

EPS = 1e-9

EARTH_RADIUS_M = 6_371_000.0

POINT = "point"
POLYLINE = "polyline"
POLYGON = "polygon"

OCTANT_NAMES = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")

# location classes used throughout the nine-intersection machinery
_INT, _BND, _EXT = 0, 1, 2
_F = -1  # empty intersection


class GeometryError(GeokgeError):
    """Invalid WKT text or a geometry violating its kind's invariants."""


class CoincidentCentroidsError(GeokgeError):
    """Direction is undefined for coincident source and target points."""


def snap(v: float) -> float:
    """Snap a coordinate to the EPS grid for deterministic predicates."""
    return round(v / EPS) * EPS


@dataclass(frozen=True)
class Geometry:
    kind: str
    coords: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "coords", tuple((snap(x), snap(y)) for x, y in self.coords)
        )
        _validate(self.kind, self.coords)

    @property
    def ring(self) -> tuple[tuple[float, float], ...]:
        """Closed vertex ring (polygon only)."""
        return self.coords


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _orient(a, b, c) -> int:
    """Sign of the turn a->b->c; 0 when c is within EPS of line(a, b)."""
    cross = _cross(a, b, c)
    if abs(cross) <= EPS * _dist(a, b):
        return 0
    return 1 if cross > 0 else -1


def _point_segment_dist(p, a, b) -> float:
    ab2 = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
    if ab2 == 0.0:
        return _dist(p, a)
    t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / ab2
    t = min(1.0, max(0.0, t))
    return _dist(p, (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))


def _on_segment(p, a, b) -> bool:
    return _point_segment_dist(p, a, b) <= EPS


def _segments(coords) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    return [(coords[i], coords[i + 1]) for i in range(len(coords) - 1)]


def _ring_area2(ring) -> float:
    """Twice the signed shoelace area of a closed ring."""
    s = 0.0
    for (x1, y1), (x2, y2) in _segments(ring):
        s += x1 * y2 - x2 * y1
    return s


def _segment_relation(a1, a2, b1, b2):
    """Classify how two segments meet.

    Returns None, ("point", p), or ("overlap", p, q) with p/q on segment a.
    """
    da = (a2[0] - a1[0], a2[1] - a1[1])
    db = (b2[0] - b1[0], b2[1] - b1[1])
    la = math.hypot(*da)
    if (
        abs(_cross(a1, a2, b1)) <= EPS * la
        and abs(_cross(a1, a2, b2)) <= EPS * la
    ):
        # collinear: project b's endpoints on a's parameter axis
        t1 = ((b1[0] - a1[0]) * da[0] + (b1[1] - a1[1]) * da[1]) / (la * la)
        t2 = ((b2[0] - a1[0]) * da[0] + (b2[1] - a1[1]) * da[1]) / (la * la)
        lo, hi = min(t1, t2), max(t1, t2)
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        if (hi - lo) * la > EPS:
            p = (a1[0] + lo * da[0], a1[1] + lo * da[1])
            q = (a1[0] + hi * da[0], a1[1] + hi * da[1])
            return ("overlap", p, q)
        if hi >= lo - EPS / max(la, EPS):
            t = (lo + hi) / 2.0
            return ("point", (a1[0] + t * da[0], a1[1] + t * da[1]))
        return None
    denom = da[0] * db[1] - da[1] * db[0]
    if denom == 0.0:
        return None
    rx, ry = b1[0] - a1[0], b1[1] - a1[1]
    t = (rx * db[1] - ry * db[0]) / denom
    u = (rx * da[1] - ry * da[0]) / denom
    lb = math.hypot(*db)
    tol_t = EPS / max(la, EPS)
    tol_u = EPS / max(lb, EPS)
    if -tol_t <= t <= 1.0 + tol_t and -tol_u <= u <= 1.0 + tol_u:
        t = min(1.0, max(0.0, t))
        return ("point", (a1[0] + t * da[0], a1[1] + t * da[1]))
    return None


def _validate(kind, coords):
    if kind == POINT:
        if len(coords) != 1:
            raise GeometryError(f"point must have exactly 1 coordinate, got {len(coords)}")
        return
    if kind == POLYLINE:
        if len(coords) < 2:
            raise GeometryError("polyline needs at least 2 coordinates")
        for a, b in _segments(coords):
            if _dist(a, b) <= EPS:
                raise GeometryError(f"zero-length polyline segment at {a}")
        return
    if kind == POLYGON:
        if len(coords) < 4:
            raise GeometryError("polygon ring needs at least 4 coordinates (closed)")
        if coords[0] != coords[-1]:
            raise GeometryError("polygon ring is not closed")
        segs = _segments(coords)
        for a, b in segs:
            if _dist(a, b) <= EPS:
                raise GeometryError(f"zero-length polygon edge at {a}")
        if abs(_ring_area2(coords)) / 2.0 <= EPS:
            raise GeometryError("polygon ring has (near) zero area")
        n = len(segs)
        for i in range(n):
            for j in range(i + 1, n):
                rel = _segment_relation(*segs[i], *segs[j])
                if rel is None:
                    continue
                adjacent = (j == i + 1) or (i == 0 and j == n - 1)
                if rel[0] == "overlap":
                    raise GeometryError("self-intersecting ring (overlapping edges)")
                if not adjacent:
                    raise GeometryError("self-intersecting ring")
                # adjacent edges may only meet at their shared vertex
                shared = segs[i][1] if j == i + 1 else segs[i][0]
                if _dist(rel[1], shared) > EPS:
                    raise GeometryError("self-intersecting ring (adjacent edge contact)")
        return
    raise GeometryError(f"unknown geometry kind {kind!r}")


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PAIR = rf"\s*({_NUM})\s+({_NUM})\s*"
_POINT_RE = re.compile(rf"^\s*POINT\s*\({_PAIR}\)\s*$", re.IGNORECASE)
_LINE_RE = re.compile(r"^\s*LINESTRING\s*\((.*)\)\s*$", re.IGNORECASE | re.DOTALL)
_POLY_RE = re.compile(r"^\s*POLYGON\s*\(\s*\((.*)\)\s*\)\s*$", re.IGNORECASE | re.DOTALL)
_PAIR_RE = re.compile(rf"^{_PAIR}$")


def _parse_coord_list(body: str, what: str) -> tuple[tuple[float, float], ...]:
    coords = []
    for chunk in body.split(","):
        m = _PAIR_RE.match(chunk)
        if not m:
            raise GeometryError(f"bad coordinate {chunk.strip()!r} in {what}")
        coords.append((float(m.group(1)), float(m.group(2))))
    return tuple(coords)


def parse_geometry(text: str) -> Geometry:
    """Parse the supported WKT subset: POINT, LINESTRING, POLYGON (one ring)."""
    m = _POINT_RE.match(text)
    if m:
        return Geometry(POINT, ((float(m.group(1)), float(m.group(2))),))
    m = _POLY_RE.match(text)
    if m:
        return Geometry(POLYGON, _parse_coord_list(m.group(1), "POLYGON"))
    m = _LINE_RE.match(text)
    if m:
        return Geometry(POLYLINE, _parse_coord_list(m.group(1), "LINESTRING"))
    raise GeometryError(f"unsupported WKT: {text.strip()[:60]!r}")


def format_geometry(g: Geometry) -> str:
    pairs = ", ".join(f"{x!r} {y!r}" for x, y in g.coords)
    if g.kind == POINT:
        return f"POINT ({pairs})"
    if g.kind == POLYLINE:
        return f"LINESTRING ({pairs})"
    return f"POLYGON (({pairs}))"


def read_geometry_file(path) -> dict[str, Geometry]:
    """Read ``entity<TAB>WKT`` lines; # comments and blank lines skipped."""
    geoms: dict[str, Geometry] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0]:
                raise GeometryError(f"{path}:{lineno}: expected 'name<TAB>WKT'")
            try:
                geoms[parts[0]] = parse_geometry(parts[1])
            except GeometryError as exc:
                raise GeometryError(f"{path}:{lineno}: {exc}") from exc
    return geoms


def write_geometry_file(path, geoms: dict[str, Geometry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for name, g in geoms.items():
            fh.write(f"{name}\t{format_geometry(g)}\n")


def centroid(g: Geometry) -> tuple[float, float]:
    """Kind-aware centroid.

    Points map to themselves; polylines use the segment-length weighted mean
    of segment midpoints (invariant to vertex densification); polygons use
    the shoelace area moments.
    """
    if g.kind == POINT:
        return g.coords[0]
    if g.kind == POLYLINE:
        sx = sy = total = 0.0
        for a, b in _segments(g.coords):
            w = _dist(a, b)
            sx += w * (a[0] + b[0]) / 2.0
            sy += w * (a[1] + b[1]) / 2.0
            total += w
        return (sx / total, sy / total)
    a2 = _ring_area2(g.coords)
    sx = sy = 0.0
    for (x1, y1), (x2, y2) in _segments(g.coords):
        w = x1 * y2 - x2 * y1
        sx += (x1 + x2) * w
        sy += (y1 + y2) * w
    return (sx / (3.0 * a2), sy / (3.0 * a2))


def project_equirect(
    lon_lat_points: Iterable[tuple[float, float]], ref_lat: float
) -> list[tuple[float, float]]:
    """Equirectangular projection at a reference latitude, in meters."""
    scale = EARTH_RADIUS_M * math.cos(math.radians(ref_lat))
    out = []
    for lon, lat in lon_lat_points:
        if not -90.0 <= lat <= 90.0:
            raise GeometryError(f"latitude {lat} out of [-90, 90]")
        out.append((scale * math.radians(lon), EARTH_RADIUS_M * math.radians(lat)))
    return out


def compass_octant(src: tuple[float, float], dst: tuple[float, float]) -> int:
    """8-sector compass id of the bearing src->dst (0=N .. 7=NW, clockwise).

    Sector k covers bearings [45k - 22.5, 45k + 22.5) degrees, measured
    clockwise from north.
    """
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    if math.hypot(dx, dy) <= EPS:
        raise CoincidentCentroidsError(f"coincident points {src} and {dst}")
    bearing = math.degrees(math.atan2(dx, dy)) % 360.0
    return int(math.floor(((bearing + 22.5) % 360.0) / 45.0))


def centroid_distance(a: Geometry, b: Geometry) -> float:
    return _dist(centroid(a), centroid(b))


# ---------------------------------------------------------------------------
# nine-intersection topology matrix


def locate_point(p: tuple[float, float], g: Geometry) -> int:
    """Class of p against g: _INT, _BND, or _EXT (OGC semantics)."""
    p = (snap(p[0]), snap(p[1]))
    if g.kind == POINT:
        return _INT if _dist(p, g.coords[0]) <= EPS else _EXT
    if g.kind == POLYLINE:
        for e in _odd_endpoints(g):
            if _dist(p, e) <= EPS:
                return _BND
        for a, b in _segments(g.coords):
            if _on_segment(p, a, b):
                return _INT
        return _EXT
    for a, b in _segments(g.coords):
        if _on_segment(p, a, b):
            return _BND
    return _INT if _point_in_ring(p, g.coords) else _EXT


def _point_in_ring(p, ring) -> bool:
    # even-odd crossing test; caller guarantees p is not on the ring
    px, py = p
    inside = False
    for (x1, y1), (x2, y2) in _segments(ring):
        if (y1 > py) != (y2 > py):
            x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < x_at:
                inside = not inside
    return inside


def _odd_endpoints(g: Geometry) -> list[tuple[float, float]]:
    """Mod-2 boundary of a polyline: its endpoints, none if the curve is closed."""
    first, last = g.coords[0], g.coords[-1]
    if _dist(first, last) <= EPS:
        return []
    return [first, last]


def _curve_class(g: Geometry) -> int:
    # a polyline's curve is its interior; a polygon's curve is its boundary
    return _INT if g.kind == POLYLINE else _BND


def _point_class_on_curve(q, g: Geometry) -> int:
    if g.kind == POLYGON:
        return _BND
    for e in _odd_endpoints(g):
        if _dist(q, e) <= EPS:
            return _BND
    return _INT


def _split_curve(a: Geometry, b: Geometry):
    """Split a's curve at every intersection with b's curve.

    Returns (midpoints of the resulting sub-segments, isolated intersection
    points). Each sub-segment lies wholly inside one location class of b,
    so its midpoint classifies the whole piece.
    """
    b_segs = _segments(b.coords)
    midpoints = []
    cut_points = []
    for a1, a2 in _segments(a.coords):
        la = _dist(a1, a2)
        params = {0.0, 1.0}

        def param_of(pt):
            return ((pt[0] - a1[0]) * (a2[0] - a1[0]) + (pt[1] - a1[1]) * (a2[1] - a1[1])) / (la * la)

        for b1, b2 in b_segs:
            rel = _segment_relation(a1, a2, b1, b2)
            if rel is None:
                continue
            if rel[0] == "point":
                params.add(min(1.0, max(0.0, param_of(rel[1]))))
                cut_points.append(rel[1])
            else:
                for pt in (rel[1], rel[2]):
                    params.add(min(1.0, max(0.0, param_of(pt))))
                    cut_points.append(pt)
        ts = sorted(params)
        for t0, t1 in zip(ts, ts[1:]):
            if (t1 - t0) * la <= 4.0 * EPS:
                continue
            tm = (t0 + t1) / 2.0
            midpoints.append((a1[0] + tm * (a2[0] - a1[0]), a1[1] + tm * (a2[1] - a1[1])))
    # dedupe isolated points on the snap grid
    uniq = {}
    for pt in cut_points:
        uniq[(snap(pt[0]), snap(pt[1]))] = pt
    return midpoints, list(uniq.values())


def _interior_point(ring) -> tuple[float, float]:
    """A point strictly inside a simple ring (extreme-vertex ear method)."""
    verts = list(ring[:-1])
    n = len(verts)
    iv = min(range(n), key=lambda i: (verts[i][0], verts[i][1]))
    v = verts[iv]
    a = verts[iv - 1]
    b = verts[(iv + 1) % n]
    sa = _orient(a, v, b)
    inside = []
    for i, w in enumerate(verts):
        if i in (iv, (iv - 1) % n, (iv + 1) % n):
            continue
        if (
            _orient(a, v, w) == sa
            and _orient(v, b, w) == sa
            and _orient(b, a, w) == sa
        ):
            inside.append(w)
    if not inside:
        return ((a[0] + v[0] + b[0]) / 3.0, (a[1] + v[1] + b[1]) / 3.0)
    den = _dist(a, b)
    q = max(inside, key=lambda w: abs(_cross(a, b, w)) / den)
    return ((v[0] + q[0]) / 2.0, (v[1] + q[1]) / 2.0)


def _de9im_point_first(p: tuple[float, float], g: Geometry):
    """Matrix for (point, g); caller transposes when the point is operand b."""
    m = [[_F] * 3 for _ in range(3)]
    m[_EXT][_EXT] = 2
    if g.kind == POINT:
        if _dist(p, g.coords[0]) <= EPS:
            m[_INT][_INT] = 0
        else:
            m[_INT][_EXT] = 0
            m[_EXT][_INT] = 0
        return m
    m[_INT][locate_point(p, g)] = 0
    if g.kind == POLYLINE:
        m[_EXT][_INT] = 1
        if any(_dist(e, p) > EPS for e in _odd_endpoints(g)):
            m[_EXT][_BND] = 0
    else:
        m[_EXT][_INT] = 2
        m[_EXT][_BND] = 1
    return m


def _transpose(m):
    return [[m[i][j] for i in range(3)] for j in range(3)]


def _matrix_to_pattern(m) -> str:
    return "".join("F" if d < 0 else str(d) for row in m for d in row)


_RANK = {POINT: 0, POLYLINE: 1, POLYGON: 2}


def de9im(a: Geometry, b: Geometry) -> str:
    """Nine-intersection pattern of a against b, row-major over
    (interior, boundary, exterior) of a x (interior, boundary, exterior) of b.
    """
    if _RANK[a.kind] < _RANK[b.kind]:
        return _matrix_to_pattern(_transpose(_pattern_matrix(b, a)))
    return _matrix_to_pattern(_pattern_matrix(a, b))


def _pattern_matrix(a: Geometry, b: Geometry):
    # precondition: rank(a) >= rank(b)
    if b.kind == POINT:
        if a.kind == POINT:
            return _transpose(_de9im_point_first(a.coords[0], b))
        return _transpose(_de9im_point_first(b.coords[0], a))

    m = [[_F] * 3 for _ in range(3)]
    m[_EXT][_EXT] = 2
    ca, cb = _curve_class(a), _curve_class(b)

    a_mids, isolated = _split_curve(a, b)
    b_mids, _ = _split_curve(b, a)
    a_classes = {locate_point(p, b) for p in a_mids}
    b_classes = {locate_point(p, a) for p in b_mids}

    for cls in a_classes:
        m[ca][cls] = max(m[ca][cls], 1)
    for cls in b_classes:
        m[cls][cb] = max(m[cls][cb], 1)
    for q in isolated:
        i, j = _point_class_on_curve(q, a), _point_class_on_curve(q, b)
        m[i][j] = max(m[i][j], 0)
    if a.kind == POLYLINE:
        for e in _odd_endpoints(a):
            cls = locate_point(e, b)
            m[_BND][cls] = max(m[_BND][cls], 0)
    if b.kind == POLYLINE:
        for e in _odd_endpoints(b):
            cls = locate_point(e, a)
            m[cls][_BND] = max(m[cls][_BND], 0)

    if a.kind == POLYGON and b.kind == POLYGON:
        overlap = (
            _INT in a_classes
            or _INT in b_classes
            or locate_point(_interior_point(a.coords), b) == _INT
            or locate_point(_interior_point(b.coords), a) == _INT
        )
        m[_INT][_INT] = 2 if overlap else _F
        m[_INT][_EXT] = 2 if _EXT in a_classes else _F
        m[_EXT][_INT] = 2 if _EXT in b_classes else _F
    elif a.kind == POLYGON:
        # b is a polyline: the polygon's open interior always survives
        # removal of a 1-dim curve
        m[_INT][_EXT] = 2
    return m


def de9im_matches(pattern: str, mask: str) -> bool:
    """OGC-style mask test: T = nonempty, F = empty, 0/1/2 exact, * any."""
    if len(mask) != 9 or any(c not in "TF012*" for c in mask):
        raise GeometryError(f"bad relate mask {mask!r}")
    for p, q in zip(pattern, mask):
        if q == "*":
            continue
        if q == "T":
            if p == "F":
                return False
        elif p != q:
            return False
    return True
