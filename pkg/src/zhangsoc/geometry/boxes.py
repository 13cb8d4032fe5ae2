"""Sound box-union overapproximation of the region recursion.

The exact region recursion can fragment badly at large iteration depth; for
certificates that only need an outer enclosure (attractor localization,
clearance from the singular facets at high order) a union of axis boxes V_n
with U_n inside V_n is enough: clearance of V_m certifies clearance of every
U_n, n >= m, by nestedness of the exact sets, and tiny V_m boxes pin the
attractor location exactly.

All box coordinates are exact rationals; only the merge heuristics use
floats (they may only enlarge the enclosure, never shrink it).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .. import exactla
from ..exactla import Vector
from .atlas import ContinuityAtlas
from .polytope import Constraint, Polytope
from .regions import Region

ZERO = Fraction(0)

Box = tuple[Vector, Vector]  # (lower corner, upper corner)


def _box_region(box: Box, n: int) -> Region:
    lo, hi = box
    cons = []
    verts_1d = []
    for k in range(n):
        e = tuple(Fraction(1 if j == k else 0) for j in range(n))
        cons.append(Constraint(tuple(-v for v in e), -lo[k], False))
        cons.append(Constraint(e, hi[k], False))
    poly = Polytope(n, cons)
    if n <= 2:
        import itertools

        corners = [
            tuple(box[bit][k] for k, bit in enumerate(bits))
            for bits in itertools.product((0, 1), repeat=n)
        ]
        poly._inject_geometry(sorted(set(corners)))
    return Region.full(poly)


def _boxes_overlap(a: Box, b: Box) -> bool:
    return all(al <= bh and bl <= ah for al, ah, bl, bh in zip(a[0], a[1], b[0], b[1]))


def _merge_boxes(a: Box, b: Box) -> Box:
    lo = tuple(min(x, y) for x, y in zip(a[0], b[0]))
    hi = tuple(max(x, y) for x, y in zip(a[1], b[1]))
    return (lo, hi)


def _box_distance_float(a: Box, b: Box) -> float:
    d = 0.0
    for al, ah, bl, bh in zip(a[0], a[1], b[0], b[1]):
        gap = max(float(bl) - float(ah), float(al) - float(bh), 0.0)
        d += gap * gap
    return d


def _box_volume_float(b: Box) -> float:
    v = 1.0
    for l, h in zip(b[0], b[1]):
        v *= max(float(h) - float(l), 0.0)
    return v


def _consolidate(boxes: list[Box], max_boxes: int) -> list[Box]:
    # drop boxes contained in another
    boxes = sorted(set(boxes))
    kept: list[Box] = []
    for b in boxes:
        inside = any(
            all(al <= bl and bh <= ah for al, ah, bl, bh in zip(a[0], a[1], b[0], b[1]))
            for a in kept
        )
        if not inside:
            kept = [
                a
                for a in kept
                if not all(
                    bl <= al and ah <= bh
                    for bl, bh, al, ah in zip(b[0], b[1], a[0], a[1])
                )
            ]
            kept.append(b)
    boxes = kept
    # enforce the budget by merging the pair wasting the least hull volume
    # (the enclosure may only grow, so this stays a sound overapproximation)
    while len(boxes) > max_boxes:
        best = None
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                hull = _merge_boxes(boxes[i], boxes[j])
                waste = _box_volume_float(hull) - max(
                    _box_volume_float(boxes[i]), _box_volume_float(boxes[j])
                )
                key = (waste, _box_distance_float(boxes[i], boxes[j]))
                if best is None or key < best[0]:
                    best = (key, i, j)
        _, i, j = best
        boxes[i] = _merge_boxes(boxes[i], boxes[j])
        boxes.pop(j)
        boxes = _consolidate_containment(boxes)
    return sorted(boxes)


def _consolidate_containment(boxes: list[Box]) -> list[Box]:
    kept: list[Box] = []
    for b in sorted(set(boxes)):
        if not any(
            all(al <= bl and bh <= ah for al, ah, bl, bh in zip(a[0], a[1], b[0], b[1]))
            for a in kept if a != b
        ):
            kept.append(b)
    return kept


@dataclass(frozen=True)
class BoxEnclosure:
    level: int
    boxes: tuple[Box, ...]

    def max_diameter(self) -> Fraction:
        best = ZERO
        for lo, hi in self.boxes:
            d = sum(h - l for l, h in zip(lo, hi))
            best = max(best, d)
        return best

    def contains_point(self, x: Vector) -> bool:
        return any(
            all(l <= v <= h for v, l, h in zip(x, lo, hi)) for lo, hi in self.boxes
        )


_DYADIC = 1 << 48


def _round_box_outward(box: Box) -> Box:
    """Round corners outward to the dyadic grid (sound: enclosure grows)."""
    lo = tuple(
        Fraction((v.numerator * _DYADIC) // v.denominator, _DYADIC) for v in box[0]
    )
    hi = tuple(
        Fraction(-((-v.numerator * _DYADIC) // v.denominator), _DYADIC) for v in box[1]
    )
    return (lo, hi)


def box_iteration(
    atlas: ContinuityAtlas, n: int, max_boxes: int = 48
) -> list[BoxEnclosure]:
    """Overapproximating enclosures V_0..V_n of the region recursion."""
    nn = atlas.lattice.N
    ec = atlas.params.ec
    cube: Box = (tuple([ZERO] * nn), tuple([ec] * nn))
    levels = [BoxEnclosure(level=0, boxes=(cube,))]
    current = [cube]
    piece_boxes = {}
    for piece in atlas.all_pieces():
        bb = piece.domain.bounding_box()
        piece_boxes[id(piece)] = bb
    for level in range(1, n + 1):
        images: list[Box] = []
        for box in current:
            region = _box_region(box, nn)
            for piece in atlas.all_pieces():
                bb = piece_boxes[id(piece)]
                disjoint = False
                for k in range(nn):
                    plo, phi = bb[k]
                    if (phi is not None and box[0][k] > phi) or (
                        plo is not None and box[1][k] < plo
                    ):
                        disjoint = True
                        break
                if disjoint:
                    continue
                inter = region.intersect_ambient_polytope(piece.domain)
                if not inter.is_solid():
                    continue
                verts = inter.closure().vertices()
                pts = [
                    exactla.vec_add(exactla.mat_vec(piece.linear, v), piece.offset)
                    for v in verts
                ]
                lo = tuple(min(p[k] for p in pts) for k in range(nn))
                hi = tuple(max(p[k] for p in pts) for k in range(nn))
                images.append(_round_box_outward((lo, hi)))
        current = _consolidate(images, max_boxes)
        levels.append(BoxEnclosure(level=level, boxes=tuple(current)))
    return levels


def boxes_clear_of_facets(enclosure: BoxEnclosure, facets) -> bool:
    """Exact disjointness of the closed boxes from every singular facet.

    This is stronger than interior clearance, hence a sound certificate for
    the exact sets underneath.
    """
    for lo, hi in enclosure.boxes:
        n = len(lo)
        region = _box_region((lo, hi), n)
        for f in facets:
            if not region.with_ambient_constraints(f.constraints).is_empty():
                return False
    return True


def verify_invariant_cycle(atlas: ContinuityAtlas, points: Sequence[Vector]) -> bool:
    """Exact check that a finite point set is invariant under every site map
    and clear of the singular facets (hence contained in every U_n)."""
    pts = [tuple(Fraction(v) for v in p) for p in points]
    facets = atlas.singular_facets()
    for p in pts:
        for f in facets:
            if all(c.satisfied_by(p, closed=True) for c in f.constraints):
                return False
    pointset = set(pts)
    preimages_cover = True
    for site in range(atlas.lattice.N):
        image = set()
        for p in pts:
            piece = atlas.find_piece(site, p)
            if piece is None:
                return False
            image.add(piece.apply(p))
        if image != pointset:
            preimages_cover = False
    return preimages_cover