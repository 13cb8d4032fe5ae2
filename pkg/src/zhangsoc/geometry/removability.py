"""Removability certificates for the singularity set.

Removable: after finitely many image iterations the region set stays clear of
every singular facet; certified by exact emptiness of relative-interior
intersections.  Non-removable: witnessed by a finite orbit of polytope germs
that returns to its base point, straddles a singular hyperplane on the way
with nonempty interior on both sides, and reproduces a cone containing the
initial one, so the straddling recurs at every order.  The witness machinery
works in direction space with exact polygon germs (two-site lattices).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .. import exactla
from ..exactla import Vector
from .atlas import AtlasPiece, ContinuityAtlas, SingularFacet
from .polytope import Constraint, Polytope
from .regions import (
    Region,
    RegionSet,
    iterate_regions,
    refinement_cells,
    region_off_facets,
    step_regions,
)

ZERO = Fraction(0)


@dataclass(frozen=True)
class GermStep:
    """One step of a germ orbit: the point, germ directions at it, the site
    applied next and the singular hyperplanes the germ straddles there."""

    point: Vector
    directions: tuple[Vector, ...]
    site: int | None
    straddled: tuple[tuple[Vector, Fraction], ...]


@dataclass(frozen=True)
class NonRemovableWitness:
    """Exact certificate of an essential singularity."""

    base_point: Vector
    steps: tuple[GermStep, ...]
    final_directions: tuple[Vector, ...]
    cone_contains_initial: bool

    @property
    def orbit(self) -> tuple[Vector, ...]:
        return tuple(s.point for s in self.steps) + (self.base_point,)


@dataclass(frozen=True)
class RemovabilityResult:
    status: str  # 'removable' | 'nonremovable' | 'inconclusive'
    order: int | None = None
    witness: NonRemovableWitness | None = None
    regions: RegionSet | None = None
    checked_up_to: int | None = None


# ---------------------------------------------------------------------------
# removable direction: clearance of the iterated regions
# ---------------------------------------------------------------------------


def _region_clear_of_facets(region: Region, facets: Sequence[SingularFacet]) -> bool:
    """Relative interior of the region misses every singular facet."""
    if region.carrier_dim == 0:
        pt = region.point
        for f in facets:
            if all(c.satisfied_by(pt, closed=True) for c in f.constraints):
                return False
        return True
    poly = region.poly
    vertex_route = (
        poly.is_closed_poly()
        and poly.dim <= 2
        and poly._closed_geometry() is not None
        and poly._vertices
        and poly.is_full_dim()  # minimal H-form: every constraint is a face
    )
    if vertex_route:
        # region is in minimal closed H-form: every constraint is a face, so
        # a convex subset avoids the relative interior iff it sits inside one
        # face hyperplane
        box = region.bounding_box_float()
        for f in facets:
            coeffs, bound = f.hyperplane
            lo = hi = 0.0
            for c, (bl, bh) in zip(coeffs, box):
                fc = float(c)
                lo += fc * (bl if fc >= 0 else bh)
                hi += fc * (bh if fc >= 0 else bl)
            fb = float(bound)
            if lo > fb + 1e-9 or hi < fb - 1e-9:
                continue
            inter = region.with_ambient_constraints(f.constraints)
            ipoly = inter.poly
            if ipoly._vertices is None:
                if not inter.is_empty():
                    return False
                continue
            iverts = ipoly._vertices
            if not iverts:
                continue
            inside_face = False
            for c in poly.constraints:
                if all(c.evaluate(v) == 0 for v in iverts):
                    inside_face = True
                    break
            if not inside_face:
                return False
        return True
    interior = Region(
        region.ambient, region.point, region.basis, region.poly.strict_interior()
    )
    for f in facets:
        if not interior.with_ambient_constraints(f.constraints).is_empty():
            return False
    return True


def regions_clear(regions: RegionSet, facets: Sequence[SingularFacet]) -> bool:
    return all(_region_clear_of_facets(r, facets) for r in regions.regions)


def removability_certificate(
    atlas: ContinuityAtlas,
    max_n: int = 25,
    region_budget: int | None = 4000,
    witness_depth: int | None = None,
    witness_budget: int = 4000,
) -> RemovabilityResult:
    """Decide removability within a finite budget.

    The witness search runs first (it is cheap and conclusive when it
    succeeds); then the region recursion is iterated up to max_n looking for
    exact clearance from the singular facets.  Both failing yields
    Inconclusive, an allowed outcome.
    """
    facets = atlas.singular_facets()
    if witness_depth is None:
        witness_depth = min(max_n, 12)
    witness = search_nonremovable_witness(
        atlas, depth=witness_depth, budget=witness_budget
    )
    if witness is not None:
        return RemovabilityResult(status="nonremovable", witness=witness)
    current = refinement_cells(atlas)
    for m in range(1, max_n + 1):
        current = step_regions(atlas, current, budget=region_budget)
        if current.budget_exceeded:
            return RemovabilityResult(status="inconclusive", checked_up_to=m)
        if regions_clear(current, facets):
            return RemovabilityResult(status="removable", order=m, regions=current)
    return RemovabilityResult(status="inconclusive", checked_up_to=max_n)


# ---------------------------------------------------------------------------
# non-removable direction: exact germ orbits (N = 2)
# ---------------------------------------------------------------------------


def _clip_polygon(dirs: Sequence[Vector], normal: Vector) -> tuple[Vector, ...]:
    """Clip the polygon with vertex list (0, d1..dk) by {d : normal.d <= 0}.

    Returns the non-origin vertices of the clipped polygon in order.
    """
    verts: list[Vector] = [(ZERO, ZERO)] + [tuple(d) for d in dirs]
    out: list[Vector] = []
    m = len(verts)
    for i in range(m):
        a = verts[i]
        b = verts[(i + 1) % m]
        fa = exactla.dot(normal, a)
        fb = exactla.dot(normal, b)
        if fa <= 0:
            out.append(a)
            if fb > 0:
                t = fa / (fa - fb)
                out.append(tuple(ai + t * (bi - ai) for ai, bi in zip(a, b)))
        elif fb <= 0:
            t = fa / (fa - fb)
            out.append(tuple(ai + t * (bi - ai) for ai, bi in zip(a, b)))
    dedup: list[Vector] = []
    for v in out:
        if not dedup or v != dedup[-1]:
            dedup.append(v)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    return tuple(v for v in dedup if any(c != 0 for c in v))


def _polygon_has_area(dirs: Sequence[Vector]) -> bool:
    verts = [(ZERO, ZERO)] + [tuple(d) for d in dirs]
    area = ZERO
    for i in range(len(verts)):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % len(verts)]
        area += x1 * y2 - x2 * y1
    return area != 0


def _normalize_dir(d: Vector) -> Vector:
    from math import gcd

    nums = [c.numerator for c in d]
    dens = [c.denominator for c in d]
    lcm = 1
    for q in dens:
        lcm = lcm * q // gcd(lcm, q)
    ints = [n * (lcm // q) for n, q in zip(nums, dens)]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    return tuple(Fraction(v, g) for v in ints)


def _cone_contains(dirs: Sequence[Vector], v: Vector) -> bool:
    """Is v in the convex cone spanned by dirs (2D, exact)?"""
    for i in range(len(dirs)):
        for j in range(len(dirs)):
            if i == j:
                continue
            d1, d2 = dirs[i], dirs[j]
            det = d1[0] * d2[1] - d1[1] * d2[0]
            if det == 0:
                continue
            alpha = (v[0] * d2[1] - v[1] * d2[0]) / det
            beta = (d1[0] * v[1] - d1[1] * v[0]) / det
            if alpha >= 0 and beta >= 0:
                return True
    for d in dirs:
        cross = d[0] * v[1] - d[1] * v[0]
        if cross == 0 and exactla.dot(d, v) > 0:
            return True
    return False


def _germ_pieces(
    atlas: ContinuityAtlas, site: int, point: Vector, dirs: tuple[Vector, ...]
):
    """Split a germ across the continuity pieces of one site at a point."""
    out = []
    for piece in atlas.pieces_for(site):
        clipped = list(dirs)
        ok = True
        for c in piece.domain.constraints:
            v = c.evaluate(point)
            if v > 0:
                ok = False
                break
            if v == 0:
                clipped = list(_clip_polygon(clipped, c.coeffs))
                if len(clipped) < 2 or not _polygon_has_area(clipped):
                    ok = False
                    break
        if ok and clipped:
            out.append((piece, tuple(clipped)))
    return out


def _straddled_hyperplanes(
    facets: Sequence[SingularFacet], point: Vector, dirs: Sequence[Vector]
) -> tuple[tuple[Vector, Fraction], ...]:
    hits = []
    for f in facets:
        coeffs, bound = f.hyperplane
        if exactla.dot(coeffs, point) != bound:
            continue
        if not all(c.satisfied_by(point, closed=True) for c in f.constraints):
            continue
        vals = [exactla.dot(coeffs, d) for d in dirs]
        if any(v > 0 for v in vals) and any(v < 0 for v in vals):
            hits.append((coeffs, bound))
    seen = []
    for h in hits:
        if h not in seen:
            seen.append(h)
    return tuple(seen)


def _candidate_points(atlas: ContinuityAtlas) -> list[Vector]:
    pts: list[Vector] = []
    seen = set()
    for f in atlas.singular_facets():
        face = Polytope(atlas.lattice.N, f.constraints)
        for v in face.vertices():
            if v not in seen:
                seen.add(v)
                pts.append(v)
    return pts


def _initial_germs(atlas: ContinuityAtlas, point: Vector) -> list[tuple[Vector, ...]]:
    cube = atlas.cube()
    germs = []
    one = Fraction(1)
    for sx in (one, -one):
        for sy in (one, -one):
            dirs: tuple[Vector, ...] = ((sx, ZERO), (sx, sy), (ZERO, sy))
            clipped = list(dirs)
            ok = True
            for c in cube.constraints:
                v = c.evaluate(point)
                if v > 0:
                    ok = False
                    break
                if v == 0:
                    clipped = list(_clip_polygon(clipped, c.coeffs))
                    if len(clipped) < 2 or not _polygon_has_area(clipped):
                        ok = False
                        break
            if ok:
                germs.append(tuple(clipped))
    return germs


def search_nonremovable_witnesses(
    atlas: ContinuityAtlas, depth: int = 12, budget: int = 4000
) -> list[NonRemovableWitness]:
    """Breadth-first search for exact essential-singularity witnesses.

    Returns every witness found at the smallest succeeding depth (there may
    be several germ orbits of the same length through one periodic point).
    """
    if atlas.lattice.N != 2:
        return []
    facets = atlas.singular_facets()
    expansions = 0
    found: list[NonRemovableWitness] = []
    for start in _candidate_points(atlas):
        for germ0 in _initial_germs(atlas, start):
            frontier = [(start, germ0, [], False)]
            visited = set()
            for _ in range(depth):
                nxt = []
                level_hits: list[NonRemovableWitness] = []
                for point, dirs, steps, straddled_any in frontier:
                    expansions += 1
                    if expansions > budget:
                        return found
                    straddle_here = _straddled_hyperplanes(facets, point, dirs)
                    for site in range(2):
                        for piece, clipped in _germ_pieces(atlas, site, point, dirs):
                            new_point = piece.apply(point)
                            new_dirs = tuple(
                                exactla.mat_vec(piece.linear, d) for d in clipped
                            )
                            if not _polygon_has_area(new_dirs):
                                continue
                            record = GermStep(
                                point=point,
                                directions=clipped,
                                site=site,
                                straddled=straddle_here,
                            )
                            new_steps = steps + [record]
                            new_straddled = straddled_any or bool(straddle_here)
                            if new_point == start and new_straddled:
                                if all(
                                    _cone_contains(new_dirs, v) for v in germ0
                                ):
                                    level_hits.append(
                                        NonRemovableWitness(
                                            base_point=start,
                                            steps=tuple(new_steps),
                                            final_directions=new_dirs,
                                            cone_contains_initial=True,
                                        )
                                    )
                                    continue
                            key = (
                                new_point,
                                tuple(sorted(_normalize_dir(d) for d in new_dirs)),
                            )
                            if key in visited:
                                continue
                            visited.add(key)
                            nxt.append((new_point, new_dirs, new_steps, new_straddled))
                if level_hits:
                    found.extend(level_hits)
                    break
                frontier = nxt
                if not frontier:
                    break
    return found


def search_nonremovable_witness(
    atlas: ContinuityAtlas, depth: int = 12, budget: int = 4000
) -> NonRemovableWitness | None:
    hits = search_nonremovable_witnesses(atlas, depth=depth, budget=budget)
    return hits[0] if hits else None
