"""Regions: exact polytopes carried on affine subspaces, and region sets.

Degenerate avalanche maps (rank-deficient linear parts) send full-dimensional
polytopes to lower-dimensional ones; a Region therefore pairs a polytope in
carrier coordinates with an affine embedding x = point + basis . u of the
carrier into the ambient space.  Full-dimensional regions use the identity
carrier (point=None).

Region sets represent finite unions of disjoint (up to lower-dimensional
overlap) regions; iteration under the avalanche maps keeps closures of the
open region recursion, splitting at singular hyperplanes so that connected
components of the open sets are recoverable exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .. import exactla
from ..exactla import Matrix, Vector
from .polytope import (
    Constraint,
    Polytope,
    clip_vertices,
    convex_hull_2d,
    from_vertices_2d,
    linear_image_polytope,
    pullback_constraint,
    transform_by_inverse,
)

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class Region:
    """Polytope on an affine carrier; ambient points are point + basis . u."""

    ambient: int
    point: Vector | None
    basis: tuple[Vector, ...] | None  # carrier basis columns (ambient vectors)
    poly: Polytope

    # -- constructors -------------------------------------------------------

    @staticmethod
    def full(poly: Polytope) -> "Region":
        return Region(ambient=poly.dim, point=None, basis=None, poly=poly)

    @staticmethod
    def single_point(point: Vector) -> "Region":
        return Region(
            ambient=len(point), point=tuple(point), basis=(), poly=Polytope(0, ())
        )

    @property
    def carrier_dim(self) -> int:
        return self.ambient if self.point is None else len(self.basis)

    def is_carried(self) -> bool:
        return self.point is not None

    # -- basic predicates ----------------------------------------------------

    def is_empty(self) -> bool:
        return self.poly.is_empty()

    def is_solid(self) -> bool:
        """Full-dimensional relative to its carrier."""
        return self.poly.is_full_dim() if self.carrier_dim > 0 else not self.is_empty()

    def closure(self) -> "Region":
        poly = self.poly.closure()
        if self.poly._vertices is not None and self.poly._bounded:
            poly._inject_geometry(self.poly._vertices)
        return Region(self.ambient, self.point, self.basis, poly)

    def contains_ambient_point(self, x: Vector, closed: bool = False) -> bool:
        if self.point is None:
            return self.poly.contains_point(x, closed=closed)
        u = self._carrier_coords(x)
        if u is None:
            return False
        return self.poly.contains_point(u, closed=closed)

    def _carrier_coords(self, x: Vector) -> Vector | None:
        """Solve x = point + basis.u exactly; None if x is off the carrier."""
        k = len(self.basis)
        rhs = exactla.vec_sub(tuple(x), self.point)
        if k == 0:
            return tuple() if all(v == 0 for v in rhs) else None
        rows = [
            tuple(self.basis[j][i] for j in range(k)) + (rhs[i],)
            for i in range(self.ambient)
        ]
        red, pivots = exactla.rref(tuple(rows))
        if len(pivots) > k or k in pivots:
            return None
        sol = [ZERO] * k
        for r, pc in enumerate(pivots):
            sol[pc] = red[r][k]
        # verify (handles inconsistent overdetermined systems)
        for i in range(self.ambient):
            if sum(self.basis[j][i] * sol[j] for j in range(k)) != rhs[i]:
                return None
        return tuple(sol)

    # -- constraint pullback --------------------------------------------------

    def pull_ambient_constraint(self, c: Constraint) -> Constraint:
        """Rewrite an ambient halfspace in carrier coordinates."""
        if self.point is None:
            return c
        coeffs = tuple(exactla.dot(c.coeffs, b) for b in self.basis)
        bound = c.bound - exactla.dot(c.coeffs, self.point)
        return Constraint(coeffs, bound, c.strict)

    def with_ambient_constraints(self, cons: Iterable[Constraint]) -> "Region":
        pulled = [self.pull_ambient_constraint(c) for c in cons]
        child_poly = self.poly.with_constraints(pulled)
        # propagate closure vertices by exact clipping when available
        if self.poly.dim <= 2 and self.poly._vertices is not None and self.poly._bounded:
            clipped = clip_vertices(self.poly.dim, self.poly._vertices, pulled)
            child_poly._inject_geometry(clipped)
        return Region(self.ambient, self.point, self.basis, child_poly)

    def intersect_ambient_polytope(self, p: Polytope) -> "Region":
        return self.with_ambient_constraints(p.constraints)

    # -- geometry --------------------------------------------------------------

    def vertices(self) -> tuple[Vector, ...]:
        vs = self.poly.vertices()
        if self.point is None:
            return vs
        out = []
        for u in vs:
            x = list(self.point)
            for j, b in enumerate(self.basis):
                for i in range(self.ambient):
                    x[i] += u[j] * b[i]
            out.append(tuple(x))
        return tuple(sorted(out))

    def interior_point_ambient(self) -> Vector | None:
        u = self.poly.interior_point() if self.carrier_dim else tuple()
        if u is None:
            return None
        if self.point is None:
            return u
        x = list(self.point)
        for j, b in enumerate(self.basis):
            for i in range(self.ambient):
                x[i] += u[j] * b[i]
        return tuple(x)

    def bounding_box_float(self) -> tuple[tuple[float, float], ...]:
        cached = getattr(self, "_bbox", None)
        if cached is not None:
            return cached
        if self.point is None and not (
            self.poly._vertices is not None and self.poly._bounded
        ):
            box = []
            for lo, hi in self.poly.bounding_box():
                box.append(
                    (float("-inf") if lo is None else float(lo) - 1e-12,
                     float("inf") if hi is None else float(hi) + 1e-12)
                )
            box = tuple(box)
        else:
            vs = self.vertices()
            if not vs:
                box = tuple((float("inf"), float("-inf")) for _ in range(self.ambient))
            else:
                box = tuple(
                    (min(float(v[i]) for v in vs) - 1e-12, max(float(v[i]) for v in vs) + 1e-12)
                    for i in range(self.ambient)
                )
        object.__setattr__(self, "_bbox", box)
        return box

    def canonical(self) -> "Region":
        """Canonicalize the carrier so equal carriers compare equal."""
        if self.point is None:
            return self
        k = len(self.basis)
        if k == 0:
            return self
        bt = tuple(tuple(b) for b in self.basis)  # rows = basis vectors
        red, pivots = exactla.rref(bt)
        newbasis = tuple(tuple(row) for row in red[: len(pivots)])
        # change of coordinates: old basis rows = C . new basis rows
        c_rows = []
        for b in bt:
            coords = tuple(b[p] for p in pivots)
            c_rows.append(coords)
        cmat = tuple(c_rows)  # k x k, invertible; u_new = C^T u_old
        ct = tuple(zip(*cmat))
        inv = exactla.invert(ct)
        poly2 = transform_by_inverse(self.poly, inv, tuple([ZERO] * k))
        # canonical point: zero out pivot coordinates
        p2 = list(self.point)
        for j, pc in enumerate(pivots):
            coef = p2[pc]
            if coef != 0:
                for i in range(self.ambient):
                    p2[i] -= coef * newbasis[j][i]
        return Region(self.ambient, tuple(p2), newbasis, poly2)

    def canonical_key(self) -> tuple:
        r = self.canonical()
        return (r.ambient, r.point, r.basis, r.poly.canonical_key())

    def carrier_key(self) -> tuple:
        r = self.canonical()
        return (r.point, r.basis)

    def compact(self) -> "Region":
        """Minimal representation of a closed region (hull reconstruction).

        Keeps the point set exactly; only applies to fully closed polytopes
        in carrier dimension <= 2 with computable vertices.
        """
        poly = self.poly
        if poly.dim == 0 or not poly.is_closed_poly():
            return self
        if poly.dim == 1:
            vs = poly.vertices()
            if not vs:
                return self
            lo = min(v[0] for v in vs)
            hi = max(v[0] for v in vs)
            newpoly = Polytope(1, [
                Constraint((Fraction(1),), hi, False),
                Constraint((Fraction(-1),), -lo, False),
            ])
            newpoly._inject_geometry(((lo,), (hi,)))
            object.__setattr__(newpoly, "_empty", False)
            return Region(self.ambient, self.point, self.basis, newpoly)
        if poly.dim == 2:
            geo = poly._closed_geometry()
            if geo is None or not geo[0]:
                return self
            return Region(self.ambient, self.point, self.basis, from_vertices_2d(geo[0]))
        return self


# ---------------------------------------------------------------------------
# affine images
# ---------------------------------------------------------------------------


def region_from_points(ambient: int, points: Sequence[Vector]) -> Region:
    """Closed convex hull of finitely many exact points, as a region."""
    pts = sorted(set(tuple(p) for p in points))
    if not pts:
        empty = Polytope(0, [Constraint((), Fraction(-1), False)])
        return Region(ambient, tuple([ZERO] * ambient), (), empty)
    if len(pts) == 1:
        return Region.single_point(pts[0])
    base = pts[0]
    diffs = [exactla.vec_sub(p, base) for p in pts[1:]]
    red, pivots = exactla.rref(tuple(diffs))
    rank = len(pivots)
    if rank == ambient and ambient == 2:
        return Region.full(from_vertices_2d(pts))
    if rank == 1:
        direction = tuple(red[0])
        pc = pivots[0]
        coords = [(p[pc] - base[pc]) / direction[pc] for p in pts]
        lo, hi = min(coords), max(coords)
        poly = Polytope(1, [
            Constraint((Fraction(1),), hi, False),
            Constraint((Fraction(-1),), -lo, False),
        ])
        poly._inject_geometry([(lo,), (hi,)])
        object.__setattr__(poly, "_empty", False)
        return Region(ambient, base, (direction,), poly)
    # general rank: carried region over the hull in carrier coordinates
    basis = tuple(tuple(row) for row in red[:rank])
    coords = []
    for p in pts:
        d = exactla.vec_sub(p, base)
        coords.append(tuple(d[pc] for pc in pivots))
    if rank == 2:
        poly = from_vertices_2d(coords)
        return Region(ambient, base, basis, poly)
    raise NotImplementedError("vertex-hull regions implemented for rank <= 2")


def affine_image(region: Region, linear: Matrix, offset: Vector) -> Region:
    """Exact image of a region under x -> linear x + offset."""
    n = region.ambient
    # closed regions with known vertices: the image is the hull of the
    # mapped vertices (exact for affine maps of closed polytopes)
    if (
        region.poly.is_closed_poly()
        and region.poly.dim <= 2
        and region.poly._vertices is not None
        and region.poly._bounded
    ):
        pts = [
            exactla.vec_add(exactla.mat_vec(linear, v), tuple(offset))
            for v in region.vertices()
        ]
        if pts:
            return region_from_points(n, pts)
    if region.point is None:
        inv = exactla.invert(linear)
        if inv is not None:
            return Region.full(transform_by_inverse(region.poly, inv, tuple(offset)))
        point = tuple(offset)
        emb = tuple(tuple(linear[i][j] for i in range(n)) for j in range(n))  # columns
        return _carried_image(region, point, emb)
    point = exactla.vec_add(exactla.mat_vec(linear, region.point), tuple(offset))
    emb = tuple(
        tuple(sum(linear[i][t] * b[t] for t in range(n)) for i in range(n))
        for b in region.basis
    )
    return _carried_image(region, point, emb)


def _fold_full(point: Vector, basis: tuple[Vector, ...], poly: Polytope) -> Region:
    """Rewrite a carried region whose carrier spans the ambient space."""
    n = len(point)
    bmat = tuple(tuple(basis[j][i] for j in range(n)) for i in range(n))
    inv = exactla.invert(bmat)
    # x = point + B u  =>  u = B^{-1}(x - point)
    cons = []
    for c in poly.constraints:
        coeffs = tuple(
            sum(c.coeffs[j] * inv[j][i] for j in range(n)) for i in range(n)
        )
        bound = c.bound + sum(
            c.coeffs[j] * sum(inv[j][i] * point[i] for i in range(n))
            for j in range(n)
        )
        cons.append(Constraint(coeffs, bound, c.strict))
    return Region.full(Polytope(n, cons))


def _carried_image(region: Region, point: Vector, emb_columns: tuple[Vector, ...]) -> Region:
    """Normalize the embedding u -> point + sum u_j emb_j to a thin basis."""
    k = len(emb_columns)
    n = region.ambient
    rows = tuple(tuple(col) for col in emb_columns)  # treat columns as rows for rref
    red, pivots = exactla.rref(rows) if k else ([], [])
    r = len(pivots)
    if r == 0:
        if region.poly.is_empty():
            return Region(n, point, (), Polytope(0, [Constraint((), Fraction(-1), False)]))
        return Region.single_point(point)
    newbasis = tuple(tuple(row) for row in red[:r])
    # coordinates of each embedding column in the new basis
    tmat_rows = []
    for col in emb_columns:
        tmat_rows.append(tuple(col[p] for p in pivots))
    # v = T u with T[i][j] = coordinate i of emb column j
    tmat = tuple(zip(*tmat_rows))
    poly2 = linear_image_polytope(region.poly, tuple(tuple(row) for row in tmat))
    if r == n:
        return _fold_full(point, newbasis, poly2)
    return Region(n, point, newbasis, poly2)


def image_region(piece, region: Region) -> Region:
    """Exact image of a region under one continuity piece's affine map.

    The region must lie inside the piece's domain (checked cheaply via the
    closed domain).
    """
    clos = piece.domain.closure()
    probe = region.interior_point_ambient()
    if probe is not None and not clos.contains_point(probe, closed=True):
        raise ValueError("region is not inside the piece domain")
    return affine_image(region, piece.linear, piece.offset)


# ---------------------------------------------------------------------------
# region-region operations
# ---------------------------------------------------------------------------


def region_intersection(r1: Region, r2: Region) -> Region | None:
    """Exact intersection as a region; None when provably empty."""
    if r1.point is None and r2.point is None:
        inter = r1.poly.intersect(r2.poly)
        if inter.is_empty():
            return None
        return Region.full(inter)
    if r1.point is None:
        return region_intersection(r2, r1)
    # r1 carried; pull r2 into r1 coordinates when r2 is full-dimensional
    if r2.point is None:
        out = r1.intersect_ambient_polytope(r2.poly)
        return None if out.is_empty() else out
    # both carried: joint system over (u, v)
    n = r1.ambient
    k1, k2 = len(r1.basis), len(r2.basis)
    rows = []
    rhs = exactla.vec_sub(r2.point, r1.point)
    for i in range(n):
        rows.append(
            tuple(r1.basis[j][i] for j in range(k1))
            + tuple(-r2.basis[j][i] for j in range(k2))
            + (rhs[i],)
        )
    red, pivots = exactla.rref(tuple(rows))
    if any(p == k1 + k2 for p in pivots):
        return None  # inconsistent: carriers do not meet
    q = [ZERO] * (k1 + k2)
    for r, pc in enumerate(pivots):
        q[pc] = red[r][k1 + k2]
    emat = tuple(tuple(row[:-1]) for row in rows)
    kern = exactla.kernel_basis(emat)
    t_dim = len(kern)
    cons: list[Constraint] = []
    for c in r1.poly.constraints:
        coeffs = tuple(
            sum(c.coeffs[j] * w[j] for j in range(k1)) for w in kern
        )
        bound = c.bound - sum(c.coeffs[j] * q[j] for j in range(k1))
        cons.append(Constraint(coeffs, bound, c.strict))
    for c in r2.poly.constraints:
        coeffs = tuple(
            sum(c.coeffs[j] * w[k1 + j] for j in range(k2)) for w in kern
        )
        bound = c.bound - sum(c.coeffs[j] * q[k1 + j] for j in range(k2))
        cons.append(Constraint(coeffs, bound, c.strict))
    poly = Polytope(t_dim, cons)
    if poly.is_empty():
        return None
    point = list(r1.point)
    for j in range(k1):
        if q[j] != 0:
            for i in range(n):
                point[i] += q[j] * r1.basis[j][i]
    emb = tuple(
        tuple(sum(r1.basis[j][i] * w[j] for j in range(k1)) for i in range(n))
        for w in kern
    )
    if t_dim == n:
        return _fold_full(tuple(point), emb, poly)
    return Region(n, tuple(point), emb, poly)


def regions_intersect(r1: Region, r2: Region) -> bool:
    b1, b2 = r1.bounding_box_float(), r2.bounding_box_float()
    for (lo1, hi1), (lo2, hi2) in zip(b1, b2):
        if hi1 < lo2 or hi2 < lo1:
            return False
    # closed full-dimensional pair with cached vertices: exact clipping
    if (
        r1.point is None
        and r2.point is None
        and r1.poly.is_closed_poly()
        and r2.poly.is_closed_poly()
        and r1.poly.dim <= 2
        and r1.poly._vertices is not None
        and r1.poly._bounded
    ):
        return bool(clip_vertices(r1.poly.dim, r1.poly._vertices, r2.poly.constraints))
    if r1.point is not None and r2.point is None:
        return regions_intersect(r2, r1)
    if (
        r2.point is not None
        and r1.point is None
        and r2.poly.is_closed_poly()
        and r2.poly._vertices is not None
        and r2.poly._bounded
    ):
        pulled = [r2.pull_ambient_constraint(c) for c in r1.poly.constraints]
        if r1.poly.is_closed_poly():
            return bool(clip_vertices(r2.poly.dim, r2.poly._vertices, pulled))
    return region_intersection(r1, r2) is not None


def region_subset(r1: Region, r2: Region) -> bool:
    """Exact containment r1 <= r2 (assumes r1's polytope spans its carrier)."""
    if r1.is_empty():
        return True
    if r2.point is None:
        if r1.point is None:
            return r1.poly.subset_of(r2.poly)
        for c in r2.poly.constraints:
            pulled = r1.pull_ambient_constraint(c)
            if not r1.poly.with_constraint(pulled.negation()).is_empty():
                return False
        return True
    if r1.point is None:
        return False  # full-dimensional set cannot fit in a carried one
    # carrier containment: basis vectors and the point offset lie in r2's span
    k2 = len(r2.basis)
    n = r1.ambient
    if k2 == 0:
        if any(a != b for a, b in zip(r1.point, r2.point)):
            return False
        return r1.carrier_dim == 0
    targets = list(r1.basis) + [exactla.vec_sub(r1.point, r2.point)]
    coords = []
    for t in targets:
        rows = tuple(
            tuple(r2.basis[j][i] for j in range(k2)) + (t[i],) for i in range(n)
        )
        red, pivots = exactla.rref(rows)
        if any(p == k2 for p in pivots):
            return False
        sol = [ZERO] * k2
        for r, pc in enumerate(pivots):
            sol[pc] = red[r][k2]
        if any(
            sum(r2.basis[j][i] * sol[j] for j in range(k2)) != t[i] for i in range(n)
        ):
            return False
        coords.append(tuple(sol))
    basis_coords, point_coords = coords[:-1], coords[-1]
    # map u1 -> u2 = point_coords + sum u1_j basis_coords_j; pull r2 constraints
    for c in r2.poly.constraints:
        coeffs = tuple(
            sum(c.coeffs[t] * bc[t] for t in range(k2)) for bc in basis_coords
        )
        bound = c.bound - sum(c.coeffs[t] * point_coords[t] for t in range(k2))
        pulled = Constraint(coeffs, bound, c.strict)
        if not r1.poly.with_constraint(pulled.negation()).is_empty():
            return False
    return True


# ---------------------------------------------------------------------------
# region sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionSet:
    """A finite union of regions, with explicit budget bookkeeping."""

    regions: tuple[Region, ...]
    budget_exceeded: bool = False

    def __len__(self) -> int:
        return len(self.regions)

    def is_empty(self) -> bool:
        return all(r.is_empty() for r in self.regions)

    def vertices(self) -> list[tuple[Vector, ...]]:
        return [r.vertices() for r in self.regions]


def refinement_cells(atlas) -> RegionSet:
    """The open continuity cells: the cube refined by every site's pieces."""
    cells: list[Polytope] = [atlas.cube()]
    for site in range(atlas.lattice.N):
        nxt = []
        for cell in cells:
            for piece in atlas.pieces_for(site):
                inter = cell.intersect(piece.domain)
                if inter.is_full_dim():
                    nxt.append(inter.pruned())
        cells = nxt
    return normalize_regions([Region.full(c) for c in cells])


def _split_at_hyperplanes(
    region: Region, hyperplanes, facets
) -> list[Region]:
    """Make a region sign-pure with respect to the singular hyperplanes.

    A region properly straddling a hyperplane is replaced by its two closed
    halves.  A region lying inside a singular hyperplane has the facets on
    that hyperplane subtracted (keeping closures of the complement parts).
    """
    out: list[Region] = []
    queue = [region]
    while queue:
        r = queue.pop()
        if r.is_empty():
            continue
        handled = False
        box = r.bounding_box_float()
        for coeffs, bound in hyperplanes:
            # interval arithmetic prefilter: can the hyperplane cut the box?
            lo = hi = 0.0
            for c, (bl, bh) in zip(coeffs, box):
                fc = float(c)
                if fc >= 0:
                    lo += fc * bl
                    hi += fc * bh
                else:
                    lo += fc * bh
                    hi += fc * bl
            fb = float(bound)
            if lo > fb + 1e-9 or hi < fb - 1e-9:
                continue
            less = Constraint(coeffs, bound, True)
            more = Constraint(tuple(-v for v in coeffs), -bound, True)
            pulled_less = r.pull_ambient_constraint(less) if r.is_carried() else less
            if r.is_carried() and all(v == 0 for v in pulled_less.coeffs):
                if pulled_less.bound == 0:
                    # carrier inside the hyperplane: subtract facets on it
                    parts = _subtract_facets_on_hyperplane(r, (coeffs, bound), facets)
                    if parts is not None:
                        queue.extend(parts)
                        handled = True
                        break
                continue
            side_less = r.with_ambient_constraints([less])
            side_more = r.with_ambient_constraints([more])
            if side_less.is_solid() and side_more.is_solid():
                queue.append(r.with_ambient_constraints([less.closed()]))
                queue.append(r.with_ambient_constraints([more.closed()]))
                handled = True
                break
        if not handled:
            out.append(r)
    return out


def _subtract_facets_on_hyperplane(region, hyperplane, facets):
    """region lies inside hyperplane; subtract the singular facets there.

    Returns replacement parts, or None when no facet on this hyperplane
    meets the region (caller keeps the region whole).
    """
    relevant = [f for f in facets if f.hyperplane == hyperplane]
    if not relevant:
        return None
    parts = [region]
    touched = False
    for f in relevant:
        inter_nonempty = not region.with_ambient_constraints(f.constraints).is_empty()
        if not inter_nonempty:
            continue
        touched = True
        nxt = []
        for part in parts:
            hit = part.with_ambient_constraints(f.constraints)
            if hit.is_empty():
                nxt.append(part)
                continue
            for c in f.constraints:
                pulled = part.pull_ambient_constraint(c.negation().closed())
                if all(v == 0 for v in pulled.coeffs):
                    continue
                piece = part.with_ambient_constraints([c.negation().closed()])
                if not piece.is_empty():
                    nxt.append(piece)
        parts = nxt
    if not touched:
        return None
    return parts


def step_regions(atlas, current: RegionSet, budget: int | None = None) -> RegionSet:
    """One application of the region recursion: closures of the piece images.

    Images are kept unsplit: a region straddling a singular hyperplane is
    meaningful (it is what the removability certificate must detect).
    """
    out: list[Region] = []
    for region in current.regions:
        rbox = region.bounding_box_float()
        for piece in atlas.all_pieces():
            dbox = _poly_bbox_float(piece.domain)
            if any(h1 < l2 or h2 < l1 for (l1, h1), (l2, h2) in zip(rbox, dbox)):
                continue
            sub = region.intersect_ambient_polytope(piece.domain)
            if not sub.is_solid():
                continue
            img = affine_image(sub.closure(), piece.linear, piece.offset)
            out.append(img.closure())
    rs = normalize_regions(out, budget=budget)
    if current.budget_exceeded:
        rs = RegionSet(regions=rs.regions, budget_exceeded=True)
    return rs


def split_at_singularities(atlas, rs: RegionSet) -> RegionSet:
    """Sign-purify a region set with respect to the singular hyperplanes.

    This does not change the closed union; it prepares exact connected
    component computation of the open set.
    """
    hyperplanes = atlas.singular_hyperplanes()
    facets = atlas.singular_facets()
    out: list[Region] = []
    for region in rs.regions:
        out.extend(_split_at_hyperplanes(region, hyperplanes, facets))
    return normalize_regions(out)


_poly_bbox_cache: dict[int, tuple] = {}


def _poly_bbox_float(poly: Polytope) -> tuple:
    key = id(poly)
    box = _poly_bbox_cache.get(key)
    if box is None:
        box = tuple(
            (float("-inf") if lo is None else float(lo) - 1e-12,
             float("inf") if hi is None else float(hi) + 1e-12)
            for lo, hi in poly.bounding_box()
        )
        _poly_bbox_cache[key] = box
    return box


def iterate_regions(atlas, n: int, region_budget: int | None = 4000) -> list[RegionSet]:
    """The nested region sets U_0..U_n of the image recursion (closures)."""
    sets = [refinement_cells(atlas)]
    for _ in range(n):
        sets.append(step_regions(atlas, sets[-1], budget=region_budget))
    return sets


def region_off_facets(region: Region | None, facets) -> bool:
    """Does the region contain a point avoiding every singular facet?"""
    if region is None or region.is_empty():
        return False
    if not facets:
        return True
    f = facets[0]
    rest = facets[1:]
    if region.with_ambient_constraints(f.constraints).is_empty():
        return region_off_facets(region, rest)
    coeffs, bound = f.hyperplane
    pieces = [
        region.with_ambient_constraints([Constraint(coeffs, bound, True)]),
        region.with_ambient_constraints(
            [Constraint(tuple(-v for v in coeffs), -bound, True)]
        ),
    ]
    eq_keys = {
        Constraint(coeffs, bound, False).key(),
        Constraint(tuple(-v for v in coeffs), -bound, False).key(),
    }
    on_plane = region.with_ambient_constraints(
        [Constraint(coeffs, bound, False),
         Constraint(tuple(-v for v in coeffs), -bound, False)]
    )
    for c in f.constraints:
        if c.key() in eq_keys:
            continue
        pieces.append(on_plane.with_ambient_constraints([c.negation()]))
    return any(region_off_facets(p, rest) for p in pieces)


def connected_components(
    rs: RegionSet, facets, atlas=None
) -> list[tuple[Region, ...]]:
    """Components of the open union: regions are adjacent when their closures
    share a point lying on no singular facet.

    Pass the atlas to sign-purify the regions first (required when the set
    comes from the unsplit image recursion)."""
    if atlas is not None:
        rs = split_at_singularities(atlas, rs)
    regions = list(rs.regions)
    n = len(regions)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    closures = [r.closure() for r in regions]
    boxes = [c.bounding_box_float() for c in closures]
    # spatial hash: touching boxes share a grid cell at any pitch, so a small
    # pitch works; oversized regions fall back to all-pairs testing
    import math as _math

    diams = sorted(
        max((hi - lo) for lo, hi in b) if b else 0.0 for b in boxes
    )
    pitch = max(diams[len(diams) // 2] if diams else 1e-6, 1e-9)
    buckets: dict[tuple, list[int]] = {}
    large: list[int] = []
    for i, b in enumerate(boxes):
        ranges = [
            range(int(_math.floor(lo / pitch)), int(_math.floor(hi / pitch)) + 1)
            for lo, hi in b
        ]
        cells = 1
        for rg in ranges:
            cells *= len(rg)
        if cells > 4096:
            large.append(i)
            continue
        def _fill(prefix, rest):
            if not rest:
                buckets.setdefault(tuple(prefix), []).append(i)
                return
            for v in rest[0]:
                _fill(prefix + [v], rest[1:])
        _fill([], ranges)
    candidate_pairs = set()
    for members in buckets.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                candidate_pairs.add((members[a], members[b]))
    for i in large:
        for j in range(n):
            if j != i:
                candidate_pairs.add((min(i, j), max(i, j)))
    facets = list(facets)
    hyperplanes = sorted({f.hyperplane for f in facets})
    for i, j in sorted(candidate_pairs):
        if find(i) == find(j):
            continue
        bi, bj = boxes[i], boxes[j]
        if any(h1 < l2 or h2 < l1 for (l1, h1), (l2, h2) in zip(bi, bj)):
            continue
        # fast route for closed full-dimensional pairs with cached vertices:
        # clip one against the other and see whether any singular hyperplane
        # can pass through the (tiny) intersection before doing exact work
        ri, rj = closures[i], closures[j]
        if (
            ri.point is None
            and rj.point is None
            and ri.poly._vertices is not None
            and ri.poly._bounded
            and ri.poly.is_closed_poly()
            and rj.poly.is_closed_poly()
        ):
            iverts = clip_vertices(ri.poly.dim, ri.poly._vertices, rj.poly.constraints)
            if not iverts:
                continue
            fv = [[float(c) for c in v] for v in iverts]
            suspicious = False
            for coeffs, bound in hyperplanes:
                vals = [
                    sum(float(c) * x for c, x in zip(coeffs, v)) - float(bound)
                    for v in fv
                ]
                if min(vals) < 1e-9 and max(vals) > -1e-9:
                    suspicious = True
                    break
            if not suspicious:
                union(i, j)
                continue
        if not regions_intersect(ri, rj):
            continue
        inter = region_intersection(ri, rj)
        if inter is None:
            continue
        if region_off_facets(inter, facets):
            union(i, j)
    groups: dict[int, list[Region]] = {}
    for i, r in enumerate(regions):
        groups.setdefault(find(i), []).append(r)
    comps = [tuple(sorted(g, key=lambda r: r.canonical_key())) for g in groups.values()]
    comps.sort(key=lambda g: g[0].canonical_key())
    return comps


def _closed_region_subset(r1: Region, r2: Region) -> bool:
    """Containment between closed regions, via vertices when available."""
    if r1.poly.is_closed_poly() and r1.poly.dim <= 2:
        geo = r1.poly._closed_geometry()
        if geo is not None:
            return all(
                r2.contains_ambient_point(v, closed=True) for v in r1.vertices()
            )
    return region_subset(r1, r2)


def normalize_regions(regions: Sequence[Region], budget: int | None = None) -> RegionSet:
    """Drop empty/duplicate regions, absorb contained ones, sort canonically."""
    kept: list[Region] = []
    seen: set[tuple] = set()
    for r in regions:
        if r.is_empty():
            continue
        r = r.compact()
        key = r.canonical_key()
        if key in seen:
            continue
        seen.add(key)
        kept.append(r)
    # absorb regions contained in another (containment is exact); on mutual
    # containment the earlier one in canonical order survives
    kept.sort(key=lambda r: (-r.carrier_dim, r.canonical_key()))
    result: list[Region] = []
    for idx, r in enumerate(kept):
        absorbed = False
        for jdx, other in enumerate(kept):
            if jdx == idx or other.carrier_dim < r.carrier_dim:
                continue
            box_inside = all(
                lo2 <= lo1 and hi1 <= hi2
                for (lo1, hi1), (lo2, hi2) in zip(
                    r.bounding_box_float(), other.bounding_box_float()
                )
            )
            if not box_inside or not _closed_region_subset(r, other):
                continue
            if _closed_region_subset(other, r) and jdx > idx:
                continue  # mutual; this one wins by order
            absorbed = True
            break
        if not absorbed:
            result.append(r)
    exceeded = False
    if budget is not None and len(result) > budget:
        result = result[:budget]
        exceeded = True
    result.sort(key=lambda r: r.canonical_key())
    return RegionSet(regions=tuple(result), budget_exceeded=exceeded)
