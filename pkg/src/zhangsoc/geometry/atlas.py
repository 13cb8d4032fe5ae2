"""Continuity atlas: the exact piecewise-affine structure of the return maps.

For each excited site the stable cube splits into finitely many convex
polytope domains on which the return map is affine.  The builder refines the
cube breadth-first: starting from the excitation offset it repeatedly splits
each live branch by the preimages of the critical hyperplanes under the
accumulated affine map, branches on the set of overcritical sites, and closes
a branch when its image is stable.

Branch cells that are not full-dimensional are pruned: the toppling rule
assigns them avalanches of their own, but they are contained in the
singularity set and carry no continuity domain.  Strictness of the remaining
constraints follows the toppling rule exactly (a coordinate equal to the
critical energy is relaxed).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .. import exactla
from ..exactla import Matrix, Vector
from ..lattice import Lattice, ModelParams
from ..relaxation import step_matrix_for_pattern
from .polytope import Constraint, Polytope

ZERO = Fraction(0)

Signature = tuple[frozenset[int], ...]


@dataclass(frozen=True)
class AtlasPiece:
    """One continuity domain with its affine return map x -> linear x + offset."""

    site: int
    signature: Signature
    domain: Polytope
    linear: Matrix
    offset: Vector

    @property
    def duration(self) -> int:
        return len(self.signature)

    @property
    def size(self) -> int:
        return sum(len(c) for c in self.signature)

    def apply(self, x: Vector) -> Vector:
        return exactla.vec_add(exactla.mat_vec(self.linear, x), self.offset)


@dataclass(frozen=True)
class SingularFacet:
    """A maximal singular face: piece boundary on one separating hyperplane.

    hyperplane is (coeffs, bound) in sign-canonical form; constraints are the
    closed ambient constraints cutting the facet out of the hyperplane.
    """

    hyperplane: tuple[Vector, Fraction]
    constraints: tuple[Constraint, ...]


@dataclass(frozen=True)
class ContinuityAtlas:
    """Per-site continuity pieces of the return map family."""

    params: ModelParams
    lattice: Lattice
    pieces: tuple[tuple[AtlasPiece, ...], ...]
    complete: bool = True

    @property
    def total_pieces(self) -> int:
        return sum(len(p) for p in self.pieces)

    def pieces_for(self, site: int) -> tuple[AtlasPiece, ...]:
        return self.pieces[site]

    def all_pieces(self) -> Iterator[AtlasPiece]:
        for site_pieces in self.pieces:
            yield from site_pieces

    def cube(self) -> Polytope:
        return Polytope.cube(self.lattice.N, 0, self.params.ec)

    def signatures(self) -> frozenset[tuple[int, Signature]]:
        """Avalanche-type signature of the atlas (used by bifurcation scans)."""
        return frozenset((p.site, p.signature) for p in self.all_pieces())

    def _is_cube_hyperplane(self, coeffs: Vector, bound: Fraction) -> bool:
        nonzero = [k for k, c in enumerate(coeffs) if c != 0]
        if len(nonzero) != 1:
            return False
        k = nonzero[0]
        val = bound / coeffs[k]
        return val == 0 or val == self.params.ec

    def singular_hyperplanes(self) -> tuple[tuple[Vector, Fraction], ...]:
        """Separating hyperplanes between pieces, excluding the cube boundary."""
        seen: dict[tuple, tuple[Vector, Fraction]] = {}
        for piece in self.all_pieces():
            for c in piece.domain.constraints:
                n = c.normalized()
                coeffs, bound = n.coeffs, n.bound
                lead = next((v for v in coeffs if v != 0), None)
                if lead is None:
                    continue
                if lead < 0:
                    coeffs = tuple(-v for v in coeffs)
                    bound = -bound
                if self._is_cube_hyperplane(coeffs, bound):
                    continue
                seen.setdefault((coeffs, bound), (coeffs, bound))
        return tuple(seen[k] for k in sorted(seen))

    def singular_facets(self) -> tuple[SingularFacet, ...]:
        """Closed piece faces on the internal separating hyperplanes."""
        facets: dict[tuple, SingularFacet] = {}
        for piece in self.all_pieces():
            closed = piece.domain.closure()
            for c in piece.domain.constraints:
                n = c.normalized()
                coeffs, bound = n.coeffs, n.bound
                lead = next((v for v in coeffs if v != 0), None)
                if lead is None:
                    continue
                if lead < 0:
                    coeffs = tuple(-v for v in coeffs)
                    bound = -bound
                if self._is_cube_hyperplane(coeffs, bound):
                    continue
                eq_pair = (
                    Constraint(coeffs, bound, False),
                    Constraint(tuple(-v for v in coeffs), -bound, False),
                )
                face = closed.with_constraints(eq_pair)
                if face.is_empty():
                    continue
                facet = SingularFacet(
                    hyperplane=(coeffs, bound),
                    constraints=tuple(face.pruned().constraints),
                )
                key = (coeffs, bound, Polytope(face.dim, facet.constraints).canonical_key())
                facets.setdefault(key, facet)
        merged = _merge_collinear_facets(tuple(facets[k] for k in sorted(facets)))
        return merged

    def find_piece(self, site: int, x: Vector) -> AtlasPiece | None:
        """Piece whose domain contains x (theta-true membership)."""
        for piece in self.pieces[site]:
            if piece.domain.contains_point(tuple(x)):
                return piece
        return None


def _merge_collinear_facets(facets: tuple[SingularFacet, ...]) -> tuple[SingularFacet, ...]:
    """Adjacent pieces contribute the same face twice; keep distinct ones only."""
    out: list[SingularFacet] = []
    keys: set[tuple] = set()
    for f in facets:
        dim = len(f.hyperplane[0])
        key = (f.hyperplane, Polytope(dim, f.constraints).canonical_key())
        if key not in keys:
            keys.add(key)
            out.append(f)
    return tuple(out)


class AtlasBudgetExceeded(RuntimeError):
    """Raised only in strict mode; builders normally flag and return partial."""


def build_atlas(
    params: ModelParams,
    lattice: Lattice,
    tau_cap: int | None = None,
    piece_budget: int = 20000,
) -> ContinuityAtlas:
    """Construct the exact continuity atlas by breadth-first refinement."""
    n = lattice.N
    ec = params.ec
    cube = Polytope.cube(n, 0, ec)
    if tau_cap is None:
        from ..relaxation import compute_bounds

        tau_cap = max(1, int(compute_bounds(params, lattice).duration_bound) + 1)
    complete = True
    per_site: list[tuple[AtlasPiece, ...]] = []
    total = 0
    for site in range(n):
        offset0 = tuple(params.delta if k == site else ZERO for k in range(n))
        stack: list[tuple[Polytope, Matrix, Vector, Signature]] = [
            (cube, exactla.identity(n), offset0, ())
        ]
        found: list[AtlasPiece] = []
        while stack:
            poly, lin, off, sig = stack.pop()
            if len(sig) > tau_cap:
                complete = False
                continue
            cells = _split_by_overcriticality(poly, lin, off, ec)
            for cell, over in cells:
                if not over:
                    found.append(
                        AtlasPiece(
                            site=site,
                            signature=sig,
                            domain=cell.pruned(),
                            linear=lin,
                            offset=off,
                        )
                    )
                    total += 1
                    if total > piece_budget:
                        complete = False
                        stack.clear()
                        break
                else:
                    step = step_matrix_for_pattern(over, params, lattice)
                    stack.append(
                        (
                            cell,
                            exactla.mat_mul(step, lin),
                            exactla.mat_vec(step, off),
                            sig + (over,),
                        )
                    )
        found.sort(key=lambda p: (p.duration, p.signature and sorted(map(sorted, p.signature))))
        per_site.append(tuple(found))
    return ContinuityAtlas(
        params=params, lattice=lattice, pieces=tuple(per_site), complete=complete
    )


def _split_by_overcriticality(
    poly: Polytope, lin: Matrix, off: Vector, ec: Fraction
) -> list[tuple[Polytope, frozenset[int]]]:
    """Split a branch cell by the criticality of each image coordinate.

    Image coordinate k is (lin x + off)_k; it is overcritical on the strict
    side of its pulled-back hyperplane.  Only full-dimensional cells survive.
    """
    n = len(off)
    cells: list[tuple[Polytope, set[int]]] = [(poly, set())]
    for k in range(n):
        coeffs = tuple(lin[k])
        bound = ec - off[k]
        over_c = Constraint(tuple(-v for v in coeffs), -bound, True)
        under_c = Constraint(coeffs, bound, False)
        nxt: list[tuple[Polytope, set[int]]] = []
        for cell, over in cells:
            c_over = cell.with_constraint(over_c)
            c_under = cell.with_constraint(under_c)
            if c_over.is_full_dim():
                nxt.append((c_over.pruned(), over | {k}))
            if c_under.is_full_dim():
                nxt.append((c_under.pruned(), over))
        cells = nxt
    return [(cell, frozenset(over)) for cell, over in cells]
