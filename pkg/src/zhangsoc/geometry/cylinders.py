"""Exact enumeration of iterated continuity cylinders.

A depth-n cylinder is fixed by a driving word (i_0..i_{n-1}) and a piece
choice j_m for each step; its spatial part is the set of starting points
whose orbit follows exactly those pieces.  Only full-dimensional cells are
counted, matching the atlas convention; full-dimensionality is decided from
the closure, which for two-site lattices is propagated as an exact clipped
vertex set (fast).  Higher dimensions fall back to constraint arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .. import exactla
from ..exactla import Matrix, Vector
from .atlas import ContinuityAtlas
from .polytope import Constraint, Polytope, _affinely_spans, clip_vertices, from_vertices_2d


@dataclass
class CylinderLevel:
    """All nonempty cylinders at one depth, grouped by driving word."""

    depth: int
    count: int
    by_word: dict[tuple[int, ...], list]
    truncated: bool
    vertex_mode: bool


@dataclass
class _Node:
    word: tuple[int, ...]
    cell: object  # vertex tuple (vertex mode) or Polytope (constraint mode)
    linear: Matrix
    offset: Vector


def enumerate_cylinders(
    atlas: ContinuityAtlas, depth: int, word_budget: int = 200_000
) -> list[CylinderLevel]:
    """Levels 1..depth of the cylinder tree (level n has card(P^n) leaves)."""
    n = atlas.lattice.N
    vertex_mode = n == 2
    cube = atlas.cube()
    ident = exactla.identity(n)
    zero = tuple(Fraction(0) for _ in range(n))
    start_cell = cube.vertices() if vertex_mode else cube
    nodes = [_Node(word=(), cell=start_cell, linear=ident, offset=zero)]
    levels: list[CylinderLevel] = []
    truncated = False
    for level in range(1, depth + 1):
        nxt: list[_Node] = []
        for node in nodes:
            if truncated:
                break
            for site in range(n):
                for piece in atlas.pieces_for(site):
                    pulled = _pulled_domain(piece.domain, node.linear, node.offset)
                    if vertex_mode:
                        verts = clip_vertices(2, node.cell, pulled)
                        if not _affinely_spans(verts, 2):
                            continue
                        child_cell = tuple(verts)
                    else:
                        cell = node.cell.with_constraints(pulled)
                        if not cell.is_full_dim():
                            continue
                        child_cell = cell.pruned()
                    nxt.append(
                        _Node(
                            word=node.word + (site,),
                            cell=child_cell,
                            linear=exactla.mat_mul(piece.linear, node.linear),
                            offset=exactla.vec_add(
                                exactla.mat_vec(piece.linear, node.offset), piece.offset
                            ),
                        )
                    )
                    if len(nxt) > word_budget:
                        truncated = True
                        break
                if truncated:
                    break
        by_word: dict[tuple[int, ...], list] = {}
        for nd in nxt:
            by_word.setdefault(nd.word, []).append(nd.cell)
        levels.append(
            CylinderLevel(
                depth=level,
                count=len(nxt),
                by_word=by_word,
                truncated=truncated,
                vertex_mode=vertex_mode,
            )
        )
        nodes = nxt
        if truncated:
            break
    return levels


def _pulled_domain(domain: Polytope, linear: Matrix, offset: Vector):
    n = len(offset)
    out = []
    for c in domain.constraints:
        coeffs = tuple(
            sum(c.coeffs[i] * linear[i][j] for i in range(n)) for j in range(n)
        )
        bound = c.bound - exactla.dot(c.coeffs, offset)
        out.append(Constraint(coeffs, bound, c.strict))
    return out


def level_multiplicity(level: CylinderLevel) -> int:
    """Maximal number of same-word cylinder closures meeting at one point.

    Evaluated at cell vertices only: cells are sign-pure, so any point where
    several closures meet is a vertex of each of them.
    """
    best = 1
    for word, cells in level.by_word.items():
        if level.vertex_mode:
            closures = [from_vertices_2d(vs) for vs in cells]
            vertex_sets = list(cells)
        else:
            closures = [c.closure() for c in cells]
            vertex_sets = [c.vertices() for c in closures]
        boxes = []
        for vs in vertex_sets:
            fx = [tuple(float(c) for c in v) for v in vs]
            boxes.append(
                tuple(
                    (min(p[k] for p in fx) - 1e-9, max(p[k] for p in fx) + 1e-9)
                    for k in range(len(fx[0]))
                )
            )
        seen: set[tuple] = set()
        for idx, vs in enumerate(vertex_sets):
            for v in vs:
                if v in seen:
                    continue
                seen.add(v)
                fv = tuple(float(x) for x in v)
                count = 0
                for jdx, other in enumerate(closures):
                    b = boxes[jdx]
                    if any(not (lo <= x <= hi) for x, (lo, hi) in zip(fv, b)):
                        continue
                    if other.contains_point(v, closed=True):
                        count += 1
                best = max(best, count)
    return best
