"""Exact H-representation polytopes over Fraction.

A constraint is a halfspace a.x <= b or a.x < b.  Emptiness is decided by
Fourier-Motzkin elimination, which handles strict inequalities exactly (a
combined constraint is strict iff either parent is).  Vertex enumeration is
combinatorial and intended for low dimension.

Conventions used throughout the engine:

- the stable cube is closed, and a coordinate sitting exactly at the
  critical energy counts as relaxed; branch constraints therefore carry
  their strictness flags from the toppling rule;
- a polytope is "full-dimensional" when making every inequality strict
  leaves it nonempty; lower-dimensional branch cells are pruned by that
  test.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Iterable, Sequence

from .. import exactla
from ..exactla import Matrix, Vector

ZERO = Fraction(0)


@dataclass(frozen=True)
class Constraint:
    """Halfspace a.x <= b (strict=False) or a.x < b (strict=True)."""

    coeffs: Vector
    bound: Fraction
    strict: bool = False

    def normalized(self) -> "Constraint":
        """Scale by a positive rational so coefficients are primitive integers."""
        cached = self.__dict__.get("_norm")
        if cached is not None:
            return cached
        nums = [c.numerator for c in self.coeffs] + [self.bound.numerator]
        dens = [c.denominator for c in self.coeffs] + [self.bound.denominator]
        if all(n == 0 for n in nums[:-1]):
            # trivial constraint; normalize bound sign only
            b = self.bound
            if b != 0:
                b = Fraction(1) if b > 0 else Fraction(-1)
            out = Constraint(tuple(ZERO for _ in self.coeffs), b, self.strict)
        else:
            lcm = reduce(lambda a, b: a * b // gcd(a, b), dens, 1)
            ints = [n * (lcm // d) for n, d in zip(nums, dens)]
            g = reduce(gcd, (abs(v) for v in ints if v != 0), 0)
            scale = Fraction(lcm, g)
            out = Constraint(
                tuple(c * scale for c in self.coeffs), self.bound * scale, self.strict
            )
        object.__setattr__(out, "_norm", out)
        object.__setattr__(self, "_norm", out)
        return out

    def evaluate(self, point: Vector) -> Fraction:
        return exactla.dot(self.coeffs, point) - self.bound

    def satisfied_by(self, point: Vector, closed: bool = False) -> bool:
        v = self.evaluate(point)
        if self.strict and not closed:
            return v < 0
        return v <= 0

    def negation(self) -> "Constraint":
        """Complementary halfspace: not(a.x <= b) is -a.x < -b, and vice versa."""
        return Constraint(
            tuple(-c for c in self.coeffs), -self.bound, strict=not self.strict
        )

    def closed(self) -> "Constraint":
        return self if not self.strict else Constraint(self.coeffs, self.bound, False)

    def is_trivially_true(self) -> bool:
        if any(c != 0 for c in self.coeffs):
            return False
        return self.bound > 0 if self.strict else self.bound >= 0

    def is_trivially_false(self) -> bool:
        if any(c != 0 for c in self.coeffs):
            return False
        return self.bound <= 0 if self.strict else self.bound < 0

    def key(self) -> tuple:
        n = self.normalized()
        return (n.coeffs, n.bound, n.strict)


def make_constraint(coeffs: Sequence, bound, strict: bool = False) -> Constraint:
    return Constraint(
        tuple(Fraction(c) for c in coeffs), Fraction(bound), bool(strict)
    )


class Polytope:
    """Immutable exact polytope in dimension ``dim`` given by inequalities."""

    __slots__ = ("dim", "constraints", "_empty", "_fulldim", "_vertices", "_bounded")

    def __init__(self, dim: int, constraints: Iterable[Constraint] = ()):
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "constraints", _dedupe(list(constraints)))
        object.__setattr__(self, "_empty", None)
        object.__setattr__(self, "_fulldim", None)
        object.__setattr__(self, "_vertices", None)
        object.__setattr__(self, "_bounded", None)

    def __setattr__(self, *a):  # immutability guard (caches use object.__setattr__)
        raise AttributeError("Polytope is immutable")

    def __repr__(self):
        return f"Polytope(dim={self.dim}, m={len(self.constraints)})"

    # -- construction -----------------------------------------------------

    @staticmethod
    def cube(dim: int, low, high) -> "Polytope":
        lo, hi = Fraction(low), Fraction(high)
        cons = []
        for k in range(dim):
            e = tuple(Fraction(1 if j == k else 0) for j in range(dim))
            cons.append(Constraint(tuple(-c for c in e), -lo, False))
            cons.append(Constraint(e, hi, False))
        return Polytope(dim, cons)

    @staticmethod
    def universe(dim: int) -> "Polytope":
        return Polytope(dim, ())

    def with_constraint(self, constraint: Constraint) -> "Polytope":
        return Polytope(self.dim, list(self.constraints) + [constraint])

    def with_constraints(self, constraints: Iterable[Constraint]) -> "Polytope":
        return Polytope(self.dim, list(self.constraints) + list(constraints))

    def intersect(self, other: "Polytope") -> "Polytope":
        assert self.dim == other.dim
        return Polytope(self.dim, list(self.constraints) + list(other.constraints))

    def closure(self) -> "Polytope":
        return Polytope(self.dim, [c.closed() for c in self.constraints])

    def strict_interior(self) -> "Polytope":
        return Polytope(
            self.dim, [Constraint(c.coeffs, c.bound, True) for c in self.constraints]
        )

    # -- predicates --------------------------------------------------------

    def _closed_geometry(self):
        """(vertices of the closure, certified bounded) or None when the
        vertex route cannot decide (dimension > 2 or unbounded/uncertain)."""
        if self.dim > 2:
            return None
        if self.dim == 0:
            return ((tuple(),) if not _fm_empty(0, self.constraints) else tuple(), True)
        if self._vertices is not None and self._bounded:
            return (self._vertices, True)
        if not _recession_trivial(self.dim, self.constraints):
            return None
        object.__setattr__(self, "_bounded", True)
        return (self.vertices(), True)

    def _inject_geometry(self, vertices: Sequence[Vector]) -> "Polytope":
        """Install externally computed closure vertices (caller guarantees
        exactness and boundedness)."""
        object.__setattr__(self, "_vertices", tuple(sorted(vertices)))
        object.__setattr__(self, "_bounded", True)
        return self

    def is_empty(self) -> bool:
        if self._empty is None:
            geo = self._closed_geometry()
            if geo is not None:
                verts, _ = geo
                if not verts:
                    empty = True
                else:
                    empty = False
                    for c in self.constraints:
                        if c.strict and min(c.evaluate(v) for v in verts) >= 0:
                            empty = True
                            break
            else:
                empty = _fm_empty(self.dim, self.constraints)
            object.__setattr__(self, "_empty", empty)
        return self._empty

    def is_full_dim(self) -> bool:
        """Nonempty interior (relative to the ambient space of the polytope)."""
        if self._fulldim is None:
            geo = self._closed_geometry()
            if geo is not None:
                verts, _ = geo
                full = _affinely_spans(verts, self.dim)
            else:
                full = not self.strict_interior().is_empty()
            object.__setattr__(self, "_fulldim", full)
        return self._fulldim

    def contains_point(self, point: Vector, closed: bool = False) -> bool:
        return all(c.satisfied_by(point, closed=closed) for c in self.constraints)

    def is_closed_poly(self) -> bool:
        return not any(c.strict for c in self.constraints)

    def subset_of(self, other: "Polytope") -> bool:
        """Exact containment self <= other."""
        if self.is_empty():
            return True
        if self.is_closed_poly():
            geo = self._closed_geometry()
            if geo is not None:
                verts, _ = geo
                for c in other.constraints:
                    if c.strict:
                        if any(c.evaluate(v) >= 0 for v in verts):
                            return False
                    elif any(c.evaluate(v) > 0 for v in verts):
                        return False
                return True
        for c in other.constraints:
            if not self.with_constraint(c.negation()).is_empty():
                return False
        return True

    def intersects(self, other: "Polytope") -> bool:
        return not self.intersect(other).is_empty()

    # -- geometry ----------------------------------------------------------

    def pruned(self) -> "Polytope":
        """Remove redundant constraints (does not change the point set)."""
        if self.is_empty():
            return self
        kept = list(self.constraints)
        changed = True
        while changed:
            changed = False
            for i in range(len(kept) - 1, -1, -1):
                rest = kept[:i] + kept[i + 1 :]
                test = Polytope(self.dim, rest).with_constraint(kept[i].negation())
                if test.is_empty():
                    kept.pop(i)
                    changed = True
        p = Polytope(self.dim, kept)
        object.__setattr__(p, "_empty", False)
        return p

    def interval(self, axis: int) -> tuple[Fraction | None, Fraction | None]:
        """Exact projection bounds on one coordinate (None = unbounded)."""
        cons = _fm_project_to_axis(self.dim, self.constraints, axis)
        lo: Fraction | None = None
        hi: Fraction | None = None
        for c in cons:
            a = c.coeffs[0]
            if a > 0:
                val = c.bound / a
                hi = val if hi is None else min(hi, val)
            elif a < 0:
                val = c.bound / a
                lo = val if lo is None else max(lo, val)
        return lo, hi

    def bounding_box(self) -> list[tuple[Fraction | None, Fraction | None]]:
        return [self.interval(k) for k in range(self.dim)]

    def interior_point(self) -> Vector | None:
        """A rational point in the interior, or None when not full-dimensional."""
        geo = self._closed_geometry()
        if geo is not None:
            verts, _ = geo
            if not _affinely_spans(verts, self.dim):
                return None
            k = len(verts)
            return tuple(sum(v[i] for v in verts) / k for i in range(self.dim))
        cons = [Constraint(c.coeffs, c.bound, True) for c in self.constraints]
        point: list[Fraction] = []
        remaining = cons
        dim = self.dim
        if _fm_empty(dim, remaining):
            return None
        for axis in range(dim):
            proj = _fm_project_to_axis(dim - axis, remaining, 0)
            lo: Fraction | None = None
            hi: Fraction | None = None
            for c in proj:
                a = c.coeffs[0]
                if a > 0:
                    v = c.bound / a
                    hi = v if hi is None else min(hi, v)
                elif a < 0:
                    v = c.bound / a
                    lo = v if lo is None else max(lo, v)
            if lo is None and hi is None:
                val = ZERO
            elif lo is None:
                val = hi - 1
            elif hi is None:
                val = lo + 1
            else:
                val = (lo + hi) / 2
            point.append(val)
            remaining = _substitute_first(remaining, val)
        return tuple(point)

    def vertices(self) -> tuple[Vector, ...]:
        """Vertices of the closure (combinatorial enumeration; low dim only)."""
        if self._vertices is not None:
            return self._vertices
        closed = [c.closed() for c in self.constraints]
        out: list[Vector] = []
        seen: set[tuple] = set()
        n = self.dim
        if n == 0:
            verts = (tuple(),) if not self.is_empty() else tuple()
            object.__setattr__(self, "_vertices", verts)
            return verts
        for subset in itertools.combinations(range(len(closed)), n):
            a = tuple(closed[i].coeffs for i in subset)
            b = tuple(closed[i].bound for i in subset)
            sol = exactla.solve(a, b)
            if sol is None:
                continue
            if sol in seen:
                continue
            if all(c.satisfied_by(sol, closed=True) for c in closed):
                seen.add(sol)
                out.append(sol)
        verts = tuple(sorted(out))
        object.__setattr__(self, "_vertices", verts)
        return verts

    def canonical_key(self) -> tuple:
        """Hashable key identifying the constraint set after normalization."""
        return (self.dim, tuple(sorted(c.key() for c in self.constraints)))

    def equals(self, other: "Polytope") -> bool:
        """Set equality (mutual containment of closures plus strictness check)."""
        return self.subset_of(other) and other.subset_of(self)


def _affinely_spans(verts: Sequence[Vector], dim: int) -> bool:
    """Do the points affinely span R^dim?"""
    if len(verts) < dim + 1:
        return False
    base = verts[0]
    diffs = [tuple(v[i] - base[i] for i in range(dim)) for v in verts[1:]]
    if dim == 1:
        return any(d[0] != 0 for d in diffs)
    if dim == 2:
        for i in range(len(diffs)):
            for j in range(i + 1, len(diffs)):
                if diffs[i][0] * diffs[j][1] - diffs[i][1] * diffs[j][0] != 0:
                    return True
        return False
    return exactla.rank(tuple(diffs)) == dim


def _recession_trivial(dim: int, constraints: Sequence[Constraint]) -> bool:
    """Is the recession cone {d : a.d <= 0 for all closed constraints} = {0}?

    Exact test for dim <= 2 via candidate extreme rays (rotations of the
    constraint normals).
    """
    normals = [c.coeffs for c in constraints if any(v != 0 for v in c.coeffs)]
    if not normals:
        return dim == 0
    if dim == 1:
        return any(a[0] > 0 for a in normals) and any(a[0] < 0 for a in normals)
    candidates = []
    for a in normals:
        candidates.append((a[1], -a[0]))
        candidates.append((-a[1], a[0]))
    for r in candidates:
        if all(v == 0 for v in r):
            continue
        if all(a[0] * r[0] + a[1] * r[1] <= 0 for a in normals):
            return False
    return True


def convex_hull_2d(points: Sequence[Vector]) -> list[Vector]:
    """Exact 2D convex hull (monotone chain), counterclockwise order."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return list(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[Vector] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Vector] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def clip_vertices(
    dim: int, vertices: Sequence[Vector], constraints: Sequence[Constraint]
) -> list[Vector]:
    """Vertices of (closed hull of vertices) intersected with the closed
    constraints; exact polygon/interval clipping."""
    if dim == 1:
        vals = [v[0] for v in vertices]
        if not vals:
            return []
        lo, hi = min(vals), max(vals)
        for c in constraints:
            a, b = c.coeffs[0], c.bound
            if a > 0:
                hi = min(hi, b / a)
            elif a < 0:
                lo = max(lo, b / a)
            elif b < 0:
                return []
        if lo > hi:
            return []
        return [(lo,)] if lo == hi else [(lo,), (hi,)]
    poly = convex_hull_2d(vertices)
    for c in constraints:
        if not poly:
            return []
        a, bound = c.coeffs, c.bound
        if all(v == 0 for v in a):
            if bound < 0:
                return []
            continue
        m = len(poly)
        out: list[Vector] = []
        if m == 1:
            poly = poly if exactla.dot(a, poly[0]) <= bound else []
            continue
        if m == 2:
            p, q = poly
            fp = exactla.dot(a, p) - bound
            fq = exactla.dot(a, q) - bound
            if fp <= 0:
                out.append(p)
            if fq <= 0:
                out.append(q)
            if (fp < 0 < fq) or (fq < 0 < fp):
                t = fp / (fp - fq)
                out.append(tuple(pi + t * (qi - pi) for pi, qi in zip(p, q)))
        else:
            for i in range(m):
                p = poly[i]
                q = poly[(i + 1) % m]
                fp = exactla.dot(a, p) - bound
                fq = exactla.dot(a, q) - bound
                if fp <= 0:
                    out.append(p)
                    if fq > 0:
                        t = fp / (fp - fq)
                        out.append(tuple(pi + t * (qi - pi) for pi, qi in zip(p, q)))
                elif fq <= 0:
                    t = fp / (fp - fq)
                    out.append(tuple(pi + t * (qi - pi) for pi, qi in zip(p, q)))
        dedup = []
        for v in out:
            if v not in dedup:
                dedup.append(v)
        poly = convex_hull_2d(dedup) if len(dedup) > 2 else dedup
    return list(poly)


def from_vertices_2d(points: Sequence[Vector]) -> Polytope:
    """Minimal closed H-representation of the 2D convex hull of the points."""
    hull = convex_hull_2d(points)
    if not hull:
        return Polytope(2, [Constraint((Fraction(1), ZERO), Fraction(-1), False),
                            Constraint((Fraction(-1), ZERO), Fraction(-1), False)])
    if len(hull) == 1:
        (x, y) = hull[0]
        return Polytope(2, [
            Constraint((Fraction(1), ZERO), x, False),
            Constraint((Fraction(-1), ZERO), -x, False),
            Constraint((ZERO, Fraction(1)), y, False),
            Constraint((ZERO, Fraction(-1)), -y, False),
        ])
    if len(hull) == 2:
        (x1, y1), (x2, y2) = hull
        dx, dy = x2 - x1, y2 - y1
        # carrier line plus segment bounds
        n = (dy, -dx)
        c0 = n[0] * x1 + n[1] * y1
        lo = dx * x1 + dy * y1
        hi = dx * x2 + dy * y2
        return Polytope(2, [
            Constraint(n, c0, False),
            Constraint((-n[0], -n[1]), -c0, False),
            Constraint((dx, dy), hi, False),
            Constraint((-dx, -dy), -lo, False),
        ])
    cons = []
    m = len(hull)
    for i in range(m):
        (x1, y1) = hull[i]
        (x2, y2) = hull[(i + 1) % m]
        # outward normal for CCW orientation
        n = (y2 - y1, x1 - x2)
        b = n[0] * x1 + n[1] * y1
        cons.append(Constraint(n, b, False))
    p = Polytope(2, cons)
    p._inject_geometry(hull)
    object.__setattr__(p, "_empty", False)
    return p


# ---------------------------------------------------------------------------
# Fourier-Motzkin machinery
# ---------------------------------------------------------------------------


def _dedupe(cons: list[Constraint]) -> tuple[Constraint, ...]:
    best: dict[tuple, Constraint] = {}
    order: list[tuple] = []
    for c in cons:
        n = c.normalized()
        if n.is_trivially_true():
            continue
        k = n.coeffs
        prev = best.get(k)
        if prev is None:
            best[k] = n
            order.append(k)
        else:
            # same direction: keep the tighter bound; on ties strict wins
            if n.bound < prev.bound or (n.bound == prev.bound and n.strict):
                best[k] = n
    return tuple(best[k] for k in order)


def _eliminate(cons: list[Constraint], var: int) -> list[Constraint] | None:
    """One FM elimination step; returns None on detected infeasibility."""
    pos: list[Constraint] = []
    neg: list[Constraint] = []
    out: list[Constraint] = []
    for c in cons:
        a = c.coeffs[var]
        if a > 0:
            pos.append(c)
        elif a < 0:
            neg.append(c)
        else:
            out.append(_drop_var(c, var))
    for p in pos:
        ap = p.coeffs[var]
        for m in neg:
            am = m.coeffs[var]
            wp, wm = -am, ap
            coeffs = tuple(
                wp * cp + wm * cm
                for k, (cp, cm) in enumerate(zip(p.coeffs, m.coeffs))
                if k != var
            )
            bound = wp * p.bound + wm * m.bound
            c = Constraint(coeffs, bound, p.strict or m.strict).normalized()
            if c.is_trivially_false():
                return None
            if not c.is_trivially_true():
                out.append(c)
    deduped = list(_dedupe(out))
    for c in deduped:
        if c.is_trivially_false():
            return None
    return deduped


def _drop_var(c: Constraint, var: int) -> Constraint:
    return Constraint(
        tuple(v for k, v in enumerate(c.coeffs) if k != var), c.bound, c.strict
    )


def _fm_empty(dim: int, constraints: Sequence[Constraint]) -> bool:
    cons = list(constraints)
    for c in cons:
        if c.is_trivially_false():
            return True
    for _ in range(dim):
        if not cons:
            return False
        # eliminate the variable minimizing the pos*neg product
        best_var, best_cost = 0, None
        njobs = len(cons[0].coeffs)
        for v in range(njobs):
            p = sum(1 for c in cons if c.coeffs[v] > 0)
            m = sum(1 for c in cons if c.coeffs[v] < 0)
            cost = p * m - (p + m)
            if best_cost is None or cost < best_cost:
                best_var, best_cost = v, cost
        cons = _eliminate(cons, best_var)
        if cons is None:
            return True
    for c in cons:
        if c.is_trivially_false():
            return True
    return False


def _fm_project_to_axis(
    dim: int, constraints: Sequence[Constraint], axis: int
) -> list[Constraint]:
    """Project onto a single coordinate; result constraints have 1 variable."""
    # reorder so the kept axis is variable 0
    def reorder(c: Constraint) -> Constraint:
        coeffs = (c.coeffs[axis],) + tuple(
            v for k, v in enumerate(c.coeffs) if k != axis
        )
        return Constraint(coeffs, c.bound, c.strict)

    cons = [reorder(c) for c in constraints]
    for _ in range(dim - 1):
        nxt = _eliminate(cons, 1)
        if nxt is None:
            return [Constraint((Fraction(1),), Fraction(-1), False),
                    Constraint((Fraction(-1),), Fraction(-1), False)]  # empty marker
        cons = nxt
    return cons


def _substitute_first(cons: list[Constraint], value: Fraction) -> list[Constraint]:
    """Substitute x_0 = value and drop that variable."""
    out = []
    for c in cons:
        coeffs = c.coeffs[1:]
        bound = c.bound - c.coeffs[0] * value
        out.append(Constraint(coeffs, bound, c.strict))
    return out


# ---------------------------------------------------------------------------
# affine transforms
# ---------------------------------------------------------------------------


def pullback_constraint(c: Constraint, linear: Matrix, offset: Vector) -> Constraint:
    """Preimage halfspace of c under x -> linear x + offset."""
    coeffs = tuple(
        sum(c.coeffs[i] * linear[i][j] for i in range(len(offset)))
        for j in range(len(linear[0]))
    )
    bound = c.bound - exactla.dot(c.coeffs, offset)
    return Constraint(coeffs, bound, c.strict)


def pullback_polytope(p: Polytope, linear: Matrix, offset: Vector, domain_dim: int) -> Polytope:
    """Preimage polytope of p under x -> linear x + offset (x in R^domain_dim)."""
    return Polytope(domain_dim, [pullback_constraint(c, linear, offset) for c in p.constraints])


def transform_by_inverse(p: Polytope, inv: Matrix, offset: Vector) -> Polytope:
    """Image of p under an invertible map with the given inverse: y = L x + b,
    constraints become a.(inv (y - b)) <= bound."""
    cons = []
    n = p.dim
    for c in p.constraints:
        coeffs = tuple(
            sum(c.coeffs[i] * inv[i][j] for i in range(n)) for j in range(n)
        )
        shift = sum(
            c.coeffs[i] * sum(inv[i][j] * offset[j] for j in range(n)) for i in range(n)
        )
        cons.append(Constraint(coeffs, c.bound + shift, c.strict))
    return Polytope(n, cons)


def linear_image_polytope(p: Polytope, linear: Matrix) -> Polytope:
    """Image of p under a (possibly singular) linear map to R^rows(linear).

    Built by joining v = T u with the constraints on u and eliminating u.
    """
    rows = len(linear)
    cols = len(linear[0]) if rows else 0
    assert cols == p.dim
    # variables: (v_0..v_{rows-1}, u_0..u_{cols-1})
    cons: list[Constraint] = []
    for c in p.constraints:
        cons.append(Constraint(tuple([ZERO] * rows) + c.coeffs, c.bound, c.strict))
    eqs: list[tuple[Vector, Fraction]] = []
    for i in range(rows):
        coeffs = tuple(
            (Fraction(1) if j == i else ZERO) for j in range(rows)
        ) + tuple(-linear[i][j] for j in range(cols))
        eqs.append((coeffs, ZERO))
    cons2, eqs2 = substitute_equalities(cons, eqs, keep=rows)
    # eliminate any remaining u variables by FM
    current = cons2
    nvars = len(current[0].coeffs) if current else rows
    while nvars > rows:
        nxt = _eliminate(current, nvars - 1)
        if nxt is None:
            return Polytope(rows, [Constraint(tuple([ZERO] * rows), Fraction(-1), False)])
        current = nxt
        nvars -= 1
    out = Polytope(rows, current)
    for coeffs, val in eqs2:
        if any(v != 0 for v in coeffs[rows:]):
            raise AssertionError("equality with residual eliminated variable")
        lead = coeffs[:rows]
        out = out.with_constraints(
            [Constraint(lead, val, False), Constraint(tuple(-v for v in lead), -val, False)]
        )
    return out


def substitute_equalities(
    cons: list[Constraint], eqs: list[tuple[Vector, Fraction]], keep: int
) -> tuple[list[Constraint], list[tuple[Vector, Fraction]]]:
    """Use equalities to eliminate variables with index >= keep where possible.

    Returns rewritten inequalities and the residual equalities that involve
    only kept variables (or could not be used for elimination).
    """
    eqs = [(tuple(c), Fraction(v)) for c, v in eqs]
    cons = list(cons)
    residual: list[tuple[Vector, Fraction]] = []
    while eqs:
        coeffs, val = eqs.pop()
        pivot = None
        for j in range(len(coeffs) - 1, keep - 1, -1):
            if coeffs[j] != 0:
                pivot = j
                break
        if pivot is None:
            residual.append((coeffs, val))
            continue
        pc = coeffs[pivot]

        def subst_c(c: Constraint) -> Constraint:
            f = c.coeffs[pivot]
            if f == 0:
                new = tuple(v for k, v in enumerate(c.coeffs) if k != pivot)
                return Constraint(new, c.bound, c.strict)
            ratio = f / pc
            new = tuple(
                v - ratio * coeffs[k]
                for k, v in enumerate(c.coeffs)
                if k != pivot
            )
            return Constraint(new, c.bound - ratio * val, c.strict)

        def subst_e(e: tuple[Vector, Fraction]) -> tuple[Vector, Fraction]:
            ec, ev = e
            f = ec[pivot]
            if f == 0:
                return (tuple(v for k, v in enumerate(ec) if k != pivot), ev)
            ratio = f / pc
            return (
                tuple(v - ratio * coeffs[k] for k, v in enumerate(ec) if k != pivot),
                ev - ratio * val,
            )

        cons = [subst_c(c) for c in cons]
        eqs = [subst_e(e) for e in eqs]
        residual = [subst_e(e) for e in residual]
    return cons, residual
