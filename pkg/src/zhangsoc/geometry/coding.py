"""Topological Markov coding of the dynamics over certified region sets.

States are pairs (excited site, spatial component): component closures are
the X_k of the coding partition; the entry for (i,k) -> (j,l) is 1 exactly
when the image of component k under the site-i return map meets component l.
When every component maps wholly into a single component (the certified
removable situation) every row carries exactly N ones, the spectral radius is
the site count N exactly, and the maximal-entropy chain (the Parry measure)
is computed over the rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .. import exactla
from .atlas import ContinuityAtlas
from .regions import (
    Region,
    RegionSet,
    affine_image,
    connected_components,
    regions_intersect,
)

ZERO = Fraction(0)


@dataclass(frozen=True)
class TransitionMatrix:
    """0/1 transition structure of the symbolic coding."""

    size: int
    entries: tuple[tuple[int, ...], ...]
    labels: tuple[tuple[int, int], ...]  # (site, component index), site-major
    component_count: int
    coding_valid: bool
    transitive: bool
    spectral_radius: float
    radius_exact: int | None
    parry: tuple[Fraction, ...] | None
    state_sizes: tuple[int, ...]
    state_durations: tuple[int, ...]
    warnings: tuple[str, ...] = ()

    def state_index(self, site: int, comp: int) -> int:
        return site * self.component_count + comp

    def row_sums(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.entries)


def _strongly_connected(entries: Sequence[Sequence[int]]) -> bool:
    n = len(entries)
    if n == 0:
        return False

    def reach(adj) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for w in range(n):
                if adj[v][w] and w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == n

    rev = [[entries[j][i] for j in range(n)] for i in range(n)]
    return reach(entries) and reach(rev)


def markov_coding(
    atlas: ContinuityAtlas,
    regions: RegionSet,
    components: list[tuple[Region, ...]] | None = None,
    restrict_to_recurrent: bool = True,
) -> TransitionMatrix:
    """Build the coding matrix over the components of a certified region set.

    The iterated region set generally contains transient components that the
    dynamics leaves forever; the coding partition crosses components with the
    attractor, so by default the chain is restricted to the recurrent part
    (components inside closed communicating classes of the component map).
    """
    n_sites = atlas.lattice.N
    facets = atlas.singular_facets()
    if components is None:
        components = connected_components(regions, facets, atlas=atlas)
    if restrict_to_recurrent and len(components) > 1:
        components = _recurrent_components(atlas, components)
    s = len(components)
    comp_closures = [tuple(r.closure() for r in comp) for comp in components]

    # locate the unique piece holding each component, per site
    piece_of: list[list] = [[None] * s for _ in range(n_sites)]
    warnings: list[str] = []
    for k, comp in enumerate(components):
        probe = None
        for r in comp:
            probe = r.interior_point_ambient()
            if probe is not None:
                break
        if probe is None:
            probe = comp[0].vertices()[0]
        for i in range(n_sites):
            piece = atlas.find_piece(i, probe)
            if piece is None:
                warnings.append(f"component {k} has no piece for site {i}")
            piece_of[i][k] = piece

    def _union_box(regs):
        boxes = [r.bounding_box_float() for r in regs]
        nn = len(boxes[0])
        return tuple(
            (min(b[k][0] for b in boxes), max(b[k][1] for b in boxes))
            for k in range(nn)
        )

    comp_boxes = [_union_box(c) for c in comp_closures]
    size = n_sites * s
    entries = [[0] * size for _ in range(size)]
    coding_valid = True
    for i in range(n_sites):
        for k in range(s):
            piece = piece_of[i][k]
            if piece is None:
                coding_valid = False
                continue
            images = [
                affine_image(r, piece.linear, piece.offset) for r in comp_closures[k]
            ]
            ibox = _union_box(images)
            targets = []
            for l in range(s):
                tbox = comp_boxes[l]
                if any(h1 < l2 or h2 < l1 for (l1, h1), (l2, h2) in zip(ibox, tbox)):
                    continue
                hit = any(
                    regions_intersect(img, tgt)
                    for img in images
                    for tgt in comp_closures[l]
                )
                if hit:
                    targets.append(l)
            if len(targets) != 1:
                coding_valid = False
            row = i * s + k
            for l in targets:
                for j in range(n_sites):
                    entries[row][j * s + l] = 1

    ent = tuple(tuple(row) for row in entries)
    transitive = _strongly_connected(ent)
    radius_exact: int | None = None
    parry: tuple[Fraction, ...] | None = None
    if coding_valid and all(sum(row) == n_sites for row in ent):
        radius_exact = n_sites
        spectral_radius = float(n_sites)
        parry = _parry_distribution(ent, n_sites)
        if parry is None:
            warnings.append("left Perron eigenvector is not one-dimensional")
    else:
        arr = np.array(ent, dtype=float)
        spectral_radius = float(np.max(np.abs(np.linalg.eigvals(arr)))) if size else 0.0
        warnings.append("coding not certified valid; Parry data omitted")

    sizes = []
    durations = []
    for i in range(n_sites):
        for k in range(s):
            piece = piece_of[i][k]
            sizes.append(piece.size if piece is not None else -1)
            durations.append(piece.duration if piece is not None else -1)

    return TransitionMatrix(
        size=size,
        entries=ent,
        labels=tuple((i, k) for i in range(n_sites) for k in range(s)),
        component_count=s,
        coding_valid=coding_valid,
        transitive=transitive,
        spectral_radius=spectral_radius,
        radius_exact=radius_exact,
        parry=parry,
        state_sizes=tuple(sizes),
        state_durations=tuple(durations),
        warnings=tuple(warnings),
    )


def _recurrent_components(
    atlas: ContinuityAtlas, components: list[tuple[Region, ...]]
) -> list[tuple[Region, ...]]:
    """Components lying in closed communicating classes of the component map.

    Per site each component maps into a unique component when the coding is
    valid; transient components (never returned to) are dropped.  Target
    resolution uses a representative interior point, which is exact for
    certified region sets.
    """
    n_sites = atlas.lattice.N
    s = len(components)
    probes = []
    for comp in components:
        probe = None
        for r in comp:
            probe = r.interior_point_ambient()
            if probe is not None:
                break
        if probe is None:
            probe = comp[0].vertices()[0]
        probes.append(probe)

    region_index = []
    for l, comp in enumerate(components):
        for r in comp:
            region_index.append((r.bounding_box_float(), r, l))

    def locate(x) -> int | None:
        fx = [float(v) for v in x]
        for box, r, l in region_index:
            if all(lo - 1e-9 <= v <= hi + 1e-9 for v, (lo, hi) in zip(fx, box)):
                if r.contains_ambient_point(x, closed=True):
                    return l
        return None

    adj: list[set[int]] = [set() for _ in range(s)]
    for k in range(s):
        for i in range(n_sites):
            piece = atlas.find_piece(i, probes[k])
            if piece is None:
                continue
            tgt = locate(piece.apply(probes[k]))
            if tgt is not None:
                adj[k].add(tgt)
    # Tarjan SCCs, keep closed ones (no edge leaving the class)
    index = {}
    low = {}
    stack: list[int] = []
    onstack = set()
    sccs: list[list[int]] = []
    counter = [0]

    def strongconnect(v: int):
        work = [(v, iter(sorted(adj[v])))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        onstack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    onstack.add(w)
                    work.append((w, iter(sorted(adj[w]))))
                    advanced = True
                    break
                elif w in onstack:
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(comp)

    for v in range(s):
        if v not in index:
            strongconnect(v)
    keep: set[int] = set()
    for scc in sccs:
        members = set(scc)
        closed = all(adj[v] <= members for v in scc)
        if closed:
            keep |= members
    if not keep:
        return components
    return [components[k] for k in sorted(keep)]


def _parry_distribution(
    entries: Sequence[Sequence[int]], radius: int
) -> tuple[Fraction, ...] | None:
    """Stationary law of the maximal-entropy chain, exactly.

    With all row sums equal to the radius the right Perron vector is constant,
    so the stationary law is the normalized left kernel of (A^T - radius I).
    Large chains are solved in floats first and the rational vector recovered
    and then verified exactly; dense exact elimination is the fallback.
    """
    n = len(entries)
    if n > 64:
        v = _parry_by_rationalization(entries, radius)
        if v is not None:
            return v
    at_minus = tuple(
        tuple(
            Fraction(entries[j][i]) - (Fraction(radius) if i == j else ZERO)
            for j in range(n)
        )
        for i in range(n)
    )
    kern = exactla.kernel_basis(at_minus)
    if len(kern) != 1:
        return None
    v = kern[0]
    if all(x <= 0 for x in v):
        v = tuple(-x for x in v)
    if any(x < 0 for x in v):
        return None
    total = sum(v)
    if total == 0:
        return None
    return tuple(x / total for x in v)


def _parry_by_rationalization(
    entries: Sequence[Sequence[int]], radius: int
) -> tuple[Fraction, ...] | None:
    """Float power iteration + exact rational reconstruction + verification."""
    arr = np.array(entries, dtype=float).T / radius  # column-stochastic-ish
    n = arr.shape[0]
    v = np.full(n, 1.0 / n)
    for _ in range(20000):
        w = arr @ v
        tot = w.sum()
        if tot <= 0:
            return None
        w /= tot
        if np.max(np.abs(w - v)) < 1e-15:
            v = w
            break
        v = w
    for max_den in (10**4, 10**8, 10**12):
        cand = [Fraction(x).limit_denominator(max_den) for x in v]
        total = sum(cand)
        if total == 0:
            continue
        cand = [x / total for x in cand]
        # exact verification of the eigen-equation
        ok = True
        for j in range(n):
            acc = sum(cand[i] for i in range(n) if entries[i][j])
            if acc != radius * cand[j]:
                ok = False
                break
        if ok and all(x >= 0 for x in cand):
            return tuple(cand)
    return None


@dataclass(frozen=True)
class ChainStatistics:
    transitive: bool
    parry: tuple[Fraction, ...] | None
    entropy: float
    entropy_exact_log_of: int | None
    mean_size: Fraction | None
    mean_duration: Fraction | None
    warnings: tuple[str, ...] = ()


def chain_statistics(tm: TransitionMatrix) -> ChainStatistics:
    """Entropy and Parry-averaged avalanche observables of the coding chain."""
    import math

    warnings = list(tm.warnings)
    entropy = math.log(tm.spectral_radius) if tm.spectral_radius > 0 else float("-inf")
    mean_size = None
    mean_duration = None
    if tm.parry is not None and all(s >= 0 for s in tm.state_sizes):
        mean_size = sum(p * s for p, s in zip(tm.parry, tm.state_sizes))
        mean_duration = sum(p * d for p, d in zip(tm.parry, tm.state_durations))
    if not tm.transitive:
        warnings.append("chain is not transitive; Parry data is per-component")
    return ChainStatistics(
        transitive=tm.transitive,
        parry=tm.parry,
        entropy=entropy,
        entropy_exact_log_of=tm.radius_exact,
        mean_size=mean_size,
        mean_duration=mean_duration,
        warnings=tuple(warnings),
    )
