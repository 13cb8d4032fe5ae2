"""Lattice geometry and model parameters.

The lattice is the cube [1, L]^d in Z^d with the Manhattan metric.  Sites are
indexed 0..N-1 in row-major order over the multi-index cube (this fixes the
site bijection once and for all).  A site is a boundary site iff it has fewer
than 2d nearest neighbors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

RationalLike = Fraction | int | str


def _as_fraction(value: RationalLike) -> Fraction:
    """Accept exact rationals given as Fraction, int, 'p/q' or decimal string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        raise TypeError(
            f"refusing float {value!r} for an exact parameter; pass a string like '1/3'"
        )
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


class SizeError(ValueError):
    """Requested lattice does not fit in a machine word."""


@dataclass(frozen=True)
class Lattice:
    """Immutable cube lattice [1, L]^d with row-major site indexing."""

    d: int
    L: int
    N: int
    neighbor_table: tuple[tuple[int, ...], ...]
    boundary_flags: tuple[bool, ...]

    @property
    def diam(self) -> int:
        """Manhattan diameter d*(L-1)."""
        return self.d * (self.L - 1)

    def coords(self, site: int) -> tuple[int, ...]:
        """Multi-index (1-based per axis) of a site index."""
        if not 0 <= site < self.N:
            raise IndexError(f"site {site} out of range 0..{self.N - 1}")
        out = []
        rem = site
        for _ in range(self.d):
            rem, k = divmod(rem, self.L)
            out.append(k + 1)
        # row-major: first axis varies slowest
        return tuple(reversed(out))

    def site(self, coords: Sequence[int]) -> int:
        """Inverse of :meth:`coords`."""
        if len(coords) != self.d:
            raise IndexError(f"expected {self.d} coordinates, got {len(coords)}")
        idx = 0
        for c in coords:
            if not 1 <= c <= self.L:
                raise IndexError(f"coordinate {c} outside [1, {self.L}]")
            idx = idx * self.L + (c - 1)
        return idx

    # Padded (N, 2d) neighbor index array for vectorized relaxation; missing
    # neighbors point at the dump slot N.
    @property
    def neighbor_array(self) -> np.ndarray:
        arr = getattr(self, "_nbr_arr", None)
        if arr is None:
            arr = np.full((self.N, 2 * self.d), self.N, dtype=np.int64)
            for i, nbrs in enumerate(self.neighbor_table):
                arr[i, : len(nbrs)] = nbrs
            object.__setattr__(self, "_nbr_arr", arr)
        return arr


def build_lattice(d: int, L: int) -> Lattice:
    """Construct the cube lattice [1, L]^d.

    Raises SizeError if L^d does not fit comfortably in a machine word.
    """
    if d < 1 or L < 1:
        raise ValueError(f"need d >= 1 and L >= 1, got d={d}, L={L}")
    n = 1
    for _ in range(d):
        n *= L
        if n > 2**62:
            raise SizeError(f"L^d = {L}^{d} overflows a machine word")
    neighbors: list[tuple[int, ...]] = []
    boundary: list[bool] = []
    for coords in itertools.product(range(1, L + 1), repeat=d):
        nbrs = []
        for axis in range(d):
            for delta in (-1, 1):
                c = coords[axis] + delta
                if 1 <= c <= L:
                    nbrs.append(coords[:axis] + (c,) + coords[axis + 1 :])
        boundary.append(len(nbrs) < 2 * d)
        neighbors.append(nbrs)
    lat = Lattice(
        d=d,
        L=L,
        N=n,
        neighbor_table=tuple(
            tuple(sorted(_flat_index(c, L, d) for c in nbrs)) for nbrs in neighbors
        ),
        boundary_flags=tuple(boundary),
    )
    return lat


def _flat_index(coords: Sequence[int], L: int, d: int) -> int:
    idx = 0
    for c in coords:
        idx = idx * L + (c - 1)
    return idx


def manhattan_distance(lattice: Lattice, i: int, j: int) -> int:
    """Manhattan distance between two sites; 1 exactly for nearest neighbors."""
    ci = lattice.coords(i)
    cj = lattice.coords(j)
    return sum(abs(a - b) for a, b in zip(ci, cj))


@dataclass(frozen=True)
class ModelParams:
    """Critical energy, dissipation and excitation quantum, stored exactly.

    All geometry uses the exact rationals; float views are for large
    simulations.
    """

    ec: Fraction
    eps: Fraction
    delta: Fraction = field(default=Fraction(1))

    def __post_init__(self):
        object.__setattr__(self, "ec", _as_fraction(self.ec))
        object.__setattr__(self, "eps", _as_fraction(self.eps))
        object.__setattr__(self, "delta", _as_fraction(self.delta))
        if not (0 <= self.eps < 1):
            raise ValueError(f"eps must lie in [0, 1), got {self.eps}")
        if self.ec <= 0:
            raise ValueError(f"critical energy must be positive, got {self.ec}")
        if self.delta <= 0:
            raise ValueError(f"excitation quantum must be positive, got {self.delta}")

    @property
    def ec_float(self) -> float:
        return float(self.ec)

    @property
    def eps_float(self) -> float:
        return float(self.eps)

    @property
    def delta_float(self) -> float:
        return float(self.delta)

    def rational_strings(self) -> dict[str, str]:
        return {"Ec": str(self.ec), "eps": str(self.eps), "delta": str(self.delta)}


@dataclass(frozen=True)
class ParamRegion:
    """Exact parameter-region flags for a (eps, Ec) pair.

    no_adjacent_overcritical: Ec >= eps/(1-eps); guarantees no two nearest
        neighbors are simultaneously overcritical during an avalanche, hence
        det L = eps^size for every avalanche map.
    invertibility_guaranteed: eps >= 1/2, or eps > 0 together with the above.
    top_domain_n2: Ec > (1+eps)/(1-eps); the shortest-avalanche domain
        (meaningful for N = 2).
    """

    no_adjacent_overcritical: bool
    invertibility_guaranteed: bool
    top_domain_n2: bool


def classify_params(params: ModelParams, lattice: Lattice | None = None) -> ParamRegion:
    """Classify (eps, Ec) by the exact inequalities that organize avalanche types."""
    eps, ec = params.eps, params.ec
    no_adj = ec >= eps / (1 - eps)
    invertible = eps >= Fraction(1, 2) or (eps > 0 and no_adj)
    top = ec > (1 + eps) / (1 - eps)
    return ParamRegion(
        no_adjacent_overcritical=no_adj,
        invertibility_guaranteed=invertible,
        top_domain_n2=top,
    )
