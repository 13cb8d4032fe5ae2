"""Driving, return maps and avalanche records for the skew-product dynamics.

The physical model alternates excitation steps (a random or prescribed site
receives one energy quantum) with relaxation steps.  The return map to the
stable cube performs one excitation and the full relaxation cascade at once;
each such event yields an avalanche record.  The accumulated linear map of an
event is the product of the one-step matrices along the cascade.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import exactla
from .lattice import Lattice, ModelParams, classify_params, manhattan_distance
from .relaxation import (
    InternalConsistencyError,
    RationalVec,
    as_rational_vector,
    compute_bounds,
    is_stable_exact,
    is_stable_float,
    overcritical_set_exact,
    relax_step_exact,
    step_matrix_for_pattern,
    _relax_step_float_unchecked,
)

RNG_ALGORITHM = "philox4x64"


def make_rng(seed: int) -> np.random.Generator:
    """Named, seedable, splittable generator used across the package."""
    return np.random.Generator(np.random.Philox(seed))


# ---------------------------------------------------------------------------
# excitation sources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExcitationSource:
    """Site driving: i.i.d. uniform from a seed, or an explicit finite list."""

    mode: str
    seed: int | None = None
    sequence: tuple[int, ...] | None = None

    @staticmethod
    def iid(seed: int) -> "ExcitationSource":
        return ExcitationSource(mode="seeded-iid-uniform", seed=int(seed))

    @staticmethod
    def explicit(sequence: Sequence[int]) -> "ExcitationSource":
        return ExcitationSource(mode="explicit-sequence", sequence=tuple(int(s) for s in sequence))

    def cursor(self, n_sites: int) -> "ExcitationCursor":
        return ExcitationCursor(self, n_sites)


class ExcitationCursor:
    """Stateful reader over an excitation source, tracking its position."""

    _BATCH = 8192

    def __init__(self, source: ExcitationSource, n_sites: int):
        self.source = source
        self.n_sites = n_sites
        self.position = 0
        if source.mode == "seeded-iid-uniform":
            if source.seed is None:
                raise ValueError("iid excitation source needs a seed")
            self._rng = make_rng(source.seed)
            self._buf: np.ndarray = np.empty(0, dtype=np.int64)
            self._buf_pos = 0
        elif source.mode == "explicit-sequence":
            if source.sequence is None:
                raise ValueError("explicit excitation source needs a sequence")
            for s in source.sequence:
                if not 0 <= s < n_sites:
                    raise ValueError(f"site {s} out of range 0..{n_sites - 1}")
        else:
            raise ValueError(f"unknown excitation mode {source.mode!r}")

    def __iter__(self) -> Iterator[int]:
        return self

    def __next__(self) -> int:
        if self.source.mode == "explicit-sequence":
            seq = self.source.sequence
            if self.position >= len(seq):
                raise StopIteration("explicit excitation sequence exhausted")
            site = seq[self.position]
        else:
            if self._buf_pos >= self._buf.size:
                self._buf = self._rng.integers(0, self.n_sites, size=self._BATCH)
                self._buf_pos = 0
            site = int(self._buf[self._buf_pos])
            self._buf_pos += 1
        self.position += 1
        return site


# ---------------------------------------------------------------------------
# avalanche records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AvalancheRecord:
    """One return-map event.

    waiting_time counts return-map steps since the previous positive-duration
    avalanche, including the current step (minimal value 1).
    """

    start_site: int
    duration: int
    size: int
    waiting_time: int
    overcritical_sets: tuple[frozenset[int], ...]
    linear_map: object | None = None  # Fraction matrix (exact) or ndarray (float)

    @property
    def domain_signature(self) -> tuple[frozenset[int], ...]:
        """The sequence of overcritical sets; identifies the continuity piece."""
        return self.overcritical_sets

    def __post_init__(self):
        if self.duration != len(self.overcritical_sets):
            raise ValueError("duration must equal the number of overcritical sets")
        if self.size != sum(len(c) for c in self.overcritical_sets):
            raise ValueError("size must equal the total overcritical count")
        if self.waiting_time < 1:
            raise ValueError("waiting time is at least 1")


# ---------------------------------------------------------------------------
# physical one-step map and return map
# ---------------------------------------------------------------------------


def step_physical(state, params: ModelParams, lattice: Lattice):
    """One step of the physical model.

    state = (cursor, x).  If x is stable, consume one excitation symbol and
    add one quantum at that site; otherwise apply a single relaxation step
    without consuming a symbol.
    """
    cursor, x = state
    if isinstance(x, np.ndarray):
        if is_stable_float(x, params):
            site = next(cursor)
            y = x.copy()
            y[site] += params.delta_float
            return (cursor, y)
        over = x > params.ec_float
        return (cursor, _relax_step_float_unchecked(x, over, params, lattice))
    vec = as_rational_vector(x)
    if is_stable_exact(vec, params):
        site = next(cursor)
        y = list(vec)
        y[site] += params.delta
        return (cursor, tuple(y))
    return (cursor, relax_step_exact(vec, params, lattice))


def return_map_exact(
    x: RationalVec,
    site: int,
    params: ModelParams,
    lattice: Lattice,
    collect_linear: bool = True,
    waiting_time: int = 1,
) -> tuple[RationalVec, AvalancheRecord]:
    """Excite one site of a stable rational configuration and relax fully."""
    vec = as_rational_vector(x)
    if not is_stable_exact(vec, params):
        raise ValueError("return map requires a stable configuration")
    y = list(vec)
    y[site] += params.delta
    vec = tuple(y)
    cap = _duration_cap(params, lattice)
    trace: list[frozenset[int]] = []
    linear = exactla.identity(lattice.N) if collect_linear else None
    while True:
        over = overcritical_set_exact(vec, params)
        if not over:
            break
        trace.append(over)
        if collect_linear:
            linear = exactla.mat_mul(step_matrix_for_pattern(over, params, lattice), linear)
        vec = relax_step_exact(vec, params, lattice)
        if len(trace) > cap:
            raise InternalConsistencyError(
                f"avalanche duration exceeded the a-priori bound {cap}"
            )
    record = AvalancheRecord(
        start_site=site,
        duration=len(trace),
        size=sum(len(c) for c in trace),
        waiting_time=waiting_time,
        overcritical_sets=tuple(trace),
        linear_map=linear,
    )
    return vec, record


def return_map(
    x: np.ndarray,
    site: int,
    params: ModelParams,
    lattice: Lattice,
    collect_linear: bool = True,
    waiting_time: int = 1,
) -> tuple[np.ndarray, AvalancheRecord]:
    """Float version of :func:`return_map_exact`."""
    x = np.asarray(x, dtype=np.float64)
    if not is_stable_float(x, params):
        raise ValueError("return map requires a stable configuration")
    x = x.copy()
    x[site] += params.delta_float
    ec = params.ec_float
    cap = _duration_cap(params, lattice)
    trace: list[frozenset[int]] = []
    linear = np.eye(lattice.N) if collect_linear else None
    while True:
        over = x > ec
        if not over.any():
            break
        sites = frozenset(np.flatnonzero(over).tolist())
        trace.append(sites)
        if collect_linear:
            step = exactla.mat_to_float(step_matrix_for_pattern(sites, params, lattice))
            linear = step @ linear
        x = _relax_step_float_unchecked(x, over, params, lattice)
        if len(trace) > cap:
            raise InternalConsistencyError(
                f"avalanche duration exceeded the a-priori bound {cap}"
            )
    record = AvalancheRecord(
        start_site=site,
        duration=len(trace),
        size=sum(len(c) for c in trace),
        waiting_time=waiting_time,
        overcritical_sets=tuple(trace),
        linear_map=linear,
    )
    return x, record


def _duration_cap(params: ModelParams, lattice: Lattice) -> int:
    bounds = compute_bounds(params, lattice)
    return max(1, int(math.ceil(bounds.duration_bound)))


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------


def run_orbit(
    x0,
    source: ExcitationSource,
    params: ModelParams,
    lattice: Lattice,
    n_events: int,
    collect_linear: bool = False,
    exact: bool = False,
) -> Iterator[AvalancheRecord]:
    """Drive the return map for n_events excitations, yielding records in order."""
    if n_events < 0:
        raise ValueError("n_events must be nonnegative")
    cursor = source.cursor(lattice.N)
    state = as_rational_vector(x0) if exact else np.asarray(x0, dtype=np.float64)
    waiting = 1
    for _ in range(n_events):
        site = next(cursor)
        if exact:
            state, rec = return_map_exact(
                state, site, params, lattice, collect_linear=collect_linear, waiting_time=waiting
            )
        else:
            state, rec = return_map(
                state, site, params, lattice, collect_linear=collect_linear, waiting_time=waiting
            )
        waiting = 1 if rec.size > 0 else waiting + 1
        yield rec


@dataclass
class EventTable:
    """Compact arrays for large driven runs (one row per return-map event)."""

    start_sites: np.ndarray
    durations: np.ndarray
    sizes: np.ndarray
    final_state: np.ndarray

    def __len__(self) -> int:
        return int(self.sizes.size)

    @property
    def waiting_times(self) -> np.ndarray:
        """Waiting time per event: steps since the previous positive event."""
        n = len(self)
        out = np.empty(n, dtype=np.int64)
        w = 1
        positive = self.sizes > 0
        for k in range(n):
            out[k] = w
            w = 1 if positive[k] else w + 1
        return out


_SMALL_N = 40


def simulate_events(
    x0,
    params: ModelParams,
    lattice: Lattice,
    n_events: int,
    source: ExcitationSource,
    burn_in: int = 0,
) -> EventTable:
    """Fast float driving loop recording sizes, durations and start sites."""
    x = np.array(x0, dtype=np.float64)
    if x.shape != (lattice.N,):
        raise ValueError(f"expected initial state of length {lattice.N}")
    if lattice.N <= _SMALL_N:
        return _simulate_events_small(x, params, lattice, n_events, source, burn_in)
    ec = params.ec_float
    eps = params.eps_float
    delta = params.delta_float
    share = (1.0 - eps) / (2 * lattice.d)
    nbr = lattice.neighbor_array
    n = lattice.N
    cursor = source.cursor(n)
    starts = np.empty(n_events, dtype=np.int32)
    durations = np.zeros(n_events, dtype=np.int64)
    sizes = np.zeros(n_events, dtype=np.int64)
    acc = np.zeros(n + 1)
    for k in range(-burn_in, n_events):
        site = next(cursor)
        x[site] += delta
        dur = 0
        size = 0
        if x[site] > ec:
            while True:
                over = x > ec
                m = int(over.sum())
                if m == 0:
                    break
                dur += 1
                size += m
                shed = np.where(over, x, 0.0)
                acc[:] = 0.0
                idx = np.flatnonzero(over)
                np.add.at(acc, nbr[idx].ravel(), np.repeat(share * shed[idx], nbr.shape[1]))
                x = x - (1.0 - eps) * shed + acc[:n]
        if k >= 0:
            starts[k] = site
            durations[k] = dur
            sizes[k] = size
    return EventTable(start_sites=starts, durations=durations, sizes=sizes, final_state=x)


def _simulate_events_small(
    x_arr, params, lattice, n_events, source, burn_in
) -> EventTable:
    """List-based driving loop; much faster than numpy for small lattices."""
    n = lattice.N
    x = [float(v) for v in x_arr]
    ec = params.ec_float
    eps = params.eps_float
    delta = params.delta_float
    share = (1.0 - eps) / (2 * lattice.d)
    keep = eps  # overcritical site retains eps * energy
    nbrs = [list(t) for t in lattice.neighbor_table]
    cursor = source.cursor(n)
    starts = np.empty(n_events, dtype=np.int32)
    durations = np.zeros(n_events, dtype=np.int64)
    sizes = np.zeros(n_events, dtype=np.int64)
    for k in range(-burn_in, n_events):
        site = next(cursor)
        xi = x[site] + delta
        x[site] = xi
        dur = 0
        size = 0
        if xi > ec:
            while True:
                over = [j for j in range(n) if x[j] > ec]
                if not over:
                    break
                dur += 1
                size += len(over)
                gains = [0.0] * n
                for j in over:
                    g = share * x[j]
                    for t in nbrs[j]:
                        gains[t] += g
                for j in over:
                    x[j] *= keep
                for j in range(n):
                    if gains[j]:
                        x[j] += gains[j]
        if k >= 0:
            starts[k] = site
            durations[k] = dur
            sizes[k] = size
    return EventTable(
        start_sites=starts,
        durations=durations,
        sizes=sizes,
        final_state=np.array(x),
    )


# ---------------------------------------------------------------------------
# degenerate-parameter detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegeneracyReport:
    """Outcome of the finite search for degenerate avalanche maps."""

    degenerate: bool
    zero_patterns: tuple[tuple[frozenset[int], tuple[float, ...]], ...]
    sampled_zero_det: bool
    complete: bool


def _independent_subsets(lattice: Lattice, max_size: int) -> Iterator[frozenset[int]]:
    """Nonempty site sets with no two nearest neighbors, by increasing size."""
    sites = list(range(lattice.N))
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(sites, size):
            ok = True
            for a in range(size):
                for b in range(a + 1, size):
                    if manhattan_distance(lattice, combo[a], combo[b]) == 1:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                yield frozenset(combo)


def _all_subsets(lattice: Lattice, max_size: int) -> Iterator[frozenset[int]]:
    sites = list(range(lattice.N))
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(sites, size):
            yield frozenset(combo)


def _eps_roots_of_pattern(
    pattern: frozenset[int], params: ModelParams, lattice: Lattice
) -> tuple[float, ...]:
    """Real roots in [0, 1) of det S^eps for a fixed overcritical pattern.

    The determinant is a polynomial of degree <= N in eps; its coefficients
    are recovered exactly by interpolation at N+1 rational nodes.
    """
    n = lattice.N
    nodes = [Fraction(k, n + 2) for k in range(n + 1)]
    values = []
    for node in nodes:
        p = ModelParams(ec=params.ec, eps=node, delta=params.delta)
        values.append(exactla.det(step_matrix_for_pattern(pattern, p, lattice)))
    coeffs = exactla.poly_from_samples(nodes, values)
    if len(coeffs) == 1:
        return () if coeffs[0] != 0 else (float("nan"),)
    poly = np.array([float(c) for c in reversed(coeffs)])
    roots = np.roots(poly)
    real = sorted(
        float(r.real)
        for r in roots
        if abs(r.imag) < 1e-9 and -1e-9 <= r.real < 1 - 1e-12
    )
    return tuple(real)


def detect_degenerate_params(
    params: ModelParams,
    lattice: Lattice,
    search_depth: int = 0,
    n_avalanche_samples: int = 64,
    sample_seed: int = 2024,
) -> DegeneracyReport:
    """Decide whether some realizable avalanche map is singular at these params.

    Enumerates the one-step matrices realizable at the given lattice, indexed
    by the overcritical-set pattern: sets with no adjacent pair when
    Ec >= eps/(1-eps) (adjacent simultaneous overcriticality is then
    impossible), all nonempty sets otherwise.  For each pattern the exact
    determinant at eps is tested, and the finite set of eps-roots is reported.
    Additionally samples exact avalanches and tests det L directly.
    """
    region = classify_params(params, lattice)
    max_size = search_depth if search_depth > 0 else lattice.N
    complete = max_size >= lattice.N
    if region.no_adjacent_overcritical:
        patterns = _independent_subsets(lattice, max_size)
    else:
        patterns = _all_subsets(lattice, max_size)

    zero_patterns: list[tuple[frozenset[int], tuple[float, ...]]] = []
    budget = 4096
    count = 0
    for pattern in patterns:
        count += 1
        if count > budget:
            complete = False
            break
        d = exactla.det(step_matrix_for_pattern(pattern, params, lattice))
        if d == 0:
            zero_patterns.append((pattern, _eps_roots_of_pattern(pattern, params, lattice)))

    sampled_zero = False
    if n_avalanche_samples > 0:
        rng = make_rng(sample_seed)
        denom = 64
        for _ in range(n_avalanche_samples):
            raw = rng.integers(0, denom + 1, size=lattice.N)
            x = tuple(params.ec * Fraction(int(v), denom) for v in raw)
            site = int(rng.integers(0, lattice.N))
            _, rec = return_map_exact(x, site, params, lattice, collect_linear=True)
            if rec.size > 0 and exactla.det(rec.linear_map) == 0:
                sampled_zero = True
                break

    return DegeneracyReport(
        degenerate=bool(zero_patterns) or sampled_zero,
        zero_patterns=tuple(zero_patterns),
        sampled_zero_det=sampled_zero,
        complete=complete,
    )


# ---------------------------------------------------------------------------
# nearly-Zhang perturbations
# ---------------------------------------------------------------------------


class PerturbationError(ValueError):
    """Perturbed atlas violated the spectral or invariance constraints."""


def perturb_model(atlas, magnitude, seed: int):
    """Perturb the linear parts and offsets of an exact atlas.

    Identity pieces (size-0 avalanches, pure translations) are kept exact.
    Each other matrix entry and offset entry receives independent uniform
    rational noise in [-magnitude, magnitude].  The perturbed atlas must keep
    every spectral radius within the unit ball (no worse than the original)
    and map every piece into the stable cube; violations raise
    PerturbationError with a diagnostic.
    """
    from .geometry.atlas import ContinuityAtlas

    if not isinstance(atlas, ContinuityAtlas):
        raise TypeError("perturb_model expects a ContinuityAtlas")
    mag = magnitude if isinstance(magnitude, Fraction) else Fraction(str(magnitude))
    if mag < 0:
        raise ValueError("magnitude must be nonnegative")
    rng = make_rng(seed)
    scale = 1 << 40

    def noise() -> Fraction:
        return mag * Fraction(int(rng.integers(-scale, scale + 1)), scale)

    n = atlas.lattice.N
    ec = atlas.params.ec
    new_sites = []
    problems: list[str] = []
    for site_pieces in atlas.pieces:
        new_pieces = []
        for piece in site_pieces:
            ident = piece.linear == exactla.identity(n)
            if ident or mag == 0:
                new_pieces.append(piece)
                continue
            linear = tuple(
                tuple(v + noise() for v in row) for row in piece.linear
            )
            offset = tuple(v + noise() for v in piece.offset)
            rho_old = _spectral_radius(piece.linear)
            rho_new = _spectral_radius(linear)
            if rho_new > 1.0 + 1e-12 or rho_new > max(rho_old, 1.0 - 1e-12) + 1e-12:
                problems.append(
                    f"site {piece.site} piece {piece.signature}: spectral radius "
                    f"{rho_new:.6f} (was {rho_old:.6f})"
                )
            for vertex in piece.domain.vertices():
                img = exactla.vec_add(exactla.mat_vec(linear, vertex), offset)
                if any(v < 0 or v > ec for v in img):
                    problems.append(
                        f"site {piece.site} piece {piece.signature}: image leaves the cube"
                    )
                    break
            new_pieces.append(replace(piece, linear=linear, offset=offset))
        new_sites.append(tuple(new_pieces))
    if problems:
        raise PerturbationError("; ".join(problems[:8]))
    return replace(atlas, pieces=tuple(new_sites))


def _spectral_radius(m) -> float:
    arr = exactla.mat_to_float(m)
    return float(np.max(np.abs(np.linalg.eigvals(arr))))
