"""One-step relaxation map, its matrix form, and a-priori avalanche bounds.

The relaxation map acts on nonnegative energy vectors: every overcritical
site (energy strictly above the critical energy; a site holding exactly the
critical energy is relaxed) keeps a fraction eps of its energy and sends
(1-eps)/(2d) of it to each nearest neighbor.  All overcritical sites topple
simultaneously in one application of the map.

Two engines are provided: a float engine on numpy arrays for large
simulations, and an exact engine on tuples of Fraction for the geometry and
the exact regression fixtures.  Both use the same boundary convention.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .lattice import Lattice, ModelParams

log = logging.getLogger(__name__)

#: float inputs closer than this to the critical energy are logged as
#: singularity-grazing; the theta convention still decides the branch.
GRAZE_TOL = 1e-12

RationalVec = tuple[Fraction, ...]


class InternalConsistencyError(RuntimeError):
    """An a-priori bound was violated; indicates an implementation bug."""


def as_rational_vector(values: Sequence) -> RationalVec:
    vec = tuple(v if isinstance(v, Fraction) else Fraction(v) for v in values)
    if any(v < 0 for v in vec):
        raise ValueError("energy vector must be componentwise nonnegative")
    return vec


def is_stable_float(x: np.ndarray, params: ModelParams) -> bool:
    return bool(np.all(x <= params.ec_float))


def is_stable_exact(x: RationalVec, params: ModelParams) -> bool:
    return all(v <= params.ec for v in x)


def overcritical_set_exact(x: RationalVec, params: ModelParams) -> frozenset[int]:
    return frozenset(i for i, v in enumerate(x) if v > params.ec)


# ---------------------------------------------------------------------------
# relaxation step
# ---------------------------------------------------------------------------


def relax_step(x: np.ndarray, params: ModelParams, lattice: Lattice) -> np.ndarray:
    """Apply one parallel toppling step to a float energy vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (lattice.N,):
        raise ValueError(f"expected vector of length {lattice.N}, got shape {x.shape}")
    if np.any(x < 0):
        raise ValueError("energy vector must be componentwise nonnegative")
    over = x > params.ec_float
    if not over.any():
        return x.copy()
    return _relax_step_float_unchecked(x, over, params, lattice)


def _relax_step_float_unchecked(
    x: np.ndarray, over: np.ndarray, params: ModelParams, lattice: Lattice
) -> np.ndarray:
    eps = params.eps_float
    shed = np.where(over, x, 0.0)
    share = (1.0 - eps) / (2 * lattice.d)
    acc = np.zeros(lattice.N + 1)
    sites = np.flatnonzero(over)
    nbrs = lattice.neighbor_array[sites]
    np.add.at(acc, nbrs.ravel(), np.repeat(share * shed[sites], nbrs.shape[1]))
    out = x - (1.0 - eps) * shed + acc[: lattice.N]
    return out


def relax_step_exact(x: RationalVec, params: ModelParams, lattice: Lattice) -> RationalVec:
    """Exact rational version of :func:`relax_step`."""
    if len(x) != lattice.N:
        raise ValueError(f"expected vector of length {lattice.N}")
    if any(v < 0 for v in x):
        raise ValueError("energy vector must be componentwise nonnegative")
    over = [v > params.ec for v in x]
    if not any(over):
        return tuple(x)
    eps = params.eps
    share = (1 - eps) / (2 * lattice.d)
    out = [v - (1 - eps) * v if o else v for v, o in zip(x, over)]
    for j, o in enumerate(over):
        if o:
            for k in lattice.neighbor_table[j]:
                out[k] += share * x[j]
    return tuple(out)


# ---------------------------------------------------------------------------
# matrix form
# ---------------------------------------------------------------------------


def step_matrix_for_pattern(
    pattern: frozenset[int] | set[int], params: ModelParams, lattice: Lattice
) -> tuple[tuple[Fraction, ...], ...]:
    """Exact one-step matrix determined by the set of overcritical sites.

    Column j holds eps on the diagonal and (1-eps)/(2d) at the neighbors when
    j topples, and is the standard basis column otherwise.  The relaxation
    step is multiplication by this matrix.
    """
    n = lattice.N
    eps = params.eps
    share = (1 - eps) / (2 * lattice.d)
    cols: list[list[Fraction]] = [[Fraction(0)] * n for _ in range(n)]
    for j in range(n):
        if j in pattern:
            cols[j][j] = eps
            for k in lattice.neighbor_table[j]:
                cols[j][k] += share
        else:
            cols[j][j] = Fraction(1)
    return tuple(tuple(cols[j][i] for j in range(n)) for i in range(n))


def topple_matrix(
    x, params: ModelParams, lattice: Lattice
) -> tuple[tuple[Fraction, ...], ...] | np.ndarray:
    """Matrix S with f(x) = S x, for a float array or exact rational vector."""
    if isinstance(x, np.ndarray):
        over = frozenset(np.flatnonzero(x > params.ec_float).tolist())
        exact = step_matrix_for_pattern(over, params, lattice)
        return np.array([[float(v) for v in row] for row in exact])
    vec = as_rational_vector(x)
    return step_matrix_for_pattern(overcritical_set_exact(vec, params), params, lattice)


# ---------------------------------------------------------------------------
# relaxation to stability
# ---------------------------------------------------------------------------


def relax_to_stable(
    x: np.ndarray,
    params: ModelParams,
    lattice: Lattice,
    graze_tol: float = GRAZE_TOL,
    on_graze: Callable[[int, int], None] | None = None,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Iterate the float relaxation map until stable.

    Returns the stable vector and the trace of overcritical index arrays, one
    per step.  Iteration is capped by the a-priori step bound; exceeding it
    raises InternalConsistencyError.  Intermediate coordinates within
    ``graze_tol`` of the critical energy are reported as singularity-grazing
    (the theta convention still decides the branch).
    """
    x = np.array(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("energy vector must be componentwise nonnegative")
    ec = params.ec_float
    cap = relax_step_cap(float(np.sum(x)), params, lattice)
    trace: list[np.ndarray] = []
    steps = 0
    while True:
        grazing = np.flatnonzero(np.abs(x - ec) < graze_tol)
        if grazing.size:
            for i in grazing.tolist():
                if on_graze is not None:
                    on_graze(steps, i)
            log.debug("singularity-grazing at step %d, sites %s", steps, grazing.tolist())
        over = x > ec
        if not over.any():
            return x, trace
        trace.append(np.flatnonzero(over))
        x = _relax_step_float_unchecked(x, over, params, lattice)
        steps += 1
        if steps > cap:
            raise InternalConsistencyError(
                f"relaxation exceeded the a-priori bound {cap} steps"
            )


def relax_to_stable_exact(
    x: RationalVec, params: ModelParams, lattice: Lattice
) -> tuple[RationalVec, list[frozenset[int]]]:
    """Exact rational version of :func:`relax_to_stable`."""
    vec = as_rational_vector(x)
    cap = relax_step_cap(float(sum(vec)), params, lattice)
    trace: list[frozenset[int]] = []
    steps = 0
    while True:
        over = overcritical_set_exact(vec, params)
        if not over:
            return vec, trace
        trace.append(over)
        vec = relax_step_exact(vec, params, lattice)
        steps += 1
        if steps > cap:
            raise InternalConsistencyError(
                f"relaxation exceeded the a-priori bound {cap} steps"
            )


# ---------------------------------------------------------------------------
# a-priori bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundSet:
    """A-priori bounds on relaxation and avalanche observables.

    relax_steps_bound(l1_norm): bound on the number of relaxation steps for a
        configuration of the given 1-norm.
    excitation_cover_steps: bound on the time by which every site has been
        overcritical at least once under driving.
    duration_bound: bound on the duration of any avalanche started from a
        stable configuration.
    uniform_alternative_const: energy-independent constant C0 such that one of
        the two previous bounds is at most C0.
    """

    relax_steps_bound: Callable[[float], float]
    excitation_cover_steps: float
    duration_bound: float
    uniform_alternative_const: float

    def relax_steps(self, l1_norm: float) -> int:
        return int(math.ceil(self.relax_steps_bound(l1_norm)))


def compute_bounds(params: ModelParams, lattice: Lattice) -> BoundSet:
    """Evaluate the displayed bound formulas for these parameters."""
    if params.eps >= 1:
        raise ValueError("bounds diverge as eps -> 1; need eps < 1")
    d, N, diam = lattice.d, lattice.N, lattice.diam
    ec = params.ec_float
    eps = params.eps_float
    ratio = 2 * d / (1.0 - eps)
    gamma_ceil = math.ceil(ratio) + 1

    def relax_steps_bound(l1: float) -> float:
        return (ratio * N) * (l1 / ec) * (ratio + 1) ** (diam / 2.0)

    n_exc = N * (N * ec + 2) * gamma_ceil**diam
    tau_m = N * N * (1 + 1.0 / (N * ec)) * (ratio + 1) ** (diam / 2.0 + 1)
    c0 = 3 * N * N * (ratio + 1) ** (diam + 1)
    return BoundSet(
        relax_steps_bound=relax_steps_bound,
        excitation_cover_steps=n_exc,
        duration_bound=tau_m,
        uniform_alternative_const=c0,
    )


def relax_step_cap(l1_norm: float, params: ModelParams, lattice: Lattice) -> int:
    """Integer relaxation-step cap for a configuration of the given 1-norm."""
    bounds = compute_bounds(params, lattice)
    return max(1, bounds.relax_steps(l1_norm))
