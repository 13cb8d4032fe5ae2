"""Attractor sampling, box-counting dimension, and Moran-type bounds.

The Moran bounds generalize the classical formula to maps with pieces and
overlaps: the lower root solves sum (1/kappa_i) (s_i^-)^alpha = eta and the
upper root solves sum theta_i (s_i^+)^beta = 1, where theta_i counts pieces
of one site map meeting at a point of the attractor region and eta, kappa_i
are overlap multiplicities (not computable in general; supplied as estimates
and defaulted to one, making the lower bound conditional).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dynamics import ExcitationSource, make_rng, simulate_events
from .lattice import Lattice, ModelParams
from . import exactla


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _excite_and_relax(x: list[float], site: int, ec, delta, eps, share, nbrs, n) -> None:
    """In-place one return-map application on a list state."""
    x[site] += delta
    if x[site] <= ec:
        return
    while True:
        over = [j for j in range(n) if x[j] > ec]
        if not over:
            return
        gains = [0.0] * n
        for j in over:
            g = share * x[j]
            for t in nbrs[j]:
                gains[t] += g
        for j in over:
            x[j] *= eps
        for j in range(n):
            if gains[j]:
                x[j] += gains[j]


def attractor_sample(
    params: ModelParams,
    lattice: Lattice,
    mode: str = "orbit",
    n_transient: int = 10_000,
    n_points: int = 100_000,
    seed: int = 0,
    tree_width: int = 2048,
) -> np.ndarray:
    """Point cloud approximating the attractor.

    orbit: stable states visited by one driven orbit (physical-measure
    support proxy).  ifs: population of points, each following an independent
    uniform branch every round (outer attractor proxy; a single orbit can
    occupy a strictly smaller set).  Exact region data comes from the
    geometry package instead.
    """
    n = lattice.N
    rng = make_rng(seed)
    ec = params.ec_float
    eps = params.eps_float
    delta = params.delta_float
    share = (1.0 - eps) / (2 * lattice.d)
    nbrs = [list(t) for t in lattice.neighbor_table]
    if mode == "orbit":
        x = [float(v) for v in rng.uniform(0, ec, size=n)]
        sites = rng.integers(0, n, size=n_transient + n_points)
        for k in range(n_transient):
            _excite_and_relax(x, int(sites[k]), ec, delta, eps, share, nbrs, n)
        pts = np.empty((n_points, n))
        for k in range(n_points):
            _excite_and_relax(x, int(sites[n_transient + k]), ec, delta, eps, share, nbrs, n)
            pts[k] = x
        return pts
    if mode == "ifs":
        width = min(tree_width, max(64, n_points // 16))
        cloud = [[float(v) for v in rng.uniform(0, ec, size=n)] for _ in range(width)]
        rounds = max(1, n_transient // width)
        for _ in range(rounds):
            sites = rng.integers(0, n, size=width)
            for idx in range(width):
                _excite_and_relax(cloud[idx], int(sites[idx]), ec, delta, eps, share, nbrs, n)
        out = np.empty((n_points, n))
        filled = 0
        while filled < n_points:
            sites = rng.integers(0, n, size=width)
            for idx in range(width):
                _excite_and_relax(cloud[idx], int(sites[idx]), ec, delta, eps, share, nbrs, n)
                if filled < n_points:
                    out[filled] = cloud[idx]
                    filled += 1
                else:
                    break
        return out
    raise ValueError(f"unknown sampling mode {mode!r}")


# ---------------------------------------------------------------------------
# box counting
# ---------------------------------------------------------------------------


def box_dimension(
    cloud: np.ndarray,
    delta_range: tuple[float, float] | None = None,
    n_scales: int = 12,
    n_offsets: int = 3,
    seed: int = 0,
) -> tuple[float, float]:
    """(lower, upper) slope estimates of log N(delta) against log(1/delta).

    Counts occupied grid boxes at each scale, averaged over a few random grid
    offsets; lower/upper are the extreme slopes over contiguous half-windows.
    """
    cloud = np.asarray(cloud, dtype=float)
    if cloud.ndim == 1:
        cloud = cloud[:, None]
    npts, dim = cloud.shape
    if npts == 0:
        raise ValueError("empty cloud")
    spread = float(np.max(cloud.max(axis=0) - cloud.min(axis=0)))
    if spread == 0:
        return (0.0, 0.0)
    if delta_range is None:
        hi = spread / 4
        lo = max(spread / 4096, hi / 10 ** 1.6)
        delta_range = (lo, hi)
    lo, hi = delta_range
    if not (0 < lo < hi):
        raise ValueError("need 0 < delta_lo < delta_hi")
    if math.log10(hi / lo) < 1.0:
        raise ValueError("delta range should span at least a decade")
    deltas = np.exp(np.linspace(math.log(lo), math.log(hi), n_scales))
    rng = make_rng(seed)
    counts = []
    for d in deltas:
        c = 0.0
        for _ in range(n_offsets):
            off = rng.uniform(0, d, size=dim)
            keys = np.floor((cloud + off) / d).astype(np.int64)
            c += len(np.unique(keys, axis=0))
        counts.append(c / n_offsets)
    xs = np.log(1.0 / deltas)
    ys = np.log(np.asarray(counts))
    slopes = []
    half = max(3, n_scales // 2)
    for start in range(0, n_scales - half + 1):
        sl = np.polyfit(xs[start : start + half], ys[start : start + half], 1)[0]
        slopes.append(float(sl))
    return (min(slopes), max(slopes))


def box_dimension_estimate(cloud, **kw) -> float:
    lo, hi = box_dimension(cloud, **kw)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Moran bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MoranInputs:
    """Contraction ratios and multiplicities feeding the Moran equations.

    Ratios outside the contracting range may be stored (they occur, e.g. for
    isometric pieces) but make the corresponding bound vacuous; moran_bounds
    rejects them.  per_piece_s_plus keeps the per-piece largest singular
    values for reporting in such cases.
    """

    s_minus: tuple[float, ...]
    s_plus: tuple[float, ...]
    eta: float = 1.0
    kappa: tuple[float, ...] | None = None
    theta: tuple[float, ...] | None = None
    per_piece_s_plus: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        k = len(self.s_minus)
        if len(self.s_plus) != k:
            raise ValueError("s_minus and s_plus must have equal length")
        if self.kappa is None:
            object.__setattr__(self, "kappa", tuple(1.0 for _ in range(k)))
        if self.theta is None:
            object.__setattr__(self, "theta", tuple(1.0 for _ in range(k)))
        for lo, hi in zip(self.s_minus, self.s_plus):
            if not (0 <= lo <= hi):
                raise ValueError("need 0 <= s_i^- <= s_i^+")
        if self.eta < 1 or any(x < 1 for x in self.kappa) or any(x < 1 for x in self.theta):
            raise ValueError("multiplicities must be >= 1")

    def contracting(self) -> bool:
        return all(s < 1 for s in self.s_plus)


@dataclass(frozen=True)
class DimensionResult:
    box_lower: float | None
    box_upper: float | None
    moran_lower: float
    moran_upper: float
    inputs: MoranInputs


def moran_bounds(inputs: MoranInputs, tol: float = 1e-10) -> tuple[float, float]:
    """Bisection roots of the two generalized Moran equations."""
    if not inputs.contracting():
        raise ValueError(
            "some piece is not strictly contracting; the upper Moran bound is "
            "vacuous (see per_piece_s_plus for the reportable values)"
        )

    def lower_fn(alpha: float) -> float:
        return (
            sum(
                (1.0 / k) * (s ** alpha if s > 0 else (1.0 if alpha == 0 else 0.0))
                for s, k in zip(inputs.s_minus, inputs.kappa)
            )
            - inputs.eta
        )

    def upper_fn(beta: float) -> float:
        return sum(t * s ** beta for s, t in zip(inputs.s_plus, inputs.theta)) - 1.0

    lower = _bisect_root(lower_fn, tol) if any(s > 0 for s in inputs.s_minus) else 0.0
    upper = _bisect_root(upper_fn, tol)
    return (lower, upper)


def _bisect_root(fn, tol: float, hi: float = 64.0) -> float:
    """Root of a strictly decreasing function on [0, hi]."""
    f0 = fn(0.0)
    if f0 < 0:
        return 0.0
    if fn(hi) > 0:
        raise ValueError("no root in [0, 64]: inputs are not contracting")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# inputs from an exact atlas
# ---------------------------------------------------------------------------


def singular_value_inputs(atlas, eta: float = 1.0, kappa=None) -> MoranInputs:
    """Per-site extreme singular values and piece multiplicities of an atlas.

    s_i^- is reported as 0 when some piece is rank-deficient (the lower Moran
    bound is then vacuous).  theta_i counts the maximal number of pieces of
    one site map whose closures meet at a point (evaluated at piece vertices,
    where the maximum is attained).
    """
    s_minus = []
    s_plus = []
    theta = []
    per_piece = []
    for site in range(atlas.lattice.N):
        pieces = atlas.pieces_for(site)
        lo = math.inf
        hi = 0.0
        piece_tops = []
        for p in pieces:
            arr = exactla.mat_to_float(p.linear)
            sv = np.linalg.svd(arr, compute_uv=False)
            piece_tops.append(float(sv[0]))
            hi = max(hi, float(sv[0]))
            smallest = float(sv[-1])
            lo = min(lo, smallest)
        per_piece.append(tuple(piece_tops))
        s_minus.append(0.0 if lo < 1e-14 else lo)
        s_plus.append(hi)
        # vertex incidence over closed piece domains
        best = 1
        seen = set()
        closures = [p.domain.closure() for p in pieces]
        for c in closures:
            for v in c.vertices():
                if v in seen:
                    continue
                seen.add(v)
                count = sum(1 for other in closures if other.contains_point(v, closed=True))
                best = max(best, count)
        theta.append(float(best))
    return MoranInputs(
        s_minus=tuple(s_minus),
        s_plus=tuple(s_plus),
        eta=eta,
        kappa=kappa,
        theta=tuple(theta),
        per_piece_s_plus=tuple(per_piece),
    )
