"""Lyapunov spectra, contraction horizons, entropy estimates, time rescaling.

Exponent conventions: the fiber exponents are measured per return-map event
(per avalanche, counting waiting events as identity factors), matching the
avalanche-matrix cocycle.  Physical-time rates follow by dividing by the mean
return time, mirroring the entropy rescaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import exactla
from .dynamics import ExcitationSource, make_rng
from .lattice import Lattice, ModelParams
from .relaxation import compute_bounds, _relax_step_float_unchecked


# ---------------------------------------------------------------------------
# Lyapunov spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovResult:
    chi_plus: float
    chi_minus: tuple[float, ...]  # sorted descending, nats per event
    sum_estimate: float
    mean_size: float
    sum_identity_value: float  # measured mean size * log(eps)
    sum_se: float
    n_events: int
    seed: int
    renorm_period: int


def lyapunov_spectrum(
    x0,
    params: ModelParams,
    lattice: Lattice,
    n_events: int,
    seed: int,
    renorm_period: int = 5,
    burn_in: int = 1000,
    n_batches: int = 20,
) -> LyapunovResult:
    """Fiber exponents by orthonormalized products of avalanche matrices.

    The driving is i.i.d. uniform from the seed; size-0 events contribute
    identity factors (they count toward time but not toward the product).
    The standard error of the exponent sum is the batch-mean standard error
    of the avalanche size scaled by |log eps| (the per-event log-determinant
    is exactly size * log eps).
    """
    n = lattice.N
    ec = params.ec_float
    eps = params.eps_float
    delta = params.delta_float
    share = (1.0 - eps) / (2 * lattice.d)
    nbrs = [list(t) for t in lattice.neighbor_table]
    x = [float(v) for v in np.asarray(x0, dtype=np.float64)]
    if len(x) != n:
        raise ValueError(f"expected initial state of length {n}")
    cursor = ExcitationSource.iid(seed).cursor(n)

    q = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    sums = np.zeros(n)
    total_size = 0
    batch_size_sums = np.zeros(n_batches)
    period = max(1, renorm_period)
    since_renorm = 0
    batch_len = max(1, n_events // n_batches)

    def renorm():
        nonlocal q, since_renorm
        qq, rr = np.linalg.qr(np.array(q))
        d = np.abs(np.diag(rr))
        log_d = np.where(d > 0, np.log(np.maximum(d, 1e-300)), -math.inf)
        np.add(sums, log_d, out=sums)
        q = qq.tolist()
        since_renorm = 0

    for k in range(-burn_in, n_events):
        site = next(cursor)
        x[site] += delta
        if x[site] > ec:
            size_here = 0
            while True:
                over = [j for j in range(n) if x[j] > ec]
                if not over:
                    break
                size_here += len(over)
                if k >= 0:
                    # q <- S(over) q, rows updated in place
                    updates = {}
                    for j in over:
                        row = q[j]
                        for t in nbrs[j]:
                            tgt = updates.get(t)
                            if tgt is None:
                                updates[t] = [share * v for v in row]
                            else:
                                for c in range(n):
                                    tgt[c] += share * row[c]
                    for j in over:
                        q[j] = [eps * v for v in q[j]]
                    for t, add in updates.items():
                        rowt = q[t]
                        for c in range(n):
                            rowt[c] += add[c]
                    since_renorm += 1
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
            if k >= 0:
                total_size += size_here
                batch_size_sums[min(k // batch_len, n_batches - 1)] += size_here
                if since_renorm >= period:
                    renorm()
    if since_renorm:
        renorm()

    chis = np.sort(sums / n_events)[::-1]
    mean_size = total_size / n_events
    batch_means = batch_size_sums / batch_len
    size_se = float(np.std(batch_means, ddof=1) / math.sqrt(n_batches))
    log_eps = math.log(eps) if eps > 0 else -math.inf
    return LyapunovResult(
        chi_plus=math.log(n),
        chi_minus=tuple(float(c) for c in chis),
        sum_estimate=float(sums.sum() / n_events),
        mean_size=mean_size,
        sum_identity_value=mean_size * log_eps,
        sum_se=abs(log_eps) * size_se if math.isfinite(log_eps) else float("inf"),
        n_events=n_events,
        seed=seed,
        renorm_period=period,
    )


# ---------------------------------------------------------------------------
# contraction horizon
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContractionHorizon:
    horizon: int
    c: float
    method: str
    bound: float | None = None
    lower_bound_only: bool = False


def contraction_horizon(
    params: ModelParams,
    lattice: Lattice,
    c: float = 0.5,
    method: str = "sampled",
    atlas=None,
    n_samples: int = 200,
    seed: int = 7,
    max_events: int = 100_000,
    word_budget: int = 100_000,
) -> ContractionHorizon:
    """Least number of events after which avalanche-matrix products have
    1-norm below c (sampled along an orbit, or exhaustive over the atlas)."""
    if not 0 < c < 1:
        raise ValueError("need 0 < c < 1")
    bounds = compute_bounds(params, lattice)
    if method == "exhaustive":
        if atlas is None:
            raise ValueError("exhaustive method needs an atlas")
        return _exhaustive_horizon(atlas, c, word_budget)
    n = lattice.N
    ec = params.ec_float
    x = np.full(n, ec * 0.5)
    cursor = ExcitationSource.iid(seed).cursor(n)
    # collect per-event matrices along one orbit
    from .dynamics import return_map

    mats = []
    for _ in range(max_events):
        site = next(cursor)
        x, rec = return_map(x, site, params, lattice, collect_linear=True)
        mats.append(rec.linear_map)
        if len(mats) >= n_samples * 4:
            break
    rng = make_rng(seed + 1)
    horizon = 0
    for _ in range(n_samples):
        start = int(rng.integers(0, max(1, len(mats) - 1)))
        prod = np.eye(n)
        steps = 0
        for m in mats[start:]:
            prod = m @ prod
            steps += 1
            if np.max(np.abs(prod).sum(axis=0)) < c:
                break
        horizon = max(horizon, steps)
    k0 = math.ceil(math.log(c) / math.log(max(1e-12, 0.99))) + 1
    bound = 2 * k0 * bounds.excitation_cover_steps
    return ContractionHorizon(horizon=horizon, c=c, method="sampled", bound=bound)


def _exhaustive_horizon(atlas, c: float, word_budget: int) -> ContractionHorizon:
    n = atlas.lattice.N
    cube = atlas.cube()
    ident = exactla.identity(n)
    zero = tuple(Fraction(0) for _ in range(n))
    from .geometry.cylinders import _pulled_domain

    live = [(cube, ident, zero, np.eye(n))]
    depth = 0
    while live:
        depth += 1
        nxt = []
        for cell, lin, off, prod in live:
            for site in range(n):
                for piece in atlas.pieces_for(site):
                    new_cell = cell.with_constraints(
                        _pulled_domain(piece.domain, lin, off)
                    )
                    if not new_cell.is_full_dim():
                        continue
                    new_prod = exactla.mat_to_float(piece.linear) @ prod
                    if np.max(np.abs(new_prod).sum(axis=0)) < c:
                        continue  # absorbed: all extensions stay below c
                    nxt.append(
                        (
                            new_cell.pruned(),
                            exactla.mat_mul(piece.linear, lin),
                            exactla.vec_add(exactla.mat_vec(piece.linear, off), piece.offset),
                            new_prod,
                        )
                    )
            if len(nxt) > word_budget:
                return ContractionHorizon(
                    horizon=depth, c=c, method="exhaustive", lower_bound_only=True
                )
        live = nxt
    return ContractionHorizon(horizon=depth, c=c, method="exhaustive")


# ---------------------------------------------------------------------------
# entropy estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyEstimates:
    card_seq: tuple[int, ...]  # card(P^n), n = 1..len
    mult_seq: tuple[int, ...]
    h_sing_seq: tuple[float, ...]
    h_mult_seq: tuple[float, ...]
    enumerated_depth: int
    extended_to: int | None
    extension_order: int | None
    lambda_plus: float
    lambda_max: float
    lambda_min: float
    d_star: int
    buzzi_bound: float
    angular_bound: float
    truncated: bool = False

    def h_sing(self, n: int) -> float:
        return self.h_sing_seq[n - 1]

    def h_mult(self, n: int) -> float:
        return self.h_mult_seq[n - 1]


def entropy_estimates(
    atlas,
    n_max: int,
    enum_depth: int | None = None,
    certificate=None,
    word_budget: int = 200_000,
    product_samples: int = 400,
    seed: int = 11,
) -> EntropyEstimates:
    """Cylinder-growth and multiplicity sequences with stabilization extension.

    Enumeration is exact up to enum_depth.  When a removability certificate of
    order m <= enum_depth is supplied, the sequences extend exactly: beyond
    the certified order no cylinder ever splits or dies, so card multiplies by
    the site count each level and the multiplicity stays constant.
    """
    from .geometry.cylinders import enumerate_cylinders, level_multiplicity

    n_sites = atlas.lattice.N
    if enum_depth is None:
        enum_depth = min(n_max, 8)
    levels = enumerate_cylinders(atlas, enum_depth, word_budget=word_budget)
    truncated = any(lv.truncated for lv in levels)
    card_seq = [lv.count for lv in levels]
    mult_seq = [level_multiplicity(lv) for lv in levels]

    order = None
    if certificate is not None and getattr(certificate, "status", None) == "removable":
        order = certificate.order
    extended_to = None
    if order is not None and order <= len(card_seq) and not truncated:
        extended_to = n_max
        base = len(card_seq)
        base_card = card_seq[-1]
        base_mult = mult_seq[-1]
        for n in range(base + 1, n_max + 1):
            card_seq.append(base_card * n_sites ** (n - base))
            mult_seq.append(base_mult)

    h_sing = tuple(math.log(cnt) / (i + 1) for i, cnt in enumerate(card_seq))
    h_mult = tuple(math.log(m) / (i + 1) for i, m in enumerate(mult_seq))

    lam_plus, lam_max, lam_min = _expansion_rates(atlas, product_samples, seed)
    d_star = max((exactla.rank(p.linear) for p in atlas.all_pieces()), default=0)
    n_idx = min(n_max, len(h_sing)) - 1
    buzzi = lam_plus + h_mult[n_idx]
    angular = lam_plus + d_star * (d_star - 1) / 2 * (lam_max - lam_min)
    return EntropyEstimates(
        card_seq=tuple(card_seq),
        mult_seq=tuple(mult_seq),
        h_sing_seq=h_sing,
        h_mult_seq=h_mult,
        enumerated_depth=len(levels),
        extended_to=extended_to,
        extension_order=order,
        lambda_plus=lam_plus,
        lambda_max=lam_max,
        lambda_min=lam_min,
        d_star=d_star,
        buzzi_bound=buzzi,
        angular_bound=angular,
        truncated=truncated,
    )


def _expansion_rates(atlas, n_samples: int, seed: int) -> tuple[float, float, float]:
    """(lambda_plus, lambda_max, lambda_min) from sampled admissible products.

    The base factor expands by the site count; fiber maps are non-expanding,
    so lambda_plus is log N plus the (clamped at zero) fiber expansion rate.
    """
    n = atlas.lattice.N
    rng = make_rng(seed)
    pieces_by_site = [list(atlas.pieces_for(i)) for i in range(n)]
    mats_by_site = [
        [exactla.mat_to_float(p.linear) for p in pieces] for pieces in pieces_by_site
    ]
    window = 12
    lam_max = -math.inf
    lam_min = math.inf
    fiber_plus = -math.inf
    for _ in range(n_samples):
        prod = np.eye(n)
        for _ in range(window):
            site = int(rng.integers(0, n))
            opts = mats_by_site[site]
            prod = opts[int(rng.integers(0, len(opts)))] @ prod
        sv = np.linalg.svd(prod, compute_uv=False)
        smax = sv[0]
        pos = sv[sv > 1e-14]
        if smax > 0:
            lam_max = max(lam_max, math.log(smax) / window)
            fiber_plus = max(fiber_plus, math.log(smax) / window)
        if pos.size:
            lam_min = min(lam_min, math.log(pos[-1]) / window)
    lam_plus = math.log(n) + max(0.0, fiber_plus)
    return lam_plus, lam_max, lam_min


# ---------------------------------------------------------------------------
# entropy rescaling between the return model and the physical model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RescaledEntropy:
    h_return: float
    h_physical: float
    h_zhang: float
    mean_return_time: float
    omega_new: float


def rescale_entropy(
    h_return: float,
    mean_duration_all: float,
    mean_waiting: float,
    mean_duration_positive: float,
    hbar: float,
) -> RescaledEntropy:
    """Entropy of the physical model and of the reparametrized system.

    Convention: the mean return time to the stable set is one excitation step
    plus the mean avalanche duration over all events (zero for under-critical
    additions).  The reparametrized entropy scales the waiting time by hbar:
    omega_new = omega * hbar, and multiplies the return-model entropy by
    omega_new / (omega_new + mean positive duration).
    """
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    mean_return = 1.0 + mean_duration_all
    if mean_return <= 0:
        raise ValueError("nonpositive mean return time")
    omega_new = mean_waiting * hbar
    denom = omega_new + mean_duration_positive
    if denom <= 0:
        raise ValueError("nonpositive reparametrized denominator")
    return RescaledEntropy(
        h_return=h_return,
        h_physical=h_return / mean_return,
        h_zhang=h_return * omega_new / denom,
        mean_return_time=mean_return,
        omega_new=omega_new,
    )
