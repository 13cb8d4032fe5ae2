import math
from fractions import Fraction as F

import numpy as np
import pytest

from zhangsoc.dynamics import EventTable, ExcitationSource, make_rng, simulate_events
from zhangsoc.lattice import ModelParams, build_lattice
from zhangsoc.stats import (
    avalanche_statistics,
    maximal_avalanche,
    powerlaw_fit,
    sample_discrete_powerlaw,
    scaling_sweep,
    thermo_rescale,
)


def table_from(sizes, durations=None):
    sizes = np.asarray(sizes, dtype=np.int64)
    if durations is None:
        durations = np.where(sizes > 0, 1, 0)
    return EventTable(
        start_sites=np.zeros(len(sizes), dtype=np.int32),
        durations=np.asarray(durations, dtype=np.int64),
        sizes=sizes,
        final_state=np.zeros(2),
    )


def test_consistency_identity():
    st = avalanche_statistics(table_from([0, 0, 3, 0, 2, 5]))
    assert st.mean_size_all == pytest.approx(
        st.mean_size_positive * st.n_positive / st.n_events
    )
    assert st.mean_size_all <= st.mean_size_positive
    assert st.mean_waiting >= 1
    assert st.size_hist.sum() == st.n_positive
    assert st.duration_hist.sum() == st.n_positive


def test_all_zero_stream_flagged():
    st = avalanche_statistics(table_from([0, 0, 0]))
    assert st.mean_size_all == 0
    assert math.isnan(st.mean_size_positive)
    assert "no-positive-events" in st.flags


def test_empty_stream():
    st = avalanche_statistics(table_from([]))
    assert "empty-stream" in st.flags


def test_driven_run_statistics():
    lat = build_lattice(1, 2)
    p = ModelParams(ec=F(7, 2), eps=F(1, 2))
    table = simulate_events(np.zeros(2), p, lat, 50_000, ExcitationSource.iid(1), burn_in=1000)
    st = avalanche_statistics(table)
    assert abs(st.mean_size_all - 1.0) < 0.05  # three-point attractor value
    assert st.mean_waiting >= 1


def test_maximal_avalanche_single_site():
    p = ModelParams(ec=F(7), eps=F(1, 2))
    res = maximal_avalanche(1, 1, p)
    lat = build_lattice(1, 1)
    from zhangsoc.relaxation import compute_bounds

    assert res.duration <= compute_bounds(p, lat).duration_bound
    assert res.size >= 1


def test_maximal_avalanche_d1_scaling():
    p = ModelParams(ec=F(7), eps=F(1, 2))
    for L in (64, 128):
        res = maximal_avalanche(1, L, p)
        assert 0.7 <= res.duration / L <= 1.3
        assert 0.7 <= res.size / (L * L / 4) <= 1.3


def test_maximal_avalanche_frames_d2():
    p = ModelParams(ec=F(7), eps=F(1, 2))
    res = maximal_avalanche(2, 10, p, frame_every=3)
    assert res.frames
    assert all(f.shape == (100,) for f in res.frames)
    # first stage spreads as a diamond in the Manhattan metric: the set of
    # overcritical sites in an early frame is within distance t of the center
    lat = build_lattice(2, 10)
    center = lat.site((5, 5))
    frame = res.frames[0]
    over = np.flatnonzero(frame > p.ec_float)
    from zhangsoc.lattice import manhattan_distance

    assert all(manhattan_distance(lat, center, int(s)) <= 3 for s in over)


def test_scaling_sweep_validation():
    p = ModelParams(ec=F(8), eps=F(1, 4))
    with pytest.raises(ValueError):
        scaling_sweep("L", [8, 16], 1, p)
    with pytest.raises(ValueError):
        scaling_sweep("Ec", [1, 2, 4, 10], 1, p)  # missing L
    short = scaling_sweep("L", [4, 5, 6, 8], 1, p, events=2000)
    assert any("decade" in f for f in short.flags)


def test_powerlaw_fit_oracle():
    samples = sample_discrete_powerlaw(1.5, 30_000, seed=5)
    fit = powerlaw_fit(samples, n_bootstrap=20, seed=6)
    assert abs(fit.exponent - 1.5) < 0.05
    assert fit.ci_low <= fit.exponent <= fit.ci_high
    assert not fit.poor_fit


def test_powerlaw_rejects_exponential_tail():
    rng = make_rng(8)
    samples = rng.geometric(0.2, size=30_000)
    fit = powerlaw_fit(samples, n_bootstrap=10, seed=9)
    assert fit.poor_fit


def test_powerlaw_rejects_constant():
    with pytest.raises(ValueError):
        powerlaw_fit(np.full(5000, 7))


def test_thermo_rescale_identity():
    st = avalanche_statistics(table_from([0, 2, 0, 0, 3], durations=[0, 2, 0, 0, 3]))
    out = thermo_rescale(st, 1.0)
    assert out.mean_waiting_new == pytest.approx(st.mean_waiting)
    assert 0 < out.driving_ratio < 1
    with pytest.raises(ValueError):
        thermo_rescale(st, 0.0)
