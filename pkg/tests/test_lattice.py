from fractions import Fraction as F

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from zhangsoc.lattice import (
    Lattice,
    ModelParams,
    SizeError,
    build_lattice,
    classify_params,
    manhattan_distance,
)


def test_smallest_lattice():
    lat = build_lattice(1, 2)
    assert lat.N == 2
    assert lat.boundary_flags == (True, True)
    assert all(len(nbrs) == 1 for nbrs in lat.neighbor_table)


def test_three_by_three_center():
    lat = build_lattice(2, 3)
    center = lat.site((2, 2))
    assert len(lat.neighbor_table[center]) == 4
    assert not lat.boundary_flags[center]
    assert sum(lat.boundary_flags) == 8


def test_ten_by_ten_diameter():
    lat = build_lattice(2, 10)
    assert lat.N == 100
    assert lat.diam == 18
    assert manhattan_distance(lat, lat.site((1, 1)), lat.site((10, 10))) == 18


def test_adjacent_distance():
    lat = build_lattice(2, 3)
    assert manhattan_distance(lat, lat.site((1, 1)), lat.site((2, 1))) == 1


def test_neighbor_symmetry_irreflexive():
    for d, L in ((1, 5), (2, 4), (3, 3)):
        lat = build_lattice(d, L)
        for i, nbrs in enumerate(lat.neighbor_table):
            assert i not in nbrs
            for j in nbrs:
                assert i in lat.neighbor_table[j]
                assert manhattan_distance(lat, i, j) == 1


@pytest.mark.parametrize("d,L", [(1, 7), (2, 5), (3, 4)])
def test_boundary_count_formula(d, L):
    lat = build_lattice(d, L)
    assert sum(lat.boundary_flags) == L**d - (L - 2) ** d


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from([(1, 8), (2, 5), (2, 10)]),
    st.data(),
)
def test_metric_axioms(shape, data):
    d, L = shape
    lat = build_lattice(d, L)
    i = data.draw(st.integers(0, lat.N - 1))
    j = data.draw(st.integers(0, lat.N - 1))
    k = data.draw(st.integers(0, lat.N - 1))
    dij = manhattan_distance(lat, i, j)
    assert dij == manhattan_distance(lat, j, i)
    assert (dij == 0) == (i == j)
    assert manhattan_distance(lat, i, k) <= dij + manhattan_distance(lat, j, k)


def test_metric_exhaustive_small():
    lat = build_lattice(2, 10)  # N = 100
    import itertools

    for i, j in itertools.combinations(range(0, lat.N, 7), 2):
        assert manhattan_distance(lat, i, j) == manhattan_distance(lat, j, i)


def test_size_guard():
    with pytest.raises(SizeError):
        build_lattice(9, 2**8)
    with pytest.raises(ValueError):
        build_lattice(0, 3)


def test_invalid_site_index():
    lat = build_lattice(1, 3)
    with pytest.raises(IndexError):
        manhattan_distance(lat, 0, 3)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(ec=F(1), eps=F(1))
    with pytest.raises(ValueError):
        ModelParams(ec=F(0), eps=F(0))
    with pytest.raises(TypeError):
        ModelParams(ec=0.5, eps=F(0))  # floats are refused for exact fields
    p = ModelParams(ec="7/2", eps="0.5")
    assert p.ec == F(7, 2) and p.eps == F(1, 2)


def test_classify_example_a_point():
    lat = build_lattice(1, 2)
    region = classify_params(ModelParams(ec=F(7, 2), eps=F(1, 2)), lat)
    assert region.no_adjacent_overcritical
    assert region.invertibility_guaranteed
    assert region.top_domain_n2


def test_classify_eps_zero_boundary():
    region = classify_params(ModelParams(ec=F(5), eps=F(0)))
    assert region.no_adjacent_overcritical  # 5 >= 0
    assert not region.invertibility_guaranteed  # eps = 0 excluded


def test_classify_below_threshold():
    region = classify_params(ModelParams(ec=F(1, 3), eps=F(1, 3)))
    assert not region.no_adjacent_overcritical  # 1/3 < 1/2
    assert not region.invertibility_guaranteed
