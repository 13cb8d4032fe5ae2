import sys
from fractions import Fraction as F
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from zhangsoc.lattice import ModelParams, build_lattice
from zhangsoc.geometry import build_atlas


@pytest.fixture(scope="session")
def two_site_lattice():
    return build_lattice(1, 2)


@pytest.fixture(scope="session")
def example_a_params():
    return ModelParams(ec=F(7, 2), eps=F(1, 2))


@pytest.fixture(scope="session")
def example_b_params():
    return ModelParams(ec=F(1, 3), eps=F(1, 3))


@pytest.fixture(scope="session")
def example_c_params():
    return ModelParams(ec=F(1, 3), eps=F(1, 2))


@pytest.fixture(scope="session")
def example_d_params():
    return ModelParams(ec=F(7), eps=F(1, 2))


@pytest.fixture(scope="session")
def example_a_atlas(two_site_lattice, example_a_params):
    return build_atlas(example_a_params, two_site_lattice)


@pytest.fixture(scope="session")
def example_b_atlas(two_site_lattice, example_b_params):
    return build_atlas(example_b_params, two_site_lattice)


@pytest.fixture(scope="session")
def example_c_atlas(two_site_lattice, example_c_params):
    return build_atlas(example_c_params, two_site_lattice)


@pytest.fixture(scope="session")
def example_d_atlas(two_site_lattice, example_d_params):
    return build_atlas(example_d_params, two_site_lattice)


class _CPipeline:
    """Example C exact pipeline, computed once and shared across tests."""

    def __init__(self, atlas):
        import time

        from zhangsoc.geometry.regions import (
            refinement_cells,
            step_regions,
            connected_components,
        )
        from zhangsoc.geometry.removability import regions_clear
        from zhangsoc.geometry import markov_coding, chain_statistics

        start = time.time()
        self.atlas = atlas
        facets = atlas.singular_facets()
        rs = refinement_cells(atlas)
        self.order = None
        for m in range(1, 7):
            rs = step_regions(atlas, rs)
            if regions_clear(rs, facets):
                self.order = m
                break
        self.regions = rs
        self.components = connected_components(rs, facets, atlas=atlas)
        self.matrix = markov_coding(atlas, rs, components=self.components)
        self.chain = chain_statistics(self.matrix)
        self.elapsed = time.time() - start


@pytest.fixture(scope="session")
def example_c_pipeline(example_c_atlas):
    return _CPipeline(example_c_atlas)


def make_synthetic_ifs_atlas(
    ratio=F(1, 3), offsets=((F(1, 20), F(1, 20)), (F(3, 5), F(3, 5)))
):
    """Strictly contracting two-map IFS dressed up as a continuity atlas.

    Each site has a single piece covering the unit cube with the affine map
    x -> ratio * x + ratio * offset-translate; used by perturbation and
    dimension tests.
    """
    from zhangsoc.geometry.atlas import AtlasPiece, ContinuityAtlas
    from zhangsoc.geometry.polytope import Polytope

    lattice = build_lattice(1, 2)
    params = ModelParams(ec=F(1), eps=F(1, 2))
    cube = Polytope.cube(2, 0, 1)
    pieces = []
    for site, off in enumerate(offsets):
        linear = ((ratio, F(0)), (F(0), ratio))
        piece = AtlasPiece(
            site=site,
            signature=(frozenset({site}),),
            domain=cube,
            linear=linear,
            offset=tuple(off),
        )
        pieces.append((piece,))
    return ContinuityAtlas(params=params, lattice=lattice, pieces=tuple(pieces))


@pytest.fixture()
def synthetic_ifs_atlas():
    return make_synthetic_ifs_atlas()
