"""Run the full exact pipeline at candidate parameters and print the
fingerprint (pieces, removability order, components, coding, Parry mean)."""

import sys
import time
from fractions import Fraction as F

sys.path.insert(0, "/root/pkg/src")

from zhangsoc.lattice import build_lattice, ModelParams
from zhangsoc.geometry import build_atlas, markov_coding, chain_statistics
from zhangsoc.geometry.regions import (
    refinement_cells,
    step_regions,
    connected_components,
)
from zhangsoc.geometry.removability import regions_clear


def fingerprint(ec, eps, max_n=7):
    lat = build_lattice(1, 2)
    p = ModelParams(ec=ec, eps=eps)
    atlas = build_atlas(p, lat)
    print(f"== Ec={ec} eps={eps}: pieces/site {[len(s) for s in atlas.pieces]}, "
          f"sizes {sorted(q.size for q in atlas.pieces[0])}", flush=True)
    facets = atlas.singular_facets()
    rs = refinement_cells(atlas)
    order = None
    for n in range(1, max_n + 1):
        t1 = time.time()
        rs = step_regions(atlas, rs)
        clear = regions_clear(rs, facets)
        print(f"  U{n}: {len(rs)} regions, clear={clear} ({time.time()-t1:.1f}s)", flush=True)
        if clear:
            order = n
            break
    if order is None:
        print("  no clearance up to", max_n)
        return
    t1 = time.time()
    comps = connected_components(rs, facets, atlas=atlas)
    print(f"  removable({order}); components: {len(comps)} ({time.time()-t1:.1f}s)", flush=True)
    t1 = time.time()
    tm = markov_coding(atlas, rs, components=comps)
    st = chain_statistics(tm)
    print(f"  coding: {tm.size}x{tm.size} valid={tm.coding_valid} transitive={tm.transitive} "
          f"radius={tm.radius_exact} rowsums={sorted(set(tm.row_sums()))} ({time.time()-t1:.1f}s)")
    print(f"  parry mean size = {st.mean_size}  mean duration = {st.mean_duration}", flush=True)


if __name__ == "__main__":
    ec = F(sys.argv[1])
    eps = F(sys.argv[2])
    max_n = int(sys.argv[3]) if len(sys.argv) > 3 else 7
    fingerprint(ec, eps, max_n)
