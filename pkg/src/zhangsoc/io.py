"""Serialization: CSV/JSON emitters, the binary snapshot format, manifests.

All floats are written with 17 significant digits; exact rationals are
written as "p/q" strings.  Formats are documented in docs/SCHEMAS.md.
"""

from __future__ import annotations

import hashlib
import json
import struct
from fractions import Fraction
from pathlib import Path

import numpy as np

from .dynamics import RNG_ALGORITHM, EventTable
from .lattice import Lattice, ModelParams

ARTIFACT_VERSION = "zhangsoc-0.1.0"
SNAPSHOT_MAGIC = b"ZSOCSNAP1\n"


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def frac_str(x) -> str:
    return str(Fraction(x))


# ---------------------------------------------------------------------------
# event streams
# ---------------------------------------------------------------------------


def write_events_csv(path, table: EventTable) -> None:
    waits = table.waiting_times
    with open(path, "w") as fh:
        fh.write("event_index,start_site,duration,size,waiting_time\n")
        for k in range(len(table)):
            fh.write(
                f"{k},{int(table.start_sites[k])},{int(table.durations[k])},"
                f"{int(table.sizes[k])},{int(waits[k])}\n"
            )


# ---------------------------------------------------------------------------
# binary snapshots
# ---------------------------------------------------------------------------


def write_snapshot(path, x: np.ndarray, params: ModelParams, lattice: Lattice) -> None:
    """Little-endian snapshot: magic, ASCII header line
    'd=<d> L=<L> Ec=<p/q> eps=<p/q> delta=<p/q>' and N float64 energies."""
    x = np.asarray(x, dtype="<f8")
    header = (
        f"d={lattice.d} L={lattice.L} Ec={params.ec} eps={params.eps} "
        f"delta={params.delta}\n"
    ).encode()
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(header)
        fh.write(struct.pack("<q", lattice.N))
        fh.write(x.tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValueError("not a snapshot file")
        header = b""
        while not header.endswith(b"\n"):
            b = fh.read(1)
            if not b:
                raise ValueError("truncated snapshot header")
            header += b
        fields = dict(kv.split("=") for kv in header.decode().strip().split())
        (n,) = struct.unpack("<q", fh.read(8))
        data = np.frombuffer(fh.read(8 * n), dtype="<f8")
    return data, fields


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


def _constraint_json(c):
    return {
        "coeffs": [frac_str(v) for v in c.coeffs],
        "bound": frac_str(c.bound),
        "strict": bool(c.strict),
    }


def atlas_to_json(atlas) -> dict:
    return {
        "version": ARTIFACT_VERSION,
        "model": {
            "d": atlas.lattice.d,
            "L": atlas.lattice.L,
            "Ec": frac_str(atlas.params.ec),
            "eps": frac_str(atlas.params.eps),
            "delta": frac_str(atlas.params.delta),
        },
        "complete": atlas.complete,
        "pieces": [
            [
                {
                    "site": p.site,
                    "signature": [sorted(c) for c in p.signature],
                    "duration": p.duration,
                    "size": p.size,
                    "linear": [[frac_str(v) for v in row] for row in p.linear],
                    "offset": [frac_str(v) for v in p.offset],
                    "domain": [_constraint_json(c) for c in p.domain.constraints],
                }
                for p in site_pieces
            ]
            for site_pieces in atlas.pieces
        ],
    }


def regionset_to_json(rs) -> dict:
    out = {"version": ARTIFACT_VERSION, "budget_exceeded": rs.budget_exceeded, "regions": []}
    for r in rs.regions:
        item = {
            "carrier_dim": r.carrier_dim,
            "constraints": [_constraint_json(c) for c in r.poly.constraints],
        }
        if r.point is not None:
            item["point"] = [frac_str(v) for v in r.point]
            item["basis"] = [[frac_str(v) for v in b] for b in r.basis]
        out["regions"].append(item)
    return out


def write_region_loops_csv(path, rs) -> None:
    """Vertex loops of two-dimensional region sets, for plotting."""
    with open(path, "w") as fh:
        fh.write("region_id,vertex_index,x,y,x_exact,y_exact\n")
        for rid, region in enumerate(rs.regions):
            verts = region.vertices()
            if len(verts) > 2:
                from .geometry.polytope import convex_hull_2d

                verts = convex_hull_2d(verts)
            for vi, v in enumerate(verts):
                fh.write(
                    f"{rid},{vi},{fmt_float(v[0])},{fmt_float(v[1])},"
                    f"{frac_str(v[0])},{frac_str(v[1])}\n"
                )


def matrix_to_triplets(tm) -> str:
    """Sparse triplet text: header then 'row col 1' lines (sorted)."""
    lines = [f"# size {tm.size} {tm.size}"]
    for i, row in enumerate(tm.entries):
        for j, v in enumerate(row):
            if v:
                lines.append(f"{i} {j} 1")
    return "\n".join(lines) + "\n"


def write_bifurcation_csv(path, cells) -> None:
    with open(path, "w") as fh:
        fh.write("eps,Ec,signature_id,piece_count,complete\n")
        for c in cells:
            fh.write(
                f"{frac_str(c.eps)},{frac_str(c.ec)},{c.signature_id},"
                f"{c.piece_count},{int(c.complete)}\n"
            )


def write_raster_csv(path, frames, L: int, d: int) -> None:
    """d=2 energy rasters: frame,row,col,energy."""
    with open(path, "w") as fh:
        fh.write("frame,row,col,energy\n")
        for fi, frame in enumerate(frames):
            grid = np.asarray(frame).reshape((L,) * d)
            if d != 2:
                raise ValueError("raster output is for d=2 snapshots")
            for r in range(L):
                for c in range(L):
                    fh.write(f"{fi},{r},{c},{fmt_float(grid[r, c])}\n")


def write_histogram_csv(path, hist: np.ndarray, name: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"{name},count\n")
        for value, count in enumerate(hist):
            if count:
                fh.write(f"{value},{int(count)}\n")


def write_sweep_csv(path, sweep) -> None:
    with open(path, "w") as fh:
        fh.write(
            "axis_value,n_events,n_positive,mean_duration,mean_waiting,"
            "mean_size_all,mean_size_positive,max_duration,max_waiting,max_size\n"
        )
        for cell in sweep.cells:
            s = cell.stats
            fh.write(
                f"{fmt_float(cell.axis_value)},{s.n_events},{s.n_positive},"
                f"{fmt_float(s.mean_duration)},{fmt_float(s.mean_waiting)},"
                f"{fmt_float(s.mean_size_all)},{fmt_float(s.mean_size_positive)},"
                f"{s.max_duration},{s.max_waiting},{s.max_size}\n"
            )


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


def write_manifest(path, config_dict: dict, outputs: dict[str, str]) -> None:
    """Manifest sufficient to re-run bit-identically: resolved config, rng
    algorithm, artifact version and output digests."""
    manifest = {
        "artifact_version": ARTIFACT_VERSION,
        "rng_algorithm": RNG_ALGORITHM,
        "config": config_dict,
        "outputs": outputs,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
