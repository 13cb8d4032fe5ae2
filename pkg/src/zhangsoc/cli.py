"""Command line front end with reproducible run manifests.

Every run writes its outputs plus a manifest.json echoing the resolved
configuration; re-running with the same configuration and seed reproduces
the outputs byte for byte.  Exit codes: 0 success, 1 domain error, 2 budget
exhausted (partial outputs are written and flagged).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import io as zio
from .config import RunConfig
from .dynamics import ExcitationSource, simulate_events
from .lattice import ModelParams, build_lattice, classify_params

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_BUDGET = 2

TASKS = (
    "simulate",
    "atlas",
    "regions",
    "removability",
    "coding",
    "lyapunov",
    "entropy",
    "dimension",
    "sweep",
    "maximal",
    "bifurcation",
    "rescale",
)


def _add_model_flags(sp):
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--L", type=int, default=2)
    sp.add_argument("--Ec", type=str, default="1")
    sp.add_argument("--eps", type=str, default="0")
    sp.add_argument("--delta", type=str, default="1")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--config", type=str, default=None, help="INI config or manifest file")
    sp.add_argument("--piece-budget", type=int, default=None)
    sp.add_argument("--region-budget", type=int, default=None)
    sp.add_argument("--word-budget", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zhangsoc", description=__doc__)
    sub = ap.add_subparsers(dest="task", required=True)

    sp = sub.add_parser("simulate", help="driven run; events CSV + statistics")
    _add_model_flags(sp)
    sp.add_argument("--events", type=int, default=0)
    sp.add_argument("--burn-in", type=int, default=0)

    sp = sub.add_parser("atlas", help="exact continuity atlas to JSON")
    _add_model_flags(sp)
    sp.add_argument("--tau-cap", type=int, default=None)

    sp = sub.add_parser("regions", help="iterated region sets")
    _add_model_flags(sp)
    sp.add_argument("--max-n", type=int, default=5)

    sp = sub.add_parser("removability", help="removability certificate")
    _add_model_flags(sp)
    sp.add_argument("--max-n", type=int, default=25)

    sp = sub.add_parser("coding", help="Markov coding over the certified regions")
    _add_model_flags(sp)
    sp.add_argument("--max-n", type=int, default=6)

    sp = sub.add_parser("lyapunov", help="fiber Lyapunov spectrum")
    _add_model_flags(sp)
    sp.add_argument("--events", type=int, default=100000)
    sp.add_argument("--renorm", type=int, default=5)

    sp = sub.add_parser("entropy", help="cylinder growth and multiplicity")
    _add_model_flags(sp)
    sp.add_argument("--n-max", type=int, default=200)
    sp.add_argument("--enum-depth", type=int, default=6)
    sp.add_argument("--cert-max-n", type=int, default=8)

    sp = sub.add_parser("dimension", help="attractor cloud and box dimension")
    _add_model_flags(sp)
    sp.add_argument("--mode", choices=("orbit", "ifs"), default="orbit")
    sp.add_argument("--points", type=int, default=100000)
    sp.add_argument("--transient", type=int, default=10000)
    sp.add_argument("--moran", action="store_true", help="include atlas Moran bounds")

    sp = sub.add_parser("sweep", help="scaling sweep over L or Ec")
    _add_model_flags(sp)
    sp.add_argument("--axis", choices=("L", "Ec"), required=True)
    sp.add_argument("--grid", type=str, required=True, help="comma separated values")
    sp.add_argument("--events", type=int, default=100000)

    sp = sub.add_parser("maximal", help="avalanche from the all-critical state")
    _add_model_flags(sp)
    sp.add_argument("--frames-every", type=int, default=0)

    sp = sub.add_parser("bifurcation", help="avalanche-type map over a parameter grid")
    _add_model_flags(sp)
    sp.add_argument("--eps-grid", type=str, required=True)
    sp.add_argument("--ec-grid", type=str, required=True)
    sp.add_argument("--depth", type=int, default=None)

    sp = sub.add_parser("rescale", help="entropy/time reparametrization bookkeeping")
    _add_model_flags(sp)
    sp.add_argument("--h-return", type=float, required=True)
    sp.add_argument("--mean-duration-all", type=float, required=True)
    sp.add_argument("--mean-waiting", type=float, required=True)
    sp.add_argument("--mean-duration-positive", type=float, required=True)
    sp.add_argument("--hbar", type=float, required=True)
    return ap


def _config_from_args(args) -> RunConfig:
    if args.config:
        text = Path(args.config).read_text()
        if text.lstrip().startswith("{"):
            manifest = json.loads(text)
            cfg = RunConfig(**_config_kwargs_from_dict(manifest["config"]))
        else:
            cfg = RunConfig.from_ini(text)
        return cfg
    task_params = {}
    skip = {
        "task", "d", "L", "Ec", "eps", "delta", "seed", "out", "config",
        "piece_budget", "region_budget", "word_budget",
    }
    for key, value in vars(args).items():
        if key not in skip and value is not None:
            task_params[key] = value
    cfg = RunConfig(
        task=args.task,
        d=args.d,
        L=args.L,
        ec=args.Ec,
        eps=args.eps,
        delta=args.delta,
        seed=args.seed,
        output_dir=args.out or "out",
        task_params=task_params,
    )
    if args.piece_budget is not None:
        cfg.piece_budget = args.piece_budget
    if args.region_budget is not None:
        cfg.region_budget = args.region_budget
    if args.word_budget is not None:
        cfg.word_budget = args.word_budget
    return cfg


def _config_kwargs_from_dict(d: dict) -> dict:
    out = dict(d)
    out.setdefault("task_params", {})
    return out


def cli_dispatch(argv) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_DOMAIN if e.code else EXIT_OK
    try:
        cfg = _config_from_args(args)
        return _run(cfg)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def _run(cfg: RunConfig) -> int:
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    params = cfg.model_params()
    lattice = cfg.lattice()
    outputs: dict[str, str] = {}
    budget_hit = False
    tp = cfg.task_params

    def emit(name: str, writer) -> Path:
        path = outdir / name
        writer(path)
        outputs[name] = zio.file_digest(path)
        return path

    def emit_json(name: str, payload) -> Path:
        def w(path):
            with open(path, "w") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True, default=str)
                fh.write("\n")
        return emit(name, w)

    if cfg.task == "simulate":
        events = int(tp.get("events", 0))
        burn = int(tp.get("burn_in", 0))
        table = simulate_events(
            np.zeros(lattice.N), params, lattice, events,
            ExcitationSource.iid(cfg.seed), burn_in=burn,
        )
        emit("events.csv", lambda p: zio.write_events_csv(p, table))
        emit("final_state.snap", lambda p: zio.write_snapshot(p, table.final_state, params, lattice))
        from .stats import avalanche_statistics

        st = avalanche_statistics(table)
        emit_json("stats.json", _stats_json(st))

    elif cfg.task == "atlas":
        from .geometry import build_atlas

        atlas = build_atlas(params, lattice, tau_cap=tp.get("tau_cap"), piece_budget=cfg.piece_budget)
        budget_hit = not atlas.complete
        emit_json("atlas.json", zio.atlas_to_json(atlas))

    elif cfg.task == "regions":
        from .geometry import build_atlas
        from .geometry.regions import iterate_regions

        atlas = build_atlas(params, lattice, piece_budget=cfg.piece_budget)
        sets = iterate_regions(atlas, int(tp.get("max_n", 5)), region_budget=cfg.region_budget)
        budget_hit = any(s.budget_exceeded for s in sets) or not atlas.complete
        emit_json("regions.json", zio.regionset_to_json(sets[-1]))
        emit_json("region_counts.json", {"counts": [len(s) for s in sets]})
        if lattice.N == 2:
            emit("region_loops.csv", lambda p: zio.write_region_loops_csv(p, sets[-1]))

    elif cfg.task == "removability":
        from .geometry import build_atlas
        from .geometry.removability import removability_certificate

        atlas = build_atlas(params, lattice, piece_budget=cfg.piece_budget)
        res = removability_certificate(
            atlas, max_n=int(tp.get("max_n", 25)), region_budget=cfg.region_budget
        )
        payload = {"status": res.status, "order": res.order, "checked_up_to": res.checked_up_to}
        if res.witness is not None:
            payload["witness"] = _witness_json(res.witness)
        emit_json("removability.json", payload)

    elif cfg.task == "coding":
        from .geometry import build_atlas, markov_coding, chain_statistics
        from .geometry.regions import refinement_cells, step_regions
        from .geometry.removability import regions_clear

        atlas = build_atlas(params, lattice, piece_budget=cfg.piece_budget)
        facets = atlas.singular_facets()
        rs = refinement_cells(atlas)
        order = None
        for m in range(1, int(tp.get("max_n", 6)) + 1):
            rs = step_regions(atlas, rs, budget=cfg.region_budget)
            if rs.budget_exceeded:
                budget_hit = True
                break
            if regions_clear(rs, facets):
                order = m
                break
        if order is None:
            emit_json("coding.json", {"error": "no removability clearance within max-n"})
            zio.write_manifest(outdir / "manifest.json", cfg.to_dict(), outputs)
            return EXIT_BUDGET if budget_hit else EXIT_DOMAIN
        tm = markov_coding(atlas, rs)
        st = chain_statistics(tm)
        emit("matrix.txt", lambda p: Path(p).write_text(zio.matrix_to_triplets(tm)))
        emit_json("coding.json", {
            "order": order,
            "size": tm.size,
            "components": tm.component_count,
            "coding_valid": tm.coding_valid,
            "transitive": tm.transitive,
            "spectral_radius": tm.spectral_radius,
            "radius_exact": tm.radius_exact,
            "entropy": st.entropy,
            "mean_size": str(st.mean_size) if st.mean_size is not None else None,
            "mean_duration": str(st.mean_duration) if st.mean_duration is not None else None,
            "state_sizes": list(tm.state_sizes),
            "warnings": list(tm.warnings),
        })

    elif cfg.task == "lyapunov":
        from .spectral import lyapunov_spectrum

        res = lyapunov_spectrum(
            np.zeros(lattice.N), params, lattice,
            n_events=int(tp.get("events", 100000)), seed=cfg.seed,
            renorm_period=int(tp.get("renorm", 5)),
        )
        emit_json("lyapunov.json", {
            "chi_plus": res.chi_plus,
            "chi_minus": list(res.chi_minus),
            "sum_estimate": res.sum_estimate,
            "mean_size": res.mean_size,
            "sum_identity_value": res.sum_identity_value,
            "sum_se": res.sum_se,
            "n_events": res.n_events,
            "seed": res.seed,
        })

    elif cfg.task == "entropy":
        from .geometry import build_atlas
        from .geometry.removability import removability_certificate
        from .spectral import entropy_estimates

        atlas = build_atlas(params, lattice, piece_budget=cfg.piece_budget)
        cert = removability_certificate(
            atlas, max_n=int(tp.get("cert_max_n", 8)), region_budget=cfg.region_budget
        )
        est = entropy_estimates(
            atlas, n_max=int(tp.get("n_max", 200)),
            enum_depth=int(tp.get("enum_depth", 6)),
            certificate=cert, word_budget=cfg.word_budget,
        )
        budget_hit = est.truncated
        emit("entropy.csv", lambda p: _write_entropy_csv(p, est))
        emit_json("entropy.json", {
            "certificate": cert.status,
            "order": cert.order,
            "enumerated_depth": est.enumerated_depth,
            "extended_to": est.extended_to,
            "lambda_plus": est.lambda_plus,
            "lambda_max": est.lambda_max,
            "lambda_min": est.lambda_min,
            "d_star": est.d_star,
            "buzzi_bound": est.buzzi_bound,
            "angular_bound": est.angular_bound,
            "h_sing_final": est.h_sing_seq[-1],
            "h_mult_final": est.h_mult_seq[-1],
        })

    elif cfg.task == "dimension":
        from .dimension import attractor_sample, box_dimension

        cloud = attractor_sample(
            params, lattice, mode=tp.get("mode", "orbit"),
            n_transient=int(tp.get("transient", 10000)),
            n_points=int(tp.get("points", 100000)), seed=cfg.seed,
        )
        lo, hi = box_dimension(cloud, seed=cfg.seed)
        payload = {"box_lower": lo, "box_upper": hi, "points": int(cloud.shape[0])}
        if tp.get("moran") and lattice.N <= 4:
            from .geometry import build_atlas
            from .dimension import moran_bounds, singular_value_inputs

            atlas = build_atlas(params, lattice, piece_budget=cfg.piece_budget)
            inputs = singular_value_inputs(atlas)
            ml, mu = moran_bounds(inputs)
            payload.update({
                "moran_lower": ml,
                "moran_upper": mu,
                "moran_note": "lower bound conditional on supplied multiplicities",
            })
        emit_json("dimension.json", payload)

    elif cfg.task == "sweep":
        from .stats import scaling_sweep

        grid = [Fraction(g) for g in str(tp.get("grid")).split(",")]
        axis = tp.get("axis")
        res = scaling_sweep(
            axis, grid, cfg.d, params, L=cfg.L,
            events=int(tp.get("events", 100000)), seed=cfg.seed,
        )
        budget_hit = bool(res.flags)
        emit("sweep.csv", lambda p: zio.write_sweep_csv(p, res))
        emit_json("slopes.json", {
            k: {"slope": v[0], "stderr": v[1]} for k, v in res.slopes.items()
        })

    elif cfg.task == "maximal":
        from .stats import maximal_avalanche

        res = maximal_avalanche(
            cfg.d, cfg.L, params, frame_every=int(tp.get("frames_every", 0))
        )
        emit_json("maximal.json", {"duration": res.duration, "size": res.size})
        if res.frames and cfg.d == 2:
            emit("frames.csv", lambda p: zio.write_raster_csv(p, res.frames, cfg.L, cfg.d))

    elif cfg.task == "bifurcation":
        from .geometry.bifurcation import bifurcation_scan

        eps_grid = [Fraction(g) for g in str(tp.get("eps_grid")).split(",")]
        ec_grid = [Fraction(g) for g in str(tp.get("ec_grid")).split(",")]
        cells = bifurcation_scan(
            eps_grid, ec_grid, lattice,
            tau_cap=tp.get("depth"), piece_budget=cfg.piece_budget,
        )
        budget_hit = any(not c.complete for c in cells)
        emit("bifurcation.csv", lambda p: zio.write_bifurcation_csv(p, cells))

    elif cfg.task == "rescale":
        from .spectral import rescale_entropy

        res = rescale_entropy(
            float(tp.get("h_return")),
            float(tp.get("mean_duration_all")),
            float(tp.get("mean_waiting")),
            float(tp.get("mean_duration_positive")),
            float(tp.get("hbar")),
        )
        emit_json("rescale.json", {
            "h_return": res.h_return,
            "h_physical": res.h_physical,
            "h_zhang": res.h_zhang,
            "mean_return_time": res.mean_return_time,
            "omega_new": res.omega_new,
        })

    else:
        raise ValueError(f"unknown task {cfg.task!r}")

    zio.write_manifest(outdir / "manifest.json", cfg.to_dict(), outputs)
    (outdir / "config.ini").write_text(cfg.to_ini())
    return EXIT_BUDGET if budget_hit else EXIT_OK


def _stats_json(st) -> dict:
    return {
        "n_events": st.n_events,
        "n_positive": st.n_positive,
        "mean_duration": st.mean_duration,
        "mean_waiting": st.mean_waiting,
        "mean_size_all": st.mean_size_all,
        "mean_size_positive": st.mean_size_positive,
        "mean_duration_all": st.mean_duration_all,
        "max_duration": st.max_duration,
        "max_waiting": st.max_waiting,
        "max_size": st.max_size,
        "flags": list(st.flags),
    }


def _witness_json(w) -> dict:
    return {
        "base_point": [str(v) for v in w.base_point],
        "orbit": [[str(v) for v in pt] for pt in w.orbit],
        "steps": [
            {
                "point": [str(v) for v in s.point],
                "site": s.site,
                "directions": [[str(v) for v in d] for d in s.directions],
                "straddled": [
                    {"normal": [str(v) for v in h[0]], "offset": str(h[1])}
                    for h in s.straddled
                ],
            }
            for s in w.steps
        ],
        "final_directions": [[str(v) for v in d] for d in w.final_directions],
        "cone_contains_initial": w.cone_contains_initial,
    }


def _write_entropy_csv(path, est) -> None:
    with open(path, "w") as fh:
        fh.write("n,card,mult,h_sing,h_mult,extended\n")
        for i in range(len(est.card_seq)):
            ext = est.extended_to is not None and (i + 1) > est.enumerated_depth
            fh.write(
                f"{i + 1},{est.card_seq[i]},{est.mult_seq[i]},"
                f"{zio.fmt_float(est.h_sing_seq[i])},{zio.fmt_float(est.h_mult_seq[i])},"
                f"{int(ext)}\n"
            )


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
