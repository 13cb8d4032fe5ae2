"""Reproduce the four exact two-site fixtures and write their artifacts.

Usage: python scripts/run_example_fixtures.py [outdir]

Produces, per fixture: atlas JSON, iterated-region loops, removability
verdicts (with the essential-singularity witness where applicable), coding
matrices with Parry statistics, and run manifests.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from zhangsoc.cli import cli_dispatch

FIXTURES = {
    "shortest_avalanche": dict(Ec="7/2", eps="1/2"),   # three-point attractor
    "rank_one": dict(Ec="1/3", eps="1/3"),             # atomic attractor
    "proof_by_computer": dict(Ec="1/3", eps="1/2"),    # removable at order 5
    "essential_singularity": dict(Ec="7", eps="1/2"),  # non-removable
}


def main() -> int:
    outroot = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out/fixtures")
    status = 0
    for name, model in FIXTURES.items():
        base = ["--d", "1", "--L", "2", "--Ec", model["Ec"], "--eps", model["eps"]]
        jobs = [
            ["atlas", *base, "--out", str(outroot / name / "atlas")],
            ["removability", *base, "--max-n", "8", "--out", str(outroot / name / "removability")],
        ]
        if name != "essential_singularity":
            jobs.append(["regions", *base, "--max-n", "2", "--out", str(outroot / name / "regions")])
            jobs.append(["coding", *base, "--max-n", "6", "--out", str(outroot / name / "coding")])
        for argv in jobs:
            rc = cli_dispatch(argv)
            print(f"{name}: {argv[0]} -> exit {rc}")
            status = max(status, rc)
    return status


if __name__ == "__main__":
    sys.exit(main())
