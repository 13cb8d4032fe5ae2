"""Avalanche-type bifurcation scans over the (eps, Ec) parameter strip.

Two parameter points belong to the same avalanche-type domain when their
depth-capped atlases realize the same set of avalanche signatures.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from ..lattice import Lattice, ModelParams
from .atlas import build_atlas


@dataclass(frozen=True)
class BifurcationCell:
    eps: Fraction
    ec: Fraction
    signature_id: str
    piece_count: int
    complete: bool


def _signature_id(signatures) -> str:
    canon = sorted(
        (site, tuple(tuple(sorted(c)) for c in sig)) for site, sig in signatures
    )
    digest = hashlib.sha256(repr(canon).encode()).hexdigest()
    return digest[:12]


def bifurcation_scan(
    eps_values: Sequence[Fraction],
    ec_values: Sequence[Fraction],
    lattice: Lattice,
    tau_cap: int | None = None,
    piece_budget: int = 2000,
) -> list[BifurcationCell]:
    """Atlas signature map over a finite (eps, Ec) grid."""
    cells = []
    for eps in eps_values:
        for ec in ec_values:
            params = ModelParams(ec=Fraction(ec), eps=Fraction(eps))
            atlas = build_atlas(
                params, lattice, tau_cap=tau_cap, piece_budget=piece_budget
            )
            cells.append(
                BifurcationCell(
                    eps=params.eps,
                    ec=params.ec,
                    signature_id=_signature_id(atlas.signatures()),
                    piece_count=atlas.total_pieces,
                    complete=atlas.complete,
                )
            )
    return cells
