"""Run configuration: flat sectioned key/value files, lossless round-trip.

Rationals are always "p/q" strings in configs to avoid decimal ambiguity.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field, asdict
from fractions import Fraction

DEFAULT_BUDGETS = {
    "piece_budget": 20000,
    "region_budget": 4000,
    "word_budget": 200000,
}

OUTPUT_DIR_ENV = "ZHANGSOC_OUT_DIR"
THREADS_ENV = "ZHANGSOC_THREADS"


@dataclass
class RunConfig:
    task: str
    d: int = 1
    L: int = 2
    ec: str = "1"
    eps: str = "0"
    delta: str = "1"
    seed: int = 0
    rng_algorithm: str = "philox4x64"
    piece_budget: int = DEFAULT_BUDGETS["piece_budget"]
    region_budget: int = DEFAULT_BUDGETS["region_budget"]
    word_budget: int = DEFAULT_BUDGETS["word_budget"]
    output_dir: str = "out"
    task_params: dict = field(default_factory=dict)

    def __post_init__(self):
        # normalize rationals to canonical p/q strings
        self.ec = str(Fraction(self.ec))
        self.eps = str(Fraction(self.eps))
        self.delta = str(Fraction(self.delta))
        env_out = os.environ.get(OUTPUT_DIR_ENV)
        if env_out:
            self.output_dir = env_out

    def model_params(self):
        from .lattice import ModelParams

        return ModelParams(ec=Fraction(self.ec), eps=Fraction(self.eps), delta=Fraction(self.delta))

    def lattice(self):
        from .lattice import build_lattice

        return build_lattice(self.d, self.L)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task_params"] = dict(self.task_params)
        return d

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["model"] = {
            "d": str(self.d),
            "L": str(self.L),
            "Ec": self.ec,
            "eps": self.eps,
            "delta": self.delta,
        }
        cp["task"] = {"name": self.task}
        for k, v in sorted(self.task_params.items()):
            cp["task"][k] = str(v)
        cp["rng"] = {"algorithm": self.rng_algorithm, "seed": str(self.seed)}
        cp["budgets"] = {
            "piece_budget": str(self.piece_budget),
            "region_budget": str(self.region_budget),
            "word_budget": str(self.word_budget),
        }
        cp["output"] = {"directory": self.output_dir}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @staticmethod
    def from_ini(text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        task_params = {
            k: v for k, v in cp["task"].items() if k != "name"
        }
        return RunConfig(
            task=cp["task"]["name"],
            d=cp.getint("model", "d"),
            L=cp.getint("model", "L"),
            ec=cp.get("model", "Ec"),
            eps=cp.get("model", "eps"),
            delta=cp.get("model", "delta", fallback="1"),
            seed=cp.getint("rng", "seed", fallback=0),
            rng_algorithm=cp.get("rng", "algorithm", fallback="philox4x64"),
            piece_budget=cp.getint("budgets", "piece_budget", fallback=DEFAULT_BUDGETS["piece_budget"]),
            region_budget=cp.getint("budgets", "region_budget", fallback=DEFAULT_BUDGETS["region_budget"]),
            word_budget=cp.getint("budgets", "word_budget", fallback=DEFAULT_BUDGETS["word_budget"]),
            output_dir=cp.get("output", "directory", fallback="out"),
            task_params=task_params,
        )


def threads_from_env(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, default)))
    except ValueError:
        return default
