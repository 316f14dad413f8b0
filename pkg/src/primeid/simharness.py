"""Parameter sweeps over message bit-length: block length, bounds, empirical
type-II error, collision probability and timing.

Every round gets its own ``random.Random`` seeded from
``SeedSequence(seed, spawn_key=(logM, round))``, so a row can be
reproduced from its ``seed`` and ``logM`` alone, in any order and across
processes. Only ``time_ms`` varies between reruns.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import platform
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist
from typing import Callable, Iterable, NamedTuple, TextIO

import numpy as np

from . import __version__
from .errors import BudgetExceededError, DestinationUnwritableError, KeyGenerationError, SchemeConstructionError
from .idscheme import (
    KeyPair,
    SchemeParams,
    block_length_modified,
    collision_probability,
    draw_keys,
    phi,
)

CSV_FIELDS = (
    "logM",
    "alpha",
    "n_bits",
    "bound_raw",
    "emp_p2",
    "emp_p2_lo",
    "emp_p2_hi",
    "p_coll",
    "p_coll_model",
    "time_ms",
    "time_model",
    "seed",
)
_Z95 = NormalDist().inv_cdf(0.975)


def stream(seed: int, *key: int) -> random.Random:
    """Independent generator for (seed, *key)."""
    state = np.random.SeedSequence(seed, spawn_key=key).generate_state(2, np.uint64)
    return random.Random((int(state[0]) << 64) | int(state[1]))


def wilson_interval(hits: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("need at least one trial")
    p = hits / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # the interval always contains p; clamp away rounding at the edges
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


class RateEstimate(NamedTuple):
    rate: float
    lo: float
    hi: float
    hits: int
    trials: int


def _distinct_messages(logM: int, rng: random.Random) -> tuple[int, int]:
    m = rng.getrandbits(logM) + 1
    other = rng.getrandbits(logM) + 1
    while other == m:
        other = rng.getrandbits(logM) + 1
    return m, other


def _collides(m: int, other: int, keys: KeyPair) -> bool:
    return phi(phi(m, keys.k), keys.l) == phi(phi(other, keys.k), keys.l)


def estimate_type2(
    params: SchemeParams,
    R: int,
    rng: random.Random,
    key_source: Callable[[random.Random], KeyPair] | None = None,
) -> RateEstimate:
    """Fraction of R rounds (fresh keys, fresh m != m_hat) where the tags agree."""
    if R < 1:
        raise ValueError("R must be >= 1")
    draw = key_source or (lambda r: draw_keys(params, r))
    hits = 0
    for _ in range(R):
        keys = draw(rng)
        m, other = _distinct_messages(params.logM, rng)
        hits += _collides(m, other, keys)
    return RateEstimate(hits / R, *wilson_interval(hits, R), hits, R)


@dataclass(frozen=True)
class SweepConfig:
    alpha: float
    rounds: int = 100
    logM_grid: tuple[int, ...] = tuple(2**e for e in range(10, 17))
    l_exp: int = 10
    q_exp: int = 10
    seed: int = 0
    # 0 selects the residue-count collision probability; >0 samples that many pairs per round
    pair_samples: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "logM_grid", tuple(int(v) for v in self.logM_grid))
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not self.logM_grid:
            raise ValueError("logM grid is empty")
        if any(b <= a for a, b in zip(self.logM_grid, self.logM_grid[1:])):
            raise ValueError("logM grid must be strictly ascending")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned value")


@dataclass(frozen=True)
class SweepRecord:
    logM: int
    alpha: float
    n_bits: int
    bound_raw: float
    emp_p2: float
    emp_p2_lo: float
    emp_p2_hi: float
    p_coll: float
    p_coll_model: float
    time_ms: float
    time_model: float
    seed: int
    skipped: str | None = None

    @property
    def loglogM(self) -> float:
        return math.log2(self.logM)

    def without_timing(self) -> SweepRecord:
        return dataclasses.replace(self, time_ms=0.0)


def collision_model(alpha: float, logM: int) -> float:
    return 12 * (alpha * math.log2(logM)) ** -alpha


def time_model(alpha: float, logM: int) -> float:
    return 0.018 * (alpha * math.log2(logM)) ** 4


def run_point(config: SweepConfig, logM: int) -> SweepRecord:
    """One grid point: R rounds of key generation, encoding and scoring."""
    alpha = config.alpha
    models = dict(p_coll_model=collision_model(alpha, logM), time_model=time_model(alpha, logM))
    try:
        params = SchemeParams(logM, alpha, config.l_exp, config.q_exp)
        report = block_length_modified(params)
        hits = 0
        p_coll = 0.0
        elapsed = 0.0
        for r in range(config.rounds):
            rng = stream(config.seed, logM, r)
            m, other = _distinct_messages(logM, rng)
            t0 = time.perf_counter()
            keys = draw_keys(params, rng)
            phi(phi(m, keys.k), keys.l)
            elapsed += time.perf_counter() - t0
            hits += _collides(m, other, keys)
            if config.pair_samples:
                p_coll += collision_probability(keys.k, keys.l, logM, "sampled", rng, config.pair_samples)
            else:
                p_coll += collision_probability(keys.k, keys.l, logM, "residue")
    except (SchemeConstructionError, KeyGenerationError, BudgetExceededError) as exc:
        nan = math.nan
        return SweepRecord(logM, alpha, 0, nan, nan, nan, nan, nan, time_ms=nan, seed=config.seed, skipped=str(exc), **models)
    R = config.rounds
    lo, hi = wilson_interval(hits, R)
    return SweepRecord(
        logM=logM,
        alpha=alpha,
        n_bits=report.block_length,
        bound_raw=report.type2_bound_raw,
        emp_p2=hits / R,
        emp_p2_lo=lo,
        emp_p2_hi=hi,
        p_coll=p_coll / R,
        time_ms=1000 * elapsed / R,
        seed=config.seed,
        **models,
    )


def run_sweep(config: SweepConfig) -> list[SweepRecord]:
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            return list(pool.map(run_point, [config] * len(config.logM_grid), config.logM_grid))
    return [run_point(config, logM) for logM in config.logM_grid]


# -- output ------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def record_dict(rec: SweepRecord) -> dict:
    out = {name: getattr(rec, name) for name in CSV_FIELDS}
    if rec.skipped is not None:
        out["skipped"] = rec.skipped
    return out


def records_to_csv(records: Iterable[SweepRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for rec in records:
        writer.writerow([_fmt(getattr(rec, name)) for name in CSV_FIELDS])
    return buf.getvalue()


def records_to_json(records: Iterable[SweepRecord]) -> str:
    def clean(d):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}

    return json.dumps([clean(record_dict(r)) for r in records], indent=2) + "\n"


def write_records(records: Iterable[SweepRecord], fmt: str, destination: str | Path | TextIO) -> None:
    """Write records as CSV (12 significant digits) or JSON (full precision).

    ``destination`` is a path, an open text file, or ``"-"`` for stdout.
    """
    if fmt == "csv":
        text = records_to_csv(records)
    elif fmt == "json":
        text = records_to_json(records)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if destination == "-":
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        try:
            Path(destination).write_text(text)
        except OSError as exc:
            raise DestinationUnwritableError(f"cannot write {destination}: {exc}") from exc


def _record_from_dict(d: dict) -> SweepRecord:
    kwargs = {}
    for f in dataclasses.fields(SweepRecord):
        v = d.get(f.name)
        if f.name in ("logM", "n_bits", "seed"):
            v = int(v)
        elif f.name != "skipped":
            v = math.nan if v is None or v == "" else float(v)
        kwargs[f.name] = v
    return SweepRecord(**kwargs)


def read_records(text: str, fmt: str) -> list[SweepRecord]:
    if fmt == "json":
        return [_record_from_dict(d) for d in json.loads(text)]
    if fmt == "csv":
        return [_record_from_dict(row) for row in csv.DictReader(io.StringIO(text))]
    raise ValueError(f"unknown format {fmt!r}")


def sweep_metadata(config: SweepConfig) -> dict:
    return {
        "config": dataclasses.asdict(config),
        "tool_version": __version__,
        "python": sys.version.split()[0],
        "host": f"{platform.node()} {platform.machine()} {platform.system()} {platform.release()}",
    }


def write_metadata(config: SweepConfig, path: str | Path) -> None:
    try:
        Path(path).write_text(json.dumps(sweep_metadata(config), indent=2) + "\n")
    except OSError as exc:
        raise DestinationUnwritableError(f"cannot write {path}: {exc}") from exc
