"""Bag statistics: frequency and interval errors, incorrect-pattern ratios,
grid-point PDF uniformity and pattern uniqueness, plus the running-mean
convergence rule used by the sweeps.

Accumulators are single-writer and mergeable; shard a bag, accumulate each
shard, then :meth:`MetricAccumulator.merge` in shard order.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .core import DerivedParams, Pattern, PatternVerdict
from .generators import PatternBag

MONITORED = ("e_f", "e_min", "e_max", "gamma", "e_p")
CONVERGENCE_WINDOW = 20_000
CONVERGENCE_MIN_N = 100_000
CONVERGENCE_REL_TOL = 0.01


def fingerprint(seq: bytes) -> bytes:
    """128-bit digest of a packed index sequence."""
    return hashlib.blake2b(seq, digest_size=16).digest()


class UniqueSet:
    """Distinct index sequences, keyed by fingerprint.

    Sequences sharing a fingerprint are compared in full, so a hash
    collision never merges two different patterns.
    """

    __slots__ = ("_table", "count", "collisions")

    def __init__(self):
        self._table: dict[bytes, list[bytes]] = {}
        self.count = 0
        self.collisions = 0

    def add(self, seq: bytes, fp: bytes | None = None) -> bool:
        fp = fingerprint(seq) if fp is None else fp
        bucket = self._table.get(fp)
        if bucket is None:
            self._table[fp] = [seq]
        elif seq in bucket:
            return False
        else:
            bucket.append(seq)
            self.collisions += 1
        self.count += 1
        return True

    def update(self, other: "UniqueSet") -> None:
        for fp, bucket in other._table.items():
            for seq in bucket:
                self.add(seq, fp)

    def __len__(self):
        return self.count


@dataclass
class MetricAccumulator:
    """Running sums for one bag on a grid of ``k_grid`` points.

    ``unique_limit`` stops uniqueness tracking after that many patterns
    (uniqueness is reported for the first N patterns of a bag).
    """

    k_grid: int
    k_req: int
    unique_limit: int | None = None
    n_seen: int = 0
    sum_ef: float = 0.0
    sum_emin: float = 0.0
    sum_emax: float = 0.0
    n_gamma_f: int = 0
    n_gamma_min: int = 0
    n_gamma_max: int = 0
    n_gamma: int = 0
    total_points: int = 0
    total_points_star: int = 0
    uniq_seen: int = 0
    grid_hits: np.ndarray = field(default=None, repr=False)
    grid_hits_star: np.ndarray = field(default=None, repr=False)
    uniq: UniqueSet = field(default_factory=UniqueSet, repr=False)
    uniq_star: UniqueSet = field(default_factory=UniqueSet, repr=False)

    def __post_init__(self):
        if self.grid_hits is None:
            self.grid_hits = np.zeros(self.k_grid, dtype=np.int64)
        if self.grid_hits_star is None:
            self.grid_hits_star = np.zeros(self.k_grid, dtype=np.int64)

    @classmethod
    def for_params(cls, d: DerivedParams, unique_limit: int | None = None) -> "MetricAccumulator":
        return cls(d.k_grid, d.k_req, unique_limit)

    @property
    def n_correct(self) -> int:
        return self.n_seen - self.n_gamma

    def _pack(self, idx: np.ndarray) -> bytes:
        dt = "<u4" if self.k_grid < 2**32 else "<u8"
        return np.ascontiguousarray(idx, dtype=dt).tobytes()

    def _track(self, rows: Iterable[np.ndarray], correct: Sequence[bool]) -> None:
        room = self._room()
        for idx, ok in zip(rows, correct):
            if room <= 0:
                break
            seq = self._pack(idx)
            fp = fingerprint(seq)
            self.uniq.add(seq, fp)
            if ok:
                self.uniq_star.add(seq, fp)
            self.uniq_seen += 1
            room -= 1

    def _room(self) -> float:
        if self.unique_limit is None:
            return math.inf
        return self.unique_limit - self.uniq_seen

    def add(self, p: Pattern, v: PatternVerdict) -> "MetricAccumulator":
        """Fold one pattern and its verdict into the sums."""
        if p.k_grid != self.k_grid:
            raise ValueError(f"pattern grid {p.k_grid} != accumulator grid {self.k_grid}")
        ks = len(p)
        self.sum_ef += ((self.k_req - ks) / self.k_req) ** 2
        self.sum_emin += v.frac_under**2
        self.sum_emax += v.frac_over**2
        self.n_gamma_f += v.gamma_f
        self.n_gamma_min += v.gamma_min
        self.n_gamma_max += v.gamma_max
        self.n_gamma += v.gamma
        idx = p.indices - 1
        self.grid_hits[idx] += 1
        self.total_points += ks
        if not v.gamma:
            self.grid_hits_star[idx] += 1
            self.total_points_star += ks
        self._track([p.indices], [not v.gamma])
        self.n_seen += 1
        return self

    def add_bag(self, bag: PatternBag, backend: str | None = None) -> "MetricAccumulator":
        """Fold a whole bag in row order."""
        d = bag.params
        if d.k_grid != self.k_grid or d.k_req != self.k_req:
            raise ValueError("bag was generated for a different grid")
        kern = kernels.backend(backend)
        n_int = bag.n_intervals()
        gamma = bag.gamma
        ef = ((self.k_req - bag.lengths) / self.k_req) ** 2
        self.sum_ef += math.fsum(ef)
        self.sum_emin += math.fsum((bag.under / n_int) ** 2)
        self.sum_emax += math.fsum((bag.over / n_int) ** 2)
        self.n_gamma_f += int(np.count_nonzero(bag.gamma_f))
        self.n_gamma_min += int(np.count_nonzero(bag.gamma_min))
        self.n_gamma_max += int(np.count_nonzero(bag.gamma_max))
        self.n_gamma += int(np.count_nonzero(gamma))
        every = np.ones(len(bag), dtype=np.bool_)
        self.grid_hits += kern.grid_hits(bag.indices, bag.lengths, every, self.k_grid)
        self.grid_hits_star += kern.grid_hits(bag.indices, bag.lengths, ~gamma, self.k_grid)
        self.total_points += int(bag.lengths.sum())
        self.total_points_star += int(bag.lengths[~gamma].sum())
        self._track(bag.rows(), ~gamma)
        self.n_seen += len(bag)
        return self

    def merge(self, other: "MetricAccumulator") -> "MetricAccumulator":
        """New accumulator equal to ``self`` followed by ``other``."""
        if other.k_grid != self.k_grid or other.k_req != self.k_req:
            raise ValueError("cannot merge accumulators for different grids")
        out = MetricAccumulator(self.k_grid, self.k_req, self.unique_limit)
        for name in (
            "n_seen", "sum_ef", "sum_emin", "sum_emax", "n_gamma_f", "n_gamma_min",
            "n_gamma_max", "n_gamma", "total_points", "total_points_star", "uniq_seen",
        ):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        out.grid_hits = self.grid_hits + other.grid_hits
        out.grid_hits_star = self.grid_hits_star + other.grid_hits_star
        for src in (self, other):
            out.uniq.update(src.uniq)
            out.uniq_star.update(src.uniq_star)
        return out

    def pdf(self, star: bool = False) -> np.ndarray | None:
        """Per-grid-point occurrence ratio ``p_g(m)`` (1.0 means equiprobable)."""
        hits = self.grid_hits_star if star else self.grid_hits
        total = self.total_points_star if star else self.total_points
        if total == 0:
            return None
        return hits * (self.k_grid / total)


def accumulate(acc: MetricAccumulator, p: Pattern, v: PatternVerdict, d: DerivedParams) -> MetricAccumulator:
    if d.k_grid != acc.k_grid:
        raise ValueError(f"params grid {d.k_grid} != accumulator grid {acc.k_grid}")
    return acc.add(p, v)


def pdf_error(p_g: np.ndarray | None) -> float | None:
    if p_g is None:
        return None
    return float(np.mean((p_g - 1.0) ** 2))


@dataclass(frozen=True)
class BagReport:
    e_f: float
    gamma_f: float
    e_min: float
    e_max: float
    gamma_min: float
    gamma_max: float
    gamma: float
    e_p: float | None
    e_p_star: float | None  # None: no correct pattern in the bag
    eta: int
    eta_star: int
    n: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict) -> "BagReport":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__})


def finalize(acc: MetricAccumulator) -> BagReport:
    if acc.n_seen == 0:
        raise ValueError("cannot finalize an empty accumulator")
    n = acc.n_seen
    return BagReport(
        e_f=acc.sum_ef / n,
        gamma_f=acc.n_gamma_f / n,
        e_min=acc.sum_emin / n,
        e_max=acc.sum_emax / n,
        gamma_min=acc.n_gamma_min / n,
        gamma_max=acc.n_gamma_max / n,
        gamma=acc.n_gamma / n,
        e_p=pdf_error(acc.pdf()),
        e_p_star=pdf_error(acc.pdf(star=True)) if acc.n_correct else None,
        eta=len(acc.uniq),
        eta_star=len(acc.uniq_star),
        n=n,
    )


def evaluate_bag(bag: PatternBag, unique_limit: int | None = None) -> BagReport:
    acc = MetricAccumulator.for_params(bag.params, unique_limit)
    return finalize(acc.add_bag(bag))


# -- convergence ------------------------------------------------------------


@dataclass(frozen=True)
class Checkpoint:
    n: int
    means: dict


def checkpoint(acc: MetricAccumulator, metrics: Sequence[str] = MONITORED) -> Checkpoint:
    r = finalize(acc)
    return Checkpoint(acc.n_seen, {m: getattr(r, m) for m in metrics})


def _stable(now, before, rel_tol) -> bool:
    if now is None or before is None:
        return now is None and before is None
    if now == 0:
        return before == 0
    return abs(now - before) <= rel_tol * abs(now)


def check_convergence(
    history: Sequence[Checkpoint],
    window: int = CONVERGENCE_WINDOW,
    n_min: int = CONVERGENCE_MIN_N,
    rel_tol: float = CONVERGENCE_REL_TOL,
) -> bool:
    """True once at least ``n_min`` patterns were seen and no monitored mean
    moved by more than ``rel_tol`` of its current value over the last
    ``window`` patterns.

    ``history`` holds checkpoints taken every ``window`` patterns.
    """
    if len(history) < 2:
        return False
    last = history[-1]
    if last.n < n_min:
        return False
    prev = next((c for c in reversed(history[:-1]) if c.n == last.n - window), None)
    if prev is None:
        return False
    return all(_stable(last.means[m], prev.means.get(m), rel_tol) for m in last.means)
