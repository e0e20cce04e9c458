"""Jittered sampling (JS), additive random sampling (ARS) and ANGIE.

Single-pattern entry points take any object with ``uniform()`` and
``standard_normal(n, out=None)`` as the random source, which lets tests
inject fixed deviates. :func:`generate_bag` draws one
:class:`~patternforge.rng.RandomSource` stream per pattern and runs the
compiled kernels chunk by chunk.

Per-point floating-point work in ANGIE is one normal draw, one multiply by
the interval to the nearer limit and one rounding; the expected position,
the limits and the clamp are integer arithmetic (``step`` is a rounded
integer quotient computed as ``(2*rem + den) // (2*den)``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .core import (
    DerivedParams,
    InfeasibleConfig,
    Pattern,
    PatternVerdict,
    SamplingConfig,
    derive_params,
    round_half_away,
)
from .rng import RandomSource

GENERATORS = ("js", "ars", "angie")

# rows per kernel call are capped so a chunk's deviates stay around 8 MB
_CHUNK_POINTS = 1 << 20


def _check_angie(d: DerivedParams) -> None:
    if not d.angie_feasible:
        raise InfeasibleConfig(
            "spacing",
            f"{d.k_req} points spaced by {d.k_min}..{d.k_max} do not fit on {d.k_grid} grid points",
        )


# -- reference stepper ------------------------------------------------------


@dataclass
class AngieState:
    """Limits and bookkeeping before drawing point ``k`` (1-based)."""

    lim_lo: int
    lim_hi: int
    prev: int = 0
    k: int = 1
    n_left: int = 0


def angie_start(d: DerivedParams) -> AngieState:
    _check_angie(d)
    return AngieState(1, d.k_grid - d.k_min * (d.k_req - 1), 0, 1, d.k_req)


def step_angie(s: AngieState, d: DerivedParams, sigma: float, draw: float) -> int:
    """Place point ``s.k`` and advance ``s`` to the next one.

    ``draw`` is the uniform deviate for the first point and a standard
    normal for the rest (scaled here by ``sigma``).
    """
    step = round_half_away(Fraction(d.k_grid - s.prev, s.n_left + 1))
    e = s.prev + step
    if s.k == 1:
        pt = math.ceil(draw * step)
    else:
        nd = min(abs(e - s.lim_lo), abs(s.lim_hi - e))
        pt = e + round_half_away((sigma * draw) * nd)
    pt = min(max(pt, s.lim_lo), s.lim_hi)

    left = s.n_left
    s.prev = pt
    s.lim_lo = pt + d.k_min
    s.lim_hi = min(d.k_grid - d.k_min * (left - 2), pt + d.k_max_eff)
    s.k += 1
    s.n_left = left - 1
    return pt


def angie_trace(d: DerivedParams, sigma2: float, rng) -> tuple[Pattern, list[AngieState]]:
    """Run the reference stepper; also return the state seen before every draw."""
    s = angie_start(d)
    sigma = math.sqrt(sigma2)
    u = rng.uniform()
    z = rng.standard_normal(d.k_req - 1) if d.k_req > 1 else np.empty(0)
    states, pts = [], []
    for k in range(d.k_req):
        states.append(AngieState(s.lim_lo, s.lim_hi, s.prev, s.k, s.n_left))
        pts.append(step_angie(s, d, sigma, u if k == 0 else float(z[k - 1])))
    return Pattern(np.array(pts, dtype=np.int64), d.k_grid, d.t_grid), states


# -- single patterns --------------------------------------------------------


def _row(out, lengths, i, d) -> Pattern:
    return Pattern(out[i, : lengths[i]], d.k_grid, d.t_grid)


def generate_js(d: DerivedParams, sigma2: float, rng, backend: str | None = None) -> Pattern:
    z = np.asarray(rng.standard_normal(d.k_req), dtype=np.float64).reshape(1, -1)
    out, lengths = kernels.backend(backend).jittered(
        d.k_grid, d.k_req, d.n_avg, math.sqrt(sigma2), z
    )
    return _row(out, lengths, 0, d)


def generate_ars(d: DerivedParams, sigma2: float, rng, backend: str | None = None) -> Pattern:
    z = np.asarray(rng.standard_normal(d.k_req), dtype=np.float64).reshape(1, -1)
    out, lengths = kernels.backend(backend).additive(
        d.k_grid, d.k_req, d.n_avg, math.sqrt(sigma2), z
    )
    return _row(out, lengths, 0, d)


def generate_angie(d: DerivedParams, sigma2: float, rng, backend: str | None = None) -> Pattern:
    _check_angie(d)
    u = np.array([rng.uniform()], dtype=np.float64)
    z = np.zeros((1, d.k_req), dtype=np.float64)
    if d.k_req > 1:
        z[0, 1:] = rng.standard_normal(d.k_req - 1)
    out = kernels.backend(backend).angie(
        d.k_grid, d.k_req, d.k_min, d.k_max_eff, math.sqrt(sigma2), u, z
    )
    return Pattern(out[0], d.k_grid, d.t_grid)


# -- bags -------------------------------------------------------------------


@dataclass
class PatternBag:
    """``n`` patterns as a zero-padded index matrix plus per-pattern verdicts.

    ``start`` is the ordinal of the first row; row ``i`` came from random
    stream ``start + i``.
    """

    kind: str
    params: DerivedParams
    sigma2: float
    seed: int
    indices: np.ndarray
    lengths: np.ndarray
    under: np.ndarray = field(repr=False)
    over: np.ndarray = field(repr=False)
    start: int = 0

    def __len__(self):
        return self.indices.shape[0]

    @property
    def gamma_f(self) -> np.ndarray:
        return self.lengths != self.params.k_req

    @property
    def gamma_min(self) -> np.ndarray:
        return self.under > 0

    @property
    def gamma_max(self) -> np.ndarray:
        return self.over > 0

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_f | self.gamma_min | self.gamma_max

    def n_intervals(self) -> np.ndarray:
        return np.maximum(self.lengths - 1, 1)

    def pattern(self, i: int) -> Pattern:
        return _row(self.indices, self.lengths, i, self.params)

    def patterns(self) -> list[Pattern]:
        return [self.pattern(i) for i in range(len(self))]

    def rows(self):
        """Index arrays without padding, as views."""
        for i in range(len(self)):
            yield self.indices[i, : self.lengths[i]]

    def verdict(self, i: int) -> PatternVerdict:
        n_int = int(self.n_intervals()[i])
        gf, gmin, gmax = int(self.gamma_f[i]), int(self.gamma_min[i]), int(self.gamma_max[i])
        return PatternVerdict(
            gf, gmin, gmax, int(gf or gmin or gmax),
            int(self.under[i]) / n_int, int(self.over[i]) / n_int,
        )

    def verdicts(self) -> list[PatternVerdict]:
        return [self.verdict(i) for i in range(len(self))]


def bag_from_rows(kind, d: DerivedParams, sigma2, seed, indices, lengths, start=0, backend=None):
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    under, over = kernels.backend(backend).interval_counts(indices, lengths, d.k_min, d.k_max_eff)
    return PatternBag(kind, d, float(sigma2), seed, indices, lengths, under, over, start)


def bag_from_patterns(patterns, d: DerivedParams, kind="file", sigma2=float("nan"), seed=0):
    width = max([len(p) for p in patterns] + [d.k_req, 1])
    indices = np.zeros((len(patterns), width), dtype=np.int64)
    lengths = np.zeros(len(patterns), dtype=np.int64)
    for i, p in enumerate(patterns):
        if p.k_grid != d.k_grid:
            raise ValueError(f"pattern {i} lives on a grid of {p.k_grid}, expected {d.k_grid}")
        indices[i, : len(p)] = p.indices
        lengths[i] = len(p)
    return bag_from_rows(kind, d, sigma2, seed, indices, lengths)


def _draw_chunk(kind, d, seed, first, count):
    if kind == "angie":
        u = np.empty(count, dtype=np.float64)
        z = np.zeros((count, d.k_req), dtype=np.float64)
        for i in range(count):
            r = RandomSource(seed, first + i)
            u[i] = r.uniform()
            if d.k_req > 1:
                r.standard_normal(d.k_req - 1, out=z[i, 1:])
        return u, z
    z = np.empty((count, d.k_req), dtype=np.float64)
    for i in range(count):
        RandomSource(seed, first + i).standard_normal(d.k_req, out=z[i])
    return None, z


def _run_chunk(kind, d, sigma2, seed, first, count, backend):
    kern = kernels.backend(backend)
    u, z = _draw_chunk(kind, d, seed, first, count)
    s = math.sqrt(sigma2)
    if kind == "angie":
        out = kern.angie(d.k_grid, d.k_req, d.k_min, d.k_max_eff, s, u, z)
        lengths = np.full(count, d.k_req, dtype=np.int64)
    elif kind == "js":
        out, lengths = kern.jittered(d.k_grid, d.k_req, d.n_avg, s, z)
    else:
        out, lengths = kern.additive(d.k_grid, d.k_req, d.n_avg, s, z)
    return out, lengths


def generate_rows(
    kind: str,
    d: DerivedParams,
    sigma2: float,
    n: int,
    seed: int,
    start: int = 0,
    threads: int | None = None,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Patterns ``start .. start+n-1`` of the bag as (indices, lengths)."""
    if kind not in GENERATORS:
        raise ValueError(f"unknown generator {kind!r}; expected one of {GENERATORS}")
    if kind == "angie":
        _check_angie(d)
    rows = max(1, _CHUNK_POINTS // max(d.k_req, 1))
    spans = [(start + a, min(rows, n - a)) for a in range(0, n, rows)]
    job = lambda sp: _run_chunk(kind, d, sigma2, seed, sp[0], sp[1], backend)  # noqa: E731
    if threads and threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, spans))
    else:
        parts = [job(sp) for sp in spans]
    if not parts:
        return np.zeros((0, d.k_req), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def generate_bag(
    kind: str,
    cfg: SamplingConfig,
    n: int,
    seed: int,
    threads: int | None = None,
    backend: str | None = None,
) -> PatternBag:
    """Generate ``n`` patterns with ``kind`` for ``cfg`` (σ² taken from ``cfg``)."""
    if n < 1:
        raise ValueError("bag size must be >= 1")
    d = derive_params(cfg, strict=(kind == "angie"))
    indices, lengths = generate_rows(kind, d, cfg.sigma2, n, seed, 0, threads, backend)
    return bag_from_rows(kind, d, cfg.sigma2, seed, indices, lengths, 0, backend)
