"""Domain types: sampling problem, derived grid quantities, patterns, verdicts.

A pattern is stored in grid-index form: sampling instant ``t_k`` is
``indices[k] * t_grid`` with indices in ``1..k_grid``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from .units import exact

UNBOUNDED = math.inf


class InfeasibleConfig(ValueError):
    """A sampling problem that cannot be realized on its grid."""

    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


class PatternFormatError(ValueError):
    """Malformed pattern text file."""


def round_half_away(x: Fraction | float) -> int:
    """Nearest integer, ties away from zero."""
    if isinstance(x, Fraction):
        twice = 2 * abs(x)
        # floor(|x| + 1/2) computed exactly
        r = (twice.numerator + twice.denominator) // (2 * twice.denominator)
        return r if x >= 0 else -r
    a = abs(x)
    r = math.floor(a)
    if a - r >= 0.5:
        r += 1
    return int(r) if x >= 0 else -int(r)


@dataclass(frozen=True)
class SamplingConfig:
    """Sampling problem: pattern duration, grid, rate and spacing limits.

    All quantities are SI (seconds, hertz); they are held as exact fractions.
    ``t_min``/``t_max`` may be ``None`` for "no requirement".
    """

    tau: Fraction
    t_grid: Fraction
    f_req: Fraction
    t_min: Fraction | None = None
    t_max: Fraction | None = None
    sigma2: float = 0.0

    def __post_init__(self):
        for name in ("tau", "t_grid", "f_req"):
            object.__setattr__(self, name, exact(getattr(self, name)))
        for name in ("t_min", "t_max"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, exact(v))
        object.__setattr__(self, "sigma2", float(self.sigma2))

        if self.tau <= 0 or self.t_grid <= 0 or self.f_req <= 0:
            raise ValueError("tau, t_grid and f_req must be positive")
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be >= 0")
        period = 1 / self.f_req
        if self.t_min is not None:
            if self.t_min < 0:
                raise ValueError("t_min must be >= 0")
            if self.t_min > period:
                raise ValueError("t_min exceeds the requested average sampling period")
        if self.t_max is not None:
            if self.t_max <= 0:
                raise ValueError("t_max must be positive")
            if self.t_max < period:
                raise ValueError("t_max is below the requested average sampling period")
        if self.t_min is not None and self.t_max is not None and self.t_min > self.t_max:
            raise ValueError("t_min > t_max")

    def with_sigma2(self, sigma2: float) -> "SamplingConfig":
        return SamplingConfig(self.tau, self.t_grid, self.f_req, self.t_min, self.t_max, sigma2)

    def to_dict(self) -> dict:
        def f(v):
            return None if v is None else float(v)

        return {
            "tau": f(self.tau),
            "t_grid": f(self.t_grid),
            "f_req": f(self.f_req),
            "t_min": f(self.t_min),
            "t_max": f(self.t_max),
            "sigma2": self.sigma2,
        }


@dataclass(frozen=True)
class DerivedParams:
    """Grid-domain quantities realizable for a :class:`SamplingConfig`."""

    k_grid: int
    t_grid: Fraction
    tau_hat: Fraction
    k_req: int
    f_hat: Fraction
    t_hat: Fraction
    n_avg: int
    k_min: int
    k_max: int | float  # UNBOUNDED when there is no t_max

    @property
    def k_max_eff(self) -> int:
        """Finite stand-in for ``k_max``; no spacing on the grid can exceed it."""
        return self.k_grid if self.k_max == UNBOUNDED else int(min(self.k_max, self.k_grid))

    @property
    def angie_feasible(self) -> bool:
        return (
            self.k_req >= 1
            and self.k_min <= self.k_max
            and self.k_grid - self.k_min * (self.k_req - 1) >= 1
        )


def derive_params(cfg: SamplingConfig, strict: bool = True) -> DerivedParams:
    """Compute grid counts and spacing limits for ``cfg``.

    With ``strict`` (the default) configurations that the constrained
    generator cannot satisfy raise :class:`InfeasibleConfig`. JS and ARS only
    need ``k_req >= 1`` and pass ``strict=False``.
    """
    k_grid = math.floor(cfg.tau / cfg.t_grid)
    if k_grid < 1:
        raise InfeasibleConfig("k_grid", "pattern is shorter than one grid period")
    tau_hat = k_grid * cfg.t_grid
    k_req = round_half_away(tau_hat * cfg.f_req)
    if k_req < 1:
        raise InfeasibleConfig("k_req", "requested frequency yields no sampling points")
    f_hat = k_req / tau_hat
    t_hat = 1 / f_hat
    n_avg = round_half_away(t_hat / cfg.t_grid)

    k_min = 1 if cfg.t_min is None else max(1, math.ceil(cfg.t_min / cfg.t_grid))
    k_max = UNBOUNDED if cfg.t_max is None else math.floor(cfg.t_max / cfg.t_grid)

    d = DerivedParams(k_grid, cfg.t_grid, tau_hat, k_req, f_hat, t_hat, n_avg, k_min, k_max)
    if strict:
        if k_min > k_max:
            raise InfeasibleConfig("k_min<=k_max", f"K_min={k_min} exceeds K_max={k_max}")
        if k_grid - k_min * (k_req - 1) < 1:
            raise InfeasibleConfig(
                "spacing",
                f"{k_req} points spaced by {k_min} do not fit on {k_grid} grid points",
            )
    return d


@dataclass(frozen=True, eq=False)
class Pattern:
    """Strictly increasing 1-based grid indices on a grid of ``k_grid`` points."""

    indices: np.ndarray
    k_grid: int
    t_grid: Fraction = field(default=Fraction(1))

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64).reshape(-1)
        if idx.size:
            if idx[0] < 1 or idx[-1] > self.k_grid:
                raise ValueError("pattern index outside 1..k_grid")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("pattern indices must be strictly increasing")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "k_grid", int(self.k_grid))
        object.__setattr__(self, "t_grid", exact(self.t_grid))

    def __len__(self):
        return self.indices.size

    def __eq__(self, other):
        if not isinstance(other, Pattern):
            return NotImplemented
        return (
            self.k_grid == other.k_grid
            and self.t_grid == other.t_grid
            and np.array_equal(self.indices, other.indices)
        )

    def __hash__(self):
        return hash((self.k_grid, self.indices.tobytes()))

    def __repr__(self):
        return f"Pattern({self.indices.tolist()}, k_grid={self.k_grid})"

    def times(self) -> list[float]:
        """Sampling instants in seconds."""
        return [float(int(i) * self.t_grid) for i in self.indices]


@dataclass(frozen=True)
class PatternVerdict:
    gamma_f: int
    gamma_min: int
    gamma_max: int
    gamma: int
    frac_under: float
    frac_over: float


def validate_pattern(p: Pattern, d: DerivedParams) -> PatternVerdict:
    """Check ``p`` against the count and spacing requirements of ``d``."""
    gamma_f = int(len(p) != d.k_req)
    if len(p) < 2:
        under = over = 0
        n_int = 1
    else:
        diffs = np.diff(p.indices)
        n_int = diffs.size
        under = int(np.count_nonzero(diffs < d.k_min))
        over = 0 if d.k_max == UNBOUNDED else int(np.count_nonzero(diffs > d.k_max))
    gamma_min = int(under > 0)
    gamma_max = int(over > 0)
    return PatternVerdict(
        gamma_f,
        gamma_min,
        gamma_max,
        int(gamma_f or gamma_min or gamma_max),
        under / n_int,
        over / n_int,
    )


def apply_pattern(p: Pattern, signal: Callable) -> np.ndarray:
    """Sample ``signal`` (a function of time in seconds) at the pattern instants."""
    t = np.array(p.times(), dtype=np.float64)
    y = np.asarray(signal(t), dtype=np.float64)
    if y.shape != t.shape:
        y = np.broadcast_to(y, t.shape).copy()
    return y


# -- pattern text format ----------------------------------------------------


def write_patterns(fh: TextIO, patterns: Iterable[Sequence[int]], k_grid: int, t_grid) -> None:
    """One pattern per line, comma-separated ascending indices, after a header."""
    fh.write(f"# k_grid={int(k_grid)} t_grid={float(exact(t_grid))!r}\n")
    for p in patterns:
        idx = p.indices if isinstance(p, Pattern) else p
        fh.write(",".join(str(int(i)) for i in idx))
        fh.write("\n")


def read_patterns(fh: TextIO) -> tuple[list[Pattern], int, Fraction]:
    text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith("#"):
        raise PatternFormatError("missing '# k_grid=... t_grid=...' header")
    header = dict(
        tok.split("=", 1) for tok in lines[0].lstrip("#").split() if "=" in tok
    )
    try:
        k_grid = int(header["k_grid"])
        t_grid = exact(float(header["t_grid"]))
    except (KeyError, ValueError) as exc:
        raise PatternFormatError(f"bad header: {lines[0]!r}") from exc

    patterns = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        try:
            idx = [int(tok) for tok in line.split(",")] if line else []
            patterns.append(Pattern(np.array(idx, dtype=np.int64), k_grid, t_grid))
        except ValueError as exc:
            raise PatternFormatError(f"line {lineno}: {exc}") from exc
    return patterns, k_grid, t_grid
