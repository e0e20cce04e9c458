from fractions import Fraction

import numpy as np
import pytest

from patternforge import SamplingConfig, derive_params
from patternforge.core import InfeasibleConfig
from patternforge.experiments import experiment1_config

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class FixedRNG:
    """Random source that replays given deviates."""

    def __init__(self, uniform=0.5, normals=()):
        self._u = uniform
        self._z = np.asarray(normals, dtype=np.float64)
        self._pos = 0

    def uniform(self):
        return self._u

    def standard_normal(self, n, out=None):
        z = np.zeros(n)
        take = self._z[self._pos : self._pos + n]
        z[: take.size] = take
        self._pos += n
        if out is not None:
            out[:] = z
            return out
        return z


def us(x) -> Fraction:
    return Fraction(x) / 10**6


def random_configs(n: int, seed: int, strict: bool = True, max_grid: int = 3000):
    """``n`` random configurations; with ``strict`` only ANGIE-feasible ones."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        t_grid = us(Fraction(int(rng.integers(1, 50)), int(rng.choice([1, 4, 10]))))
        k_grid = int(rng.integers(2, max_grid))
        tau = k_grid * t_grid + t_grid * Fraction(int(rng.integers(0, 10)), 10)
        k_req = int(rng.integers(1, k_grid + 1))
        f_req = Fraction(k_req) / tau
        period = 1 / f_req
        t_min = period * Fraction(int(rng.integers(0, 101)), 100) if rng.random() < 0.7 else None
        t_max = period * Fraction(int(rng.integers(100, 400)), 100) if rng.random() < 0.5 else None
        try:
            cfg = SamplingConfig(tau, t_grid, f_req, t_min, t_max)
            derive_params(cfg, strict=strict)
        except (InfeasibleConfig, ValueError):
            continue
        out.append(cfg)
    return out


@pytest.fixture
def exp1():
    return experiment1_config()


@pytest.fixture
def exp1_params(exp1):
    return derive_params(exp1)
