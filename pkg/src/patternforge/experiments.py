"""Variance sweeps over the three generators with CSV/JSON reports.

A sweep cell is one (generator, σ²) pair. Patterns are generated in blocks
of ``window``; after each block the monitored means are checkpointed and the
cell stops once they are stable (or the cap is reached).
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .core import InfeasibleConfig, SamplingConfig, derive_params
from .evaluation import (
    BagReport,
    MetricAccumulator,
    check_convergence,
    checkpoint,
    finalize,
)
from .generators import GENERATORS, bag_from_rows, generate_rows
from .units import parse_quantity as q

FULL_SIGMA2 = tuple(10.0 ** (e / 2) for e in range(-8, 5))  # 1e-4 .. 1e2, half decades
DESK_SIGMA2 = tuple(10.0**e for e in (-4, -3, -2.5, -2, -1.5, -1, 0, 1, 2))

FULL_N_MIN = 100_000
DESK_N_MIN = 10_000
FULL_CAP = 1_000_000
DESK_CAP = 100_000


def builtin_cases() -> dict[str, SamplingConfig]:
    """The four configurations of the second experiment, keyed ``A``..``D``."""
    return {
        "A": SamplingConfig(q("1000ms"), q("1000us"), q("0.05kHz"), q("10ms"), q("30ms")),
        "B": SamplingConfig(q("0.1ms"), q("1us"), q("50kHz"), q("0.015ms"), q("0.028ms")),
        "C": SamplingConfig(q("1000ms"), q("1us"), q("10kHz")),
        "D": SamplingConfig(q("0.005ms"), q("25e-5us"), q("1e5kHz"), None, q("14e-6ms")),
    }


def experiment1_config(f_req: str = "100kHz") -> SamplingConfig:
    return SamplingConfig(q("1ms"), q("1us"), q(f_req), q("5us"), None)


@dataclass(frozen=True)
class SweepSpec:
    base: SamplingConfig
    sigma2_grid: tuple = FULL_SIGMA2
    generators: tuple = GENERATORS
    n_min: int = FULL_N_MIN
    eta_at: int = 100_000
    window: int = 20_000
    cap: int = FULL_CAP
    name: str = "sweep"
    desk_scale: bool = False

    def __post_init__(self):
        grid = tuple(float(s) for s in self.sigma2_grid)
        if not grid:
            raise ValueError("sigma2 grid is empty")
        positive = [s for s in grid if s != 0.0]
        if any(s < 0 for s in grid) or any(b <= a for a, b in zip(positive, positive[1:])):
            raise ValueError("sigma2 grid must be strictly increasing and positive")
        if grid.count(0.0) > 1:
            raise ValueError("sigma2 = 0 may appear at most once")
        object.__setattr__(self, "sigma2_grid", grid)
        for g in self.generators:
            if g not in GENERATORS:
                raise ValueError(f"unknown generator {g!r}")
        if self.n_min < 1 or self.window < 1 or self.cap < self.n_min:
            raise ValueError("need n_min >= 1, window >= 1 and cap >= n_min")

    def echo(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "base"}
        d["base"] = self.base.to_dict()
        d["sigma2_grid"] = list(self.sigma2_grid)
        d["generators"] = list(self.generators)
        return d


def sweep_spec(base: SamplingConfig, name: str, eta_at: int, desk_scale: bool = False, **kw) -> SweepSpec:
    """Full-scale or desk-scale spec; desk scale shrinks n_min, the window and the cap tenfold."""
    if desk_scale:
        defaults = dict(sigma2_grid=DESK_SIGMA2, n_min=DESK_N_MIN, window=DESK_N_MIN // 5,
                        cap=DESK_CAP, eta_at=min(eta_at, DESK_N_MIN))
    else:
        defaults = dict(sigma2_grid=FULL_SIGMA2, n_min=FULL_N_MIN, window=20_000,
                        cap=FULL_CAP, eta_at=eta_at)
    defaults.update(kw)
    return SweepSpec(base=base, name=name, desk_scale=desk_scale, **defaults)


def experiment1_spec(desk_scale: bool = False, **kw) -> SweepSpec:
    return sweep_spec(experiment1_config(), "experiment1", 100_000, desk_scale, **kw)


def experiment2_spec(case: str, desk_scale: bool = False, **kw) -> SweepSpec:
    return sweep_spec(builtin_cases()[case], f"experiment2-{case}", 10_000, desk_scale, **kw)


@dataclass
class CellResult:
    generator: str
    sigma2: float
    report: BagReport | None
    n: int
    converged: bool
    cap_hit: bool
    error: str | None = None
    seconds: float = 0.0


@dataclass
class SweepReport:
    spec: SweepSpec
    seed: int
    rows: list = field(default_factory=list)
    best_pdf: dict = field(default_factory=dict)  # generator -> (sigma2, p_g of correct patterns)

    def cell(self, generator: str, sigma2: float) -> CellResult:
        for r in self.rows:
            if r.generator == generator and r.sigma2 == sigma2:
                return r
        raise KeyError((generator, sigma2))

    def series(self, generator: str, metric: str) -> list[tuple[float, object]]:
        return [
            (r.sigma2, None if r.report is None else getattr(r.report, metric))
            for r in self.rows
            if r.generator == generator
        ]

    def best_sigma2(self, generator: str, metric: str = "e_p_star") -> float | None:
        pts = [(v, s) for s, v in self.series(generator, metric) if v is not None]
        return min(pts)[1] if pts else None

    def provenance(self) -> dict:
        versions = {"patternforge": __version__, "numpy": np.__version__}
        try:
            import numba

            versions["numba"] = numba.__version__
        except ImportError:  # pragma: no cover
            pass
        return {
            "seed": self.seed,
            "mode": "desk" if self.spec.desk_scale else "full",
            "kernel_backend": kernels.ACTIVE,
            "spec": self.spec.echo(),
            "versions": versions,
        }


CSV_FIELDS = (
    "generator", "sigma2", "n", "converged", "cap_hit", "error",
    "e_f", "gamma_f", "e_min", "e_max", "gamma_min", "gamma_max", "gamma",
    "e_p", "e_p_star", "eta", "eta_star",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _cell_seed(seed: int, g: int, s: int) -> int:
    st = np.random.SeedSequence([seed & (2**64 - 1), g, s]).generate_state(2, np.uint32)
    return int(st[0]) << 32 | int(st[1])


def run_cell(spec: SweepSpec, generator: str, sigma2: float, seed: int,
             threads: int | None = None, backend: str | None = None):
    """Generate and evaluate one cell until convergence or the cap.

    Returns the :class:`CellResult` and the accumulator.
    """
    t0 = time.perf_counter()
    cfg = spec.base.with_sigma2(sigma2)
    try:
        d = derive_params(cfg, strict=(generator == "angie"))
    except InfeasibleConfig as exc:
        return CellResult(generator, sigma2, None, 0, False, False, str(exc)), None
    acc = MetricAccumulator.for_params(d, spec.eta_at)
    history = []
    converged = False
    while acc.n_seen < spec.cap:
        block = min(spec.window, spec.cap - acc.n_seen)
        idx, lengths = generate_rows(generator, d, sigma2, block, seed, acc.n_seen, threads, backend)
        acc.add_bag(bag_from_rows(generator, d, sigma2, seed, idx, lengths, acc.n_seen, backend))
        history.append(checkpoint(acc))
        if check_convergence(history, spec.window, spec.n_min):
            converged = True
            break
    result = CellResult(generator, sigma2, finalize(acc), acc.n_seen, converged,
                        not converged, None, time.perf_counter() - t0)
    return result, acc


def run_sweep(spec: SweepSpec, seed: int, threads: int | None = None,
              backend: str | None = None, progress=None) -> SweepReport:
    """Run every (generator, σ²) cell of ``spec``; deterministic given ``seed``."""
    out = SweepReport(spec, seed)
    for gi, gen in enumerate(GENERATORS):
        if gen not in spec.generators:
            continue
        best = None
        for si, s2 in enumerate(spec.sigma2_grid):
            cell, acc = run_cell(spec, gen, s2, _cell_seed(seed, gi, si), threads, backend)
            out.rows.append(cell)
            if progress is not None:
                progress(cell)
            if cell.report is not None and cell.report.e_p_star is not None:
                if best is None or cell.report.e_p_star < best[0]:
                    best = (cell.report.e_p_star, s2, acc.pdf(star=True))
        if best is not None:
            out.best_pdf[gen] = (best[1], best[2])
    return out


# -- output -----------------------------------------------------------------


def report_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in report.rows:
        vals = r.report.to_dict() if r.report else {}
        row = {"generator": r.generator, "sigma2": r.sigma2, "n": r.n,
               "converged": r.converged, "cap_hit": r.cap_hit, "error": r.error, **vals}
        w.writerow([_fmt(row.get(k)) for k in CSV_FIELDS])
    return buf.getvalue()


def report_json(report: SweepReport) -> str:
    cells = []
    for r in report.rows:
        cells.append({
            "generator": r.generator, "sigma2": r.sigma2, "n": r.n,
            "converged": r.converged, "cap_hit": r.cap_hit, "error": r.error,
            "report": r.report.to_dict() if r.report else None,
        })
    return json.dumps({"provenance": report.provenance(), "cells": cells}, indent=2)


def _long_csv(report: SweepReport, metrics) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("generator", "sigma2", *metrics))
    for r in report.rows:
        vals = [getattr(r.report, m) if r.report else None for m in metrics]
        w.writerow([r.generator, _fmt(r.sigma2), *map(_fmt, vals)])
    return buf.getvalue()


def plot_data(report: SweepReport) -> dict[str, str]:
    """Per-figure CSV text, keyed by file name."""
    files = {
        "fig_gamma.csv": _long_csv(report, ("gamma", "gamma_f", "gamma_min", "gamma_max")),
        "fig_errors.csv": _long_csv(report, ("e_f", "e_min", "e_max")),
        "fig_pdf.csv": _long_csv(report, ("e_p", "e_p_star")),
        "fig_unique.csv": _long_csv(report, ("eta", "eta_star")),
    }
    gens = [g for g in GENERATORS if g in report.best_pdf]
    if gens:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", *(f"{g}@{report.best_pdf[g][0]!r}" for g in gens)])
        k_grid = len(report.best_pdf[gens[0]][1])
        for m in range(k_grid):
            w.writerow([m + 1, *(_fmt(float(report.best_pdf[g][1][m])) for g in gens)])
        files["fig_best_pdf.csv"] = buf.getvalue()
    return files


def write_report(report: SweepReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in [("sweep.csv", report_csv(report)), ("sweep.json", report_json(report)),
                       *plot_data(report).items()]:
        p = out / name
        p.write_text(text)
        written.append(p)
    return written


# -- throughput -------------------------------------------------------------


def time_generation(f_values, n: int, seed: int = 0, kind: str = "angie",
                    sigma2: float = 1e-2, backend: str | None = None, repeat: int = 1):
    """Wall time to generate ``n`` patterns of the first experiment's grid at each rate.

    Returns ``[(f_req, k_req, seconds)]`` with the best of ``repeat`` runs.
    """
    rows = []
    for f in f_values:
        cfg = experiment1_config(f)
        d = derive_params(cfg, strict=(kind == "angie"))
        generate_rows(kind, d, sigma2, min(n, 16), seed, backend=backend)  # warm up
        best = math.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            generate_rows(kind, d, sigma2, n, seed, backend=backend)
            best = min(best, time.perf_counter() - t0)
        rows.append((f, d.k_req, best))
    return rows
