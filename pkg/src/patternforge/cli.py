"""Command-line front end.

Exit status: 0 success, 2 usage error, 3 infeasible configuration,
4 malformed input file, 5 invalid parameter value, 6 replay mismatch,
1 anything else. Failures print a one-line JSON object on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, kernels
from .core import (
    InfeasibleConfig,
    PatternFormatError,
    SamplingConfig,
    derive_params,
    read_patterns,
    write_patterns,
)
from .units import parse_quantity

EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_MALFORMED = 4
EXIT_INVALID = 5
EXIT_REPLAY = 6

SEED_ENV = "PATTERNFORGE_SEED"


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", f"{self.prog}: {message}")


# -- config -----------------------------------------------------------------

_CFG_KEYS = ("tau", "t_grid", "f_req", "t_min", "t_max")


def _add_config_flags(p: argparse.ArgumentParser, sigma2: bool = True) -> None:
    g = p.add_argument_group("sampling problem")
    g.add_argument("--config", help="JSON file with unit-suffixed values, e.g. {\"tau\": \"1ms\"}")
    g.add_argument("--case", help="built-in configuration: A, B, C, D or exp1")
    g.add_argument("--tau")
    g.add_argument("--t-grid", dest="t_grid")
    g.add_argument("--f-req", dest="f_req")
    g.add_argument("--t-min", dest="t_min")
    g.add_argument("--t-max", dest="t_max")
    if sigma2:
        g.add_argument("--sigma2", type=float)


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_MALFORMED, "config", f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError(EXIT_MALFORMED, "config", "config file must hold a JSON object")
    return data


def resolve_config(args) -> tuple[SamplingConfig, dict]:
    """Merge built-in case, config file and flags (later wins)."""
    from .experiments import builtin_cases, experiment1_config

    values: dict = {}
    file_data = _load_config_file(args.config) if getattr(args, "config", None) else {}
    case = getattr(args, "case", None) or file_data.get("case")
    if case:
        cases = {**builtin_cases(), "exp1": experiment1_config()}
        if case not in cases:
            raise CliError(EXIT_INVALID, "config", f"unknown case {case!r}")
        base = cases[case]
        values = {k: getattr(base, k) for k in _CFG_KEYS}
    for k in _CFG_KEYS + ("sigma2",):
        if file_data.get(k) is not None:
            values[k] = file_data[k]
    for k in _CFG_KEYS + ("sigma2",):
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    try:
        parsed = {}
        for k in _CFG_KEYS:
            v = values.get(k)
            if isinstance(v, str):
                v = parse_quantity(v, "freq" if k == "f_req" else "time")
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                v = parse_quantity(repr(v))
            parsed[k] = v
        missing = [k for k in ("tau", "t_grid", "f_req") if parsed[k] is None]
        if missing:
            raise CliError(EXIT_USAGE, "usage", f"missing sampling parameters: {', '.join(missing)}")
        cfg = SamplingConfig(sigma2=float(values.get("sigma2") or 0.0), **parsed)
    except CliError:
        raise
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_INVALID, "config", str(exc)) from exc
    return cfg, file_data


def resolve_seed(args, file_data: dict | None = None) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if file_data and file_data.get("seed") is not None:
        return int(file_data["seed"])
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError as exc:
            raise CliError(EXIT_INVALID, "seed", f"{SEED_ENV}={env!r} is not an integer") from exc
    return 0


# -- manifest ---------------------------------------------------------------


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(path: Path, argv: list[str], config: dict | None, seed, outputs) -> None:
    manifest = {
        "command": list(argv),
        "config": config,
        "seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        "cwd": os.getcwd(),
        "outputs": {str(p): _digest(Path(p)) for p in outputs},
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")


def _finish(args, argv, config, seed, outputs, default_manifest=None):
    target = args.manifest or default_manifest
    if target and outputs:
        write_manifest(Path(target), argv, config, seed, outputs)


def _emit(text: str, out: str | None) -> list[Path]:
    if out:
        Path(out).write_text(text)
        return [Path(out)]
    sys.stdout.write(text)
    return []


# -- commands ---------------------------------------------------------------


def cmd_generate(args, argv):
    from .generators import generate_bag

    cfg, file_data = resolve_config(args)
    seed = resolve_seed(args, file_data)
    gen = args.gen or file_data.get("gen") or "angie"
    n = args.n or int(file_data.get("n", 1))
    bag = generate_bag(gen, cfg, n, seed, threads=args.threads)
    import io

    buf = io.StringIO()
    write_patterns(buf, bag.rows(), bag.params.k_grid, bag.params.t_grid)
    outputs = _emit(buf.getvalue(), args.out)
    echo = {**cfg.to_dict(), "gen": gen, "n": n}
    _finish(args, argv, echo, seed, outputs, args.out and args.out + ".manifest.json")
    return 0


def _read_pattern_file(path):
    try:
        with open(path) as fh:
            return read_patterns(fh)
    except OSError as exc:
        raise CliError(EXIT_MALFORMED, "input", str(exc)) from exc


def cmd_evaluate(args, argv):
    from .evaluation import evaluate_bag
    from .generators import bag_from_patterns

    patterns, k_grid, _ = _read_pattern_file(args.patterns)
    cfg, _ = resolve_config(args)
    d = derive_params(cfg, strict=False)
    if d.k_grid != k_grid:
        raise CliError(EXIT_MALFORMED, "input", f"file grid {k_grid} != configured grid {d.k_grid}")
    if not patterns:
        raise CliError(EXIT_MALFORMED, "input", "pattern file holds no patterns")
    report = evaluate_bag(bag_from_patterns(patterns, d), args.unique_limit)
    outputs = _emit(report.to_json() + "\n", args.out)
    _finish(args, argv, cfg.to_dict(), None, outputs, args.out and args.out + ".manifest.json")
    return 0


def cmd_sweep(args, argv):
    from .experiments import (
        experiment1_spec,
        experiment2_spec,
        run_sweep,
        sweep_spec,
        write_report,
    )

    kw = {}
    if args.gen:
        kw["generators"] = tuple(args.gen.split(","))
    if args.sigma2_grid:
        kw["sigma2_grid"] = tuple(float(s) for s in args.sigma2_grid.split(","))
    for name in ("n_min", "cap", "window", "eta_at"):
        if getattr(args, name) is not None:
            kw[name] = getattr(args, name)
    try:
        if args.experiment == "1":
            spec = experiment1_spec(args.desk_scale, **kw)
        elif args.case in ("A", "B", "C", "D") and not any(
            getattr(args, k) for k in _CFG_KEYS + ("config",)
        ):
            spec = experiment2_spec(args.case, args.desk_scale, **kw)
        else:
            cfg, _ = resolve_config(args)
            spec = sweep_spec(cfg, "custom", 10_000, args.desk_scale, **kw)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, "spec", str(exc)) from exc
    seed = resolve_seed(args)

    def progress(cell):
        if not args.quiet:
            state = "error" if cell.error else ("converged" if cell.converged else "cap")
            print(f"{cell.generator:6s} sigma2={cell.sigma2:<10.4g} n={cell.n:<8d} {state}", file=sys.stderr)

    report = run_sweep(spec, seed, threads=args.threads, progress=progress)
    outputs = write_report(report, args.out)
    _finish(args, argv, spec.echo(), seed, outputs, str(Path(args.out) / "manifest.json"))
    return 0


def cmd_cases(args, argv):
    from .experiments import builtin_cases

    rows = []
    for name, cfg in builtin_cases().items():
        d = derive_params(cfg)
        rows.append({
            "case": name,
            "tau_ms": float(cfg.tau * 1000),
            "t_grid_us": float(cfg.t_grid * 10**6),
            "f_khz": float(cfg.f_req / 1000),
            "t_min_ms": None if cfg.t_min is None else float(cfg.t_min * 1000),
            "t_max_ms": None if cfg.t_max is None else float(cfg.t_max * 1000),
            "k_grid": d.k_grid,
            "k_req": d.k_req,
            "k_min": d.k_min if cfg.t_min is not None else None,
            "k_max": None if cfg.t_max is None else d.k_max,
        })
    if args.json:
        text = json.dumps(rows, indent=2) + "\n"
    else:
        cols = list(rows[0])
        fmt = lambda v: "---" if v is None else f"{v:g}" if isinstance(v, float) else str(v)  # noqa: E731
        table = [cols] + [[fmt(r[c]) for c in cols] for r in rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
        text = "".join(
            "  ".join(cell.rjust(w) for cell, w in zip(row, widths)) + "\n" for row in table
        )
    outputs = _emit(text, args.out)
    _finish(args, argv, None, None, outputs)
    return 0


def _read_rom_input(path):
    from .romtools import MAGIC, RomImage, read_archive

    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(EXIT_MALFORMED, "input", str(exc)) from exc
    if data[:4] == MAGIC:
        return [RomImage.from_bytes(data)]
    import io

    return read_archive(io.BytesIO(data))


def cmd_rom(args, argv):
    from .romtools import decode_rom, encode_rom, simulate_driver, write_archive

    if args.rom_cmd == "encode":
        patterns, _, _ = _read_pattern_file(args.input)
        if args.index is not None:
            if not 0 <= args.index < len(patterns):
                raise CliError(EXIT_INVALID, "index", f"pattern index {args.index} out of range")
            Path(args.out).write_bytes(encode_rom(patterns[args.index]).to_bytes())
        else:
            with open(args.out, "wb") as fh:
                write_archive(fh, (encode_rom(p) for p in patterns))
        _finish(args, argv, None, None, [Path(args.out)], args.out + ".manifest.json")
        return 0

    images = _read_rom_input(args.input)
    if args.rom_cmd == "decode":
        import io

        pats = [decode_rom(img, args.t_grid and parse_quantity(args.t_grid, "time") or 1) for img in images]
        buf = io.StringIO()
        k_grid = pats[0].k_grid if pats else 0
        write_patterns(buf, pats, k_grid, pats[0].t_grid if pats else 1)
        outputs = _emit(buf.getvalue(), args.out)
    else:
        traces = []
        for img in images:
            decode_rom(img)
            traces.append(simulate_driver(img, args.clock_div).events.tolist())
        text = json.dumps({"clock_div": args.clock_div, "events": traces}) + "\n"
        outputs = _emit(text, args.out)
    _finish(args, argv, None, None, outputs, args.out and args.out + ".manifest.json")
    return 0


def cmd_bench(args, argv):
    from .experiments import time_generation

    backends = list(kernels.BACKENDS) if args.backend == "both" else [args.backend or kernels.ACTIVE]
    f_values = args.f_values.split(",")
    lines = ["backend,f_req,k_req,n,seconds,patterns_per_second"]
    for be in backends:
        for f, k_req, secs in time_generation(f_values, args.n, backend=be, kind=args.gen):
            lines.append(f"{be},{f},{k_req},{args.n},{secs:.6f},{args.n / secs:.1f}")
            if not args.quiet:
                print(lines[-1], file=sys.stderr)
    outputs = _emit("\n".join(lines) + "\n", args.out)
    _finish(args, argv, None, None, outputs)
    return 0


def cmd_replay(args, argv):
    try:
        manifest = json.loads(Path(args.manifest_file).read_text())
        command = manifest["command"]
        expected = manifest["outputs"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise CliError(EXIT_MALFORMED, "manifest", str(exc)) from exc
    cwd = os.getcwd()
    os.chdir(manifest.get("cwd", cwd))
    try:
        # the replayed run must not overwrite the manifest being checked
        main([*command, "--manifest", os.devnull])
        mismatched = [p for p, h in expected.items() if _digest(Path(p)) != h]
    finally:
        os.chdir(cwd)
    if mismatched:
        raise CliError(EXIT_REPLAY, "replay", f"outputs differ: {', '.join(mismatched)}")
    print(json.dumps({"replayed": command, "verified": sorted(expected)}))
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="patternforge", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--out", help="output file (directory for sweep); default stdout")
        sp.add_argument("--manifest", help="where to write the run manifest")
        if seed:
            sp.add_argument("--seed", type=lambda s: int(s, 0))
            sp.add_argument("--threads", type=int, default=os.cpu_count())

    g = sub.add_parser("generate", help="generate a bag of patterns")
    _add_config_flags(g)
    g.add_argument("--gen", choices=("js", "ars", "angie"))
    g.add_argument("--n", type=int)
    common(g)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="bag statistics for a pattern file")
    e.add_argument("patterns")
    _add_config_flags(e, sigma2=False)
    e.add_argument("--unique-limit", type=int)
    common(e, seed=False)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="variance sweep with CSV/JSON reports")
    _add_config_flags(s, sigma2=False)
    s.add_argument("--experiment", choices=("1",))
    s.add_argument("--gen", help="comma-separated subset of js,ars,angie")
    s.add_argument("--sigma2-grid")
    s.add_argument("--n-min", type=int, dest="n_min")
    s.add_argument("--cap", type=int)
    s.add_argument("--window", type=int)
    s.add_argument("--eta-at", type=int, dest="eta_at")
    s.add_argument("--desk-scale", action="store_true")
    s.add_argument("--quiet", action="store_true")
    common(s)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("cases", help="built-in configurations with derived grid counts")
    c.add_argument("--json", action="store_true")
    common(c, seed=False)
    c.set_defaults(func=cmd_cases)

    r = sub.add_parser("rom", help="ROM images and driver simulation")
    rsub = r.add_subparsers(dest="rom_cmd", required=True, parser_class=_Parser)
    re_ = rsub.add_parser("encode")
    re_.add_argument("input")
    re_.add_argument("--index", type=int, help="write one .crsp record for this pattern")
    re_.add_argument("--out", required=True)
    re_.add_argument("--manifest")
    rd = rsub.add_parser("decode")
    rd.add_argument("input")
    rd.add_argument("--t-grid", dest="t_grid")
    common(rd, seed=False)
    rs = rsub.add_parser("simulate")
    rs.add_argument("input")
    rs.add_argument("--clock-div", type=int, default=8)
    common(rs, seed=False)
    r.set_defaults(func=cmd_rom)

    b = sub.add_parser("bench", help="generation throughput vs sampling rate")
    b.add_argument("--f-values", default="10kHz,25kHz,50kHz,100kHz")
    b.add_argument("--n", type=int, default=100_000)
    b.add_argument("--gen", default="angie", choices=("js", "ars", "angie"))
    b.add_argument("--backend", choices=("numba", "numpy", "both"))
    b.add_argument("--quiet", action="store_true")
    common(b, seed=False)
    b.set_defaults(func=cmd_bench)

    rp = sub.add_parser("replay", help="re-run a manifest and verify output digests")
    rp.add_argument("manifest_file")
    rp.add_argument("--manifest", help=argparse.SUPPRESS)
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    from .romtools import RomError

    try:
        args = build_parser().parse_args(argv)
        return args.func(args, argv)
    except CliError as exc:
        code, kind, msg = exc.code, exc.kind, str(exc)
    except InfeasibleConfig as exc:
        code, kind, msg = EXIT_INFEASIBLE, f"infeasible:{exc.constraint}", str(exc)
    except (PatternFormatError, RomError) as exc:
        code, kind, msg = EXIT_MALFORMED, type(exc).__name__, str(exc)
    except ValueError as exc:
        code, kind, msg = EXIT_INVALID, "invalid", str(exc)
    sys.stderr.write(json.dumps({"error": kind, "message": msg, "exit": code}) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
