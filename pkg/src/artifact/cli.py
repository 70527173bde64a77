"""Command-line surface: sectioned config files, subcommands, and
bit-stable CSV/JSON result bundles.

Config format (plain ``key = value`` lines under ``[section]`` headers,
``#`` starts a comment)::

    [grid]         d, n, ldom          (ldom accepts "64pi")
    [physics]      kappa (scalar or comma list), preset, epsilon
    [init]         recipe, amplitude, seed, band ("j_lo, j_hi")
    [time]         dt, tmax, cadence
    [diagnostics]  besov ("s,p,r;s,p,r;..."), alpha (comma list), sigma
    [experiment]   kind

Unknown sections and keys are hard errors naming the line; ``[grid]`` and
the kappa entry are required, everything else defaults.  The kernel and
strichartz subcommands take their study-specific exponents as flags
(``--block``, ``--lp``, ``--triple``) because they parameterize the probe,
not the simulated system.

Output bundles are deterministic byte-for-byte for identical inputs:
CSV floats carry 17 significant digits, the JSON summary is key-sorted,
and wall time goes to stderr only.  Files are written to a temp name and
renamed, so an aborted process never leaves a partial file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy

from artifact import __version__
from artifact.dyadic import (
    DyadicCutoff,
    bernstein_ratio,
    bony_decompose,
    dyadic_block,
    partition_of_unity_residual,
    reconstruct,
)
from artifact.experiments import (
    DiagnosticSeries,
    ExperimentConfig,
    FitResult,
    decay_study,
    kappa_sweep,
    kernel_study,
    run_nsk,
    strichartz_study,
)
from artifact.spectral import Grid, SpectralField

KNOWN_KEYS = {
    "grid": ("d", "n", "ldom"),
    "physics": ("kappa", "preset", "epsilon"),
    "init": ("recipe", "amplitude", "seed", "band"),
    "time": ("dt", "tmax", "cadence"),
    "diagnostics": ("besov", "alpha", "sigma"),
    "experiment": ("kind",),
}
REQUIRED_KEYS = (("grid", "d"), ("grid", "n"), ("grid", "ldom"), ("physics", "kappa"))


class ConfigError(ValueError):
    """Config text rejected; the message names the key and line."""


# ---------------------------------------------------------------------------
# value converters


def _float(text: str) -> float:
    text = text.strip()
    m = re.fullmatch(r"([-+]?[0-9.eE+-]*?)\s*\*?\s*pi", text)
    if m:
        head = m.group(1)
        factor = 1.0 if head in ("", "+") else -1.0 if head == "-" else float(head)
        return factor * math.pi
    return float(text)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(_float(part) for part in text.split(","))


def _int(text: str) -> int:
    return int(text.strip())


def _band(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"band needs two comma-separated integers, got {text!r}")
    return int(parts[0]), int(parts[1])


def _besov_list(text: str) -> tuple[tuple[float, float, float], ...]:
    triples = []
    for chunk in text.split(";"):
        parts = chunk.split(",")
        if len(parts) != 3:
            raise ValueError(f"besov entry needs three values, got {chunk!r}")
        triples.append((_float(parts[0]), _float(parts[1]), _float(parts[2])))
    return tuple(triples)


_CONVERT = {
    ("grid", "d"): ("d", _int),
    ("grid", "n"): ("n", _int),
    ("grid", "ldom"): ("ldom", _float),
    ("physics", "kappa"): ("kappas", _float_list),
    ("physics", "preset"): ("preset", str),
    ("physics", "epsilon"): ("epsilon", _float),
    ("init", "recipe"): ("recipe", str),
    ("init", "amplitude"): ("amplitude", _float),
    ("init", "seed"): ("seed", _int),
    ("init", "band"): ("band", _band),
    ("time", "dt"): ("dt", _float),
    ("time", "tmax"): ("tmax", _float),
    ("time", "cadence"): ("cadence", _float),
    ("diagnostics", "besov"): ("besov", _besov_list),
    ("diagnostics", "alpha"): ("alphas", _float_list),
    ("diagnostics", "sigma"): ("sigma", _float),
    ("experiment", "kind"): ("kind", str),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse sectioned key-value text into a validated config.

    Raises:
        ConfigError: unknown section/key, syntax error, bad value, missing
            required key, or a range violation; messages carry the line.
    """
    section: str | None = None
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: unclosed section header {line!r}")
            name = line[1:-1].strip().lower()
            if name not in KNOWN_KEYS:
                raise ConfigError(f"line {lineno}: unknown section '[{name}]'")
            section = name
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if section is None:
            raise ConfigError(
                f"line {lineno}: key '{key}' appears before any section header"
            )
        if key not in KNOWN_KEYS[section]:
            raise ConfigError(f"line {lineno}: unknown key '{key}' in [{section}]")
        field_name, convert = _CONVERT[(section, key)]
        if field_name in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}' in [{section}]")
        try:
            values[field_name] = convert(value)
        except ValueError as exc:
            raise ConfigError(
                f"line {lineno}: could not parse '{key}': {exc}"
            ) from exc
        lines[field_name] = lineno
    for sec, key in REQUIRED_KEYS:
        field_name = _CONVERT[(sec, key)][0]
        if field_name not in values:
            raise ConfigError(f"missing required key '{key}' in [{sec}]")
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        blamed = _blame(str(exc), lines)
        prefix = f"line {blamed}: " if blamed is not None else ""
        raise ConfigError(f"{prefix}{exc}") from exc


def _blame(message: str, lines: Mapping[str, int]) -> int | None:
    """Line of the config key a validation message most plausibly names."""
    best: tuple[int, int] | None = None
    for field_name, lineno in lines.items():
        m = re.search(rf"\b{re.escape(field_name)}\b", message)
        if field_name == "kappas":
            m = re.search(r"\bkappa\b", message)
        if field_name == "alphas":
            m = re.search(r"\balpha\b", message)
        if m and (best is None or m.start() < best[0]):
            best = (m.start(), lineno)
    return None if best is None else best[1]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit_config(config: ExperimentConfig) -> str:
    """Render a config as the sectioned text format; parse round-trips."""
    out = [
        "[grid]",
        f"d = {config.d}",
        f"n = {config.n}",
        f"ldom = {_fmt(config.ldom)}",
        "",
        "[physics]",
        f"kappa = {', '.join(_fmt(k) for k in config.kappas)}",
        f"preset = {config.preset}",
        f"epsilon = {_fmt(config.epsilon)}",
        "",
        "[init]",
        f"recipe = {config.recipe}",
        f"amplitude = {_fmt(config.amplitude)}",
        f"seed = {config.seed}",
        f"band = {config.band[0]}, {config.band[1]}",
        "",
        "[time]",
        f"dt = {_fmt(config.dt)}",
        f"tmax = {_fmt(config.tmax)}",
        f"cadence = {_fmt(config.cadence)}",
        "",
        "[diagnostics]",
    ]
    if config.besov:
        triples = ";".join(
            ",".join(_fmt(x) for x in triple) for triple in config.besov
        )
        out.append(f"besov = {triples}")
    if config.alphas:
        out.append(f"alpha = {', '.join(_fmt(a) for a in config.alphas)}")
    out.append(f"sigma = {_fmt(config.sigma)}")
    out += ["", "[experiment]", f"kind = {config.kind}", ""]
    return "\n".join(out)


# ---------------------------------------------------------------------------
# result emission


@dataclass(frozen=True)
class ResultBundle:
    """Paths and status of one emitted result set."""

    csv_paths: tuple[Path, ...]
    summary_path: Path
    status: str
    reason: str


def _atomic_write(path: Path, data: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _csv_cell(name: str) -> str:
    # column labels carry commas (B[0,2,1]); quote per RFC 4180
    return f'"{name}"' if "," in name or '"' in name else name


def _series_csv(series: DiagnosticSeries) -> str:
    names = [c for c in series.columns if c != "Wsup"]
    rows = [",".join(["t"] + [_csv_cell(n) for n in names])]
    for i, t in enumerate(series.times):
        rows.append(
            ",".join([_fmt(t)] + [_fmt(series.columns[n][i]) for n in names])
        )
    return "\n".join(rows) + "\n"


def _jsonable(obj):
    if isinstance(obj, FitResult):
        return _jsonable(asdict(obj))
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def emit_results(
    series: Sequence[tuple[str, DiagnosticSeries]],
    fits: Mapping[str, object],
    config: ExperimentConfig | None,
    out_dir: Path,
    *,
    status: str | None = None,
    reason: str = "",
) -> ResultBundle:
    """Write per-series CSVs plus the key-sorted summary JSON.

    Status defaults to "aborted" as soon as any series aborted, with the
    first abort reason; bytes are deterministic for identical inputs.

    Raises:
        OSError: unwritable output directory.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if status is None:
        status, reason = "completed", ""
        for _, ser in series:
            if ser.status != "completed":
                status, reason = ser.status, ser.abort_reason
                break
    csv_paths = []
    for name, ser in series:
        path = out_dir / f"{name}.csv"
        _atomic_write(path, _series_csv(ser))
        csv_paths.append(path)
    summary = {
        "status": status,
        "reason": reason,
        "files": [p.name for p in csv_paths],
        "fits": _jsonable(dict(fits)),
        "versions": {
            "artifact": __version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if config is not None:
        summary["kind"] = config.kind
        summary["seed"] = config.seed
        summary["config"] = _jsonable(asdict(config))
        summary["config_echo"] = emit_config(config)
    summary_path = out_dir / "summary.json"
    _atomic_write(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return ResultBundle(
        csv_paths=tuple(csv_paths),
        summary_path=summary_path,
        status=status,
        reason=reason,
    )


# ---------------------------------------------------------------------------
# the besov self-test


def besov_selftest(n: int = 64) -> dict[str, object]:
    """Partition-of-unity / orthogonality / Bony / Bernstein measurements.

    Returns the measured residuals plus an overall "ok" verdict against
    the advertised gates (1e-12 for the identities, [0.7, 2.7] for the
    k = 1, p = 2 Bernstein ratios).
    """
    grid = Grid(d=2, n=n, ldom=2.0 * math.pi)
    rng = np.random.default_rng(0)
    u = SpectralField.from_physical(grid, rng.normal(size=(1,) + grid.shape)).dealias()
    v = SpectralField.from_physical(grid, rng.normal(size=(1,) + grid.shape)).dealias()
    scale = float(np.max(np.abs(u.coeffs)))

    partition = partition_of_unity_residual(grid)
    rebuilt = reconstruct(u)
    reconstruction = float(np.max(np.abs(rebuilt.coeffs - u.coeffs))) / scale

    cut = DyadicCutoff.for_grid(grid)
    js = list(cut.resolvable())
    ortho = 0.0
    for j in js:
        bj = dyadic_block(u, j)
        for jp in js:
            if abs(j - jp) >= 2:
                leak = np.max(np.abs(dyadic_block(bj, jp).coeffs))
                ortho = max(ortho, float(leak) / scale)

    tu, tv, rem = bony_decompose(u, v)
    product = SpectralField.from_physical(
        grid, u.physical() * v.physical()
    ).dealias()
    total = tu.coeffs + tv.coeffs + rem.coeffs
    bony = float(np.max(np.abs(total - product.coeffs)))
    bony /= max(float(np.max(np.abs(product.coeffs))), 1e-300)

    ratios = []
    for j in cut.norm_band():
        block = dyadic_block(u, j)
        if np.any(np.abs(block.coeffs) > 0):
            ratios.append(bernstein_ratio(block, j, 1.0, 2.0, 2.0))
    checks = {
        "partition_residual": partition,
        "reconstruction": reconstruction,
        "orthogonality": ortho,
        "bony": bony,
        "bernstein_min": min(ratios),
        "bernstein_max": max(ratios),
    }
    ok = bool(
        partition <= 1e-12
        and reconstruction <= 1e-12
        and ortho <= 1e-12
        and bony <= 1e-12
        and 0.7 <= checks["bernstein_min"]
        and checks["bernstein_max"] <= 2.7
    )
    return {**checks, "ok": ok}


# ---------------------------------------------------------------------------
# subcommands


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artifact",
        description="capillary-flow scaling studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    kinds = ("simulate", "sweep-kappa", "decay", "kernel", "strichartz")
    for kind in kinds:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=1, help="sweep worker bound")
        if kind == "kernel":
            p.add_argument("--block", type=int, default=0, help="dyadic bump index j")
            p.add_argument("--lp", default="inf", help="Lp exponent to measure")
        if kind == "strichartz":
            p.add_argument(
                "--triple", default="4,4,0", help="time/space/index exponents r,p,k"
            )
    p = sub.add_parser("besov-selftest")
    p.add_argument("--out-dir", default=None, help="optional output directory")
    p.add_argument("--n", type=int, default=64, help="self-test grid size")
    return parser


def _fail(out_dir: Path | None, status: str, reason: str) -> int:
    code = 1 if status == "error" else 2
    print(f"[artifact] {status}: {reason}", file=sys.stderr)
    if out_dir is not None:
        try:
            emit_results([], {}, None, out_dir, status=status, reason=reason)
        except OSError as exc:
            print(f"[artifact] could not write summary: {exc}", file=sys.stderr)
    return code


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns 0 on success, 1 on validation, 2 on abort."""
    started = time.perf_counter()
    args = _build_parser().parse_args(argv)

    if args.command == "besov-selftest":
        result = besov_selftest(args.n)
        out_dir = None if args.out_dir is None else Path(args.out_dir)
        if out_dir is None:
            print(json.dumps(_jsonable(result), indent=2, sort_keys=True))
        else:
            status = "completed" if result["ok"] else "error"
            reason = "" if result["ok"] else "dyadic self-test gate failed"
            emit_results([], {"selftest": result}, None, out_dir,
                         status=status, reason=reason)
        return 0 if result["ok"] else 1

    out_dir = Path(args.out_dir)
    threads = max(1, args.threads)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        return _fail(out_dir, "error", f"cannot read config: {exc}")
    try:
        config = parse_config(text)
        config = replace(config, kind=args.command)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    except ValueError as exc:
        return _fail(out_dir, "error", str(exc))

    try:
        if args.command == "simulate":
            series = run_nsk(config)
            bundle = emit_results(
                [("series", series)], {}, config, out_dir
            )
        elif args.command == "sweep-kappa":
            sweep = kappa_sweep(config, workers=threads)
            named = [
                (f"series-kappa-{kap:g}", ser) for kap, ser in sweep.members
            ]
            fits = {
                "compressible": sweep.fit_compressible,
                "gap": sweep.fit_gap,
                "expected_compressible": sweep.expected_compressible,
                "expected_gap": sweep.expected_gap,
            }
            bundle = emit_results(named, fits, config, out_dir)
        elif args.command == "decay":
            res = decay_study(config)
            fits: dict[str, object] = {
                f"alpha={alpha:g}": fit for alpha, fit in res.fits.items()
            }
            fits["expected"] = {f"{a:g}": v for a, v in res.expected.items()}
            fits["bneg_ratio"] = res.bneg_ratio
            bundle = emit_results(
                [("series", res.series)], fits, config, out_dir
            )
        elif args.command == "kernel":
            res = kernel_study(
                config.d, config.kappas, args.block, float(args.lp)
            )
            fits = {
                "t": res.fit_t,
                "kappa": res.fit_kappa,
                "expected_t": res.expected_t,
                "expected_kappa": res.expected_kappa,
            }
            bundle = emit_results([], fits, config, out_dir)
        else:
            triple = tuple(float(x) for x in args.triple.split(","))
            if len(triple) != 3:
                raise ValueError(f"--triple needs r,p,k, got {args.triple!r}")
            res = strichartz_study(config.d, config.kappas, triple)
            fits = {"kappa": res.fit, "expected": res.expected,
                    "triple": list(res.triple)}
            bundle = emit_results([], fits, config, out_dir)
    except ValueError as exc:
        return _fail(out_dir, "error", str(exc))
    except RuntimeError as exc:
        return _fail(out_dir, "aborted", str(exc))
    except OSError as exc:
        return _fail(None, "error", f"cannot write results: {exc}")

    elapsed = time.perf_counter() - started
    print(f"[artifact] {args.command}: {bundle.status} in {elapsed:.1f}s",
          file=sys.stderr)
    if bundle.status != "completed":
        print(f"[artifact] reason: {bundle.reason}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))
