"""Command-line front end: ``mmhybrid run`` and ``mmhybrid sweep``.

Every flag has a configuration-file equivalent (see ``docs/config.md``).
Flags override the file, and the merged configuration is recorded in
``manifest.json`` before any result is written.  Passing that manifest back
with ``--manifest`` reproduces the CSV outputs byte for byte.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import yaml

from . import __version__
from .metrics import PERCENTILES, UNDEFINED, aggregate, fmt, write_all
from .scenario import (SCHEMES, ConfigError, InvalidValue, Policy, build_scenario,
                       scenario_to_dict)
from .seeding import derive_seed
from .simulation import run_repetition

__all__ = ["main", "derive_seed", "AXES", "UnknownAxis"]

log = logging.getLogger("mmhybrid")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CONVERGENCE = 0, 1, 2, 3
AXES = ("bs_density", "ue_density", "high_band_width", "preset", "policy")
PRESET_KEYS = ("bs_tx_power_dbm", "bs_elements", "ue_elements")


class UnknownAxis(ConfigError):
    pass


# ---------------------------------------------------------------------------
# configuration merging

def _read_doc(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"cannot read configuration file {p}")
    try:
        doc = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: not valid YAML ({exc})") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: configuration must be a mapping")
    return doc


def _section(doc: dict, *keys) -> dict:
    for key in keys:
        nxt = doc.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            doc[key] = nxt
        doc = nxt
    return doc


def set_preset(doc: dict, preset: str) -> None:
    """Select a preset; explicit antenna counts and powers in the file give way."""
    doc["preset"] = preset
    for band in ("low", "high"):
        carrier = _section(doc, "carriers").get(band)
        if isinstance(carrier, dict):
            for key in PRESET_KEYS:
                carrier.pop(key, None)


def set_axis(doc: dict, axis: str, value) -> None:
    if axis == "bs_density":
        # keep the UE/BS ratio, as in the density comparisons
        old_bs = float(doc.get("bs_density", 30.0))
        old_ue = float(doc.get("ue_density", 300.0))
        doc["bs_density"] = float(value)
        doc["ue_density"] = float(value) * old_ue / old_bs
    elif axis == "ue_density":
        doc["ue_density"] = float(value)
    elif axis == "high_band_width":
        _section(doc, "carriers", "high")["total_bandwidth_hz"] = float(value)
    elif axis == "preset":
        set_preset(doc, str(value))
    elif axis == "policy":
        _section(doc, "association")["policy"] = str(value)
    else:
        raise UnknownAxis(f"unknown sweep axis {axis!r}; expected one of {', '.join(AXES)}")


def merge_flags(doc: dict, args) -> dict:
    doc = copy.deepcopy(doc)
    run = _section(doc, "run")
    if args.preset is not None:
        set_preset(doc, args.preset)
    if args.bs_density is not None:
        doc["bs_density"] = args.bs_density
    if args.ue_density is not None:
        doc["ue_density"] = args.ue_density
    if args.high_band_width is not None:
        _section(doc, "carriers", "high")["total_bandwidth_hz"] = args.high_band_width
    if args.policy is not None:
        _section(doc, "association")["policy"] = args.policy
    for flag, key in (("seed", "seed"), ("reps", "repetitions"), ("scheme", "scheme"),
                      ("threads", "threads"), ("out", "out")):
        val = getattr(args, flag)
        if val is not None:
            run[key] = val
    if args.strict_convergence:
        run["strict_convergence"] = True
    return doc


def _schemes(run: dict) -> list[str]:
    raw = run.get("scheme", "all")
    names = raw if isinstance(raw, list) else [raw]
    out = []
    for name in names:
        name = str(name).lower()
        if name == "all":
            out.extend(SCHEMES)
        elif name in SCHEMES:
            out.append(name)
        else:
            raise InvalidValue("run.scheme", f"unknown scheme {name!r}")
    return list(dict.fromkeys(out))


def _threads(run: dict) -> int:
    n = run.get("threads")
    if n is None:
        return os.cpu_count() or 1
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InvalidValue("run.threads", "must be a positive integer")
    return n


def _default_out() -> Path:
    return Path("results") / datetime.now().strftime("%Y%m%d-%H%M%S")


# ---------------------------------------------------------------------------
# execution

def _job(args):
    cfg, rep, schemes = args
    return run_repetition(cfg, rep, schemes)


def run_reports(cfg, schemes, threads: int = 1) -> list:
    """All repetitions of ``cfg``; ordered by repetition index whatever the pool does."""
    jobs = [(cfg, r, tuple(schemes)) for r in range(cfg.repetitions)]
    if threads <= 1 or len(jobs) <= 1:
        results = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            results = list(pool.map(_job, jobs))
    return [rep for batch in results for rep in batch]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=False) + "\n")


def execute(doc: dict, out: Path, command: str, extra: dict | None = None):
    """Build, record, run and write one configuration; returns the metrics report."""
    cfg = build_scenario(doc)
    run = doc.get("run") or {}
    schemes = _schemes(run)
    threads = _threads(run)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "version": __version__,
        "scenario": scenario_to_dict(cfg),
        "schemes": schemes,
        "seed": cfg.seed,
        "repetitions": cfg.repetitions,
        "strict_convergence": bool(run.get("strict_convergence", False)),
        "output_dir": str(out),
        "started": _now(),
        "finished": None,
    }
    manifest.update(extra or {})
    _write_json(out / "manifest.json", manifest)
    log.info("running %d repetitions of %s into %s", cfg.repetitions, ", ".join(schemes), out)
    report = aggregate(run_reports(cfg, schemes, threads))
    write_all(out, report)
    manifest["finished"] = _now()
    _write_json(out / "manifest.json", manifest)
    return report, manifest


def _converged(report) -> bool:
    return all(all(m.converged) for m in report.schemes.values())


def _replay_doc(path) -> tuple[dict, dict]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"cannot read manifest {p}")
    try:
        manifest = json.loads(p.read_text())
        doc = copy.deepcopy(manifest["scenario"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{p}: not a run manifest ({exc})") from None
    run = _section(doc, "run")
    run["scheme"] = manifest.get("schemes", "all")
    run["strict_convergence"] = bool(manifest.get("strict_convergence", False))
    return doc, manifest


def cmd_run(args) -> int:
    if args.manifest is not None:
        doc, old = _replay_doc(args.manifest)
        if args.out is None:
            args.out = str(Path(old.get("output_dir", ".")).with_name(
                Path(old.get("output_dir", "run")).name + "-replay"))
    else:
        doc = _read_doc(args.config)
    doc = merge_flags(doc, args)
    run = doc["run"]
    out = Path(run.pop("out", None) or _default_out())
    report, _ = execute(doc, out, "run")
    for name, m in report.schemes.items():
        cells = "  ".join(f"p{p}={m.percentiles[p] / 1e9:.4f}" for p in PERCENTILES)
        print(f"{name:9s} {cells} Gbit/s")
    print(f"results written to {out}")
    if run.get("strict_convergence") and not _converged(report):
        print("error: at least one repetition did not converge", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def _parse_values(axis: str, raw: str) -> list:
    items = [v.strip() for v in raw.split(",") if v.strip()]
    if not items:
        raise InvalidValue("values", "no sweep values given")
    if axis in ("bs_density", "ue_density", "high_band_width"):
        try:
            return [float(v) for v in items]
        except ValueError:
            raise InvalidValue("values", f"non-numeric value in {raw!r}") from None
    return items


def cmd_sweep(args) -> int:
    if args.axis not in AXES:
        raise UnknownAxis(f"unknown sweep axis {args.axis!r}; expected one of {', '.join(AXES)}")
    values = _parse_values(args.axis, args.values)
    base = merge_flags(_read_doc(args.config), args)
    run = base["run"]
    root = Path(run.pop("out", None) or _default_out())
    base_seed = build_scenario(base).seed
    root.mkdir(parents=True, exist_ok=True)

    rows, ok = [], True
    points = []
    for value in values:
        doc = copy.deepcopy(base)
        set_axis(doc, args.axis, value)
        seed = derive_seed(base_seed, [("axis", args.axis), ("value", str(value))])
        doc["run"]["seed"] = seed
        label = fmt(value) if isinstance(value, float) else str(value)
        out = root / f"{args.axis}={label}"
        report, _ = execute(doc, out, "sweep",
                            {"sweep": {"axis": args.axis, "value": value, "base_seed": base_seed}})
        points.append({"value": value, "seed": seed, "output_dir": str(out)})
        ok &= _converged(report)
        for name, m in report.schemes.items():
            for p in PERCENTILES:
                ratio = m.ratios.get(p)
                rows.append([args.axis, label, name, p, fmt(m.percentiles[p]),
                             UNDEFINED if ratio is None else fmt(ratio)])
            rows.append([args.axis, label, name, "mean", fmt(m.mean_rate), ""])
        print(f"{args.axis}={label} done")

    _write_json(root / "sweep.json", {"axis": args.axis, "base_seed": base_seed,
                                      "version": __version__, "points": points})
    with open(root / "sweep_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "scheme", "p", "value_bps", "ratio_vs_licensed"])
        w.writerows(rows)
    print(f"sweep summary written to {root / 'sweep_summary.csv'}")
    if run.get("strict_convergence") and not ok:
        print("error: at least one repetition did not converge", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="YAML scenario file")
    p.add_argument("--scheme", choices=("hybrid", "licensed", "pooled", "all"))
    p.add_argument("--reps", type=int, metavar="N")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--threads", type=int, metavar="N")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--policy", choices=[p.value for p in Policy])
    p.add_argument("--preset", choices=("i", "ii", "iii"))
    p.add_argument("--bs-density", type=float, metavar="F")
    p.add_argument("--ue-density", type=float, metavar="F")
    p.add_argument("--high-band-width", type=float, metavar="HZ")
    p.add_argument("--strict-convergence", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmhybrid", description="Multi-operator mmWave spectrum access simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run repetitions for one or more access schemes")
    _common(run)
    run.add_argument("--manifest", metavar="PATH", help="replay the run recorded in a manifest")
    sweep = sub.add_parser("sweep", help="run one configuration per value of a parameter")
    _common(sweep)
    sweep.add_argument("--axis", required=True, help=f"one of {', '.join(AXES)}")
    sweep.add_argument("--values", required=True, help="comma-separated values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_sweep(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001  runtime failures map to exit 2
        log.debug("run failed", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
