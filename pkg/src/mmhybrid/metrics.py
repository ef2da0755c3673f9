"""Percentiles, CDFs, load histograms and ratio tables across repetitions.

Rates are pooled over repetitions with one sample per UE per repetition;
uncovered UEs contribute a zero rate and no SINR sample.
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .scenario import ScenarioConfig

PERCENTILES = (5, 50, 95)
BASELINE = "licensed"
UNDEFINED = "undefined"
SCHEME_ORDER = ("hybrid", "licensed", "pooled")


class MetricsError(ValueError):
    pass


class EmptySamples(MetricsError):
    pass


class MixedConfigs(MetricsError):
    pass


def fmt(x) -> str:
    """Serialize a float with 9 significant digits."""
    return f"{float(x):.9g}"


def percentile(samples, p: float) -> float:
    """Nearest-rank percentile of presorted ``samples``."""
    n = len(samples)
    if n == 0:
        raise EmptySamples("percentile of an empty sample set")
    if not 0 <= p <= 100:
        raise MetricsError(f"percent must lie in [0, 100], got {p}")
    rank = min(max(math.ceil(p / 100 * n), 1), n)
    return float(samples[rank - 1])


def ratio_vs_baseline(value: float, baseline: float) -> float | None:
    """``value / baseline``, or None (undefined) when the baseline is not positive."""
    if not baseline > 0:
        return None
    return value / baseline


def ecdf(samples) -> tuple[np.ndarray, np.ndarray]:
    """Sorted samples and their empirical CDF values i/n."""
    x = np.sort(np.asarray(samples, dtype=float))
    return x, np.arange(1, len(x) + 1) / max(len(x), 1)


@dataclass(frozen=True)
class LoadDistribution:
    per_bs: np.ndarray      # UEs served per BS, both carriers summed
    uncovered: int

    @property
    def histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(int(n) for n in self.per_bs).items()))

    @property
    def mean(self) -> float:
        return float(self.per_bs.mean()) if len(self.per_bs) else 0.0


def ue_per_bs_distribution(asg, topo) -> LoadDistribution:
    """UEs per BS of an assignment (anything exposing ``load`` and ``uncovered``)."""
    load = np.asarray(asg.load).reshape(topo.n_bs, -1).sum(axis=1)
    return LoadDistribution(load.astype(np.int64), int(np.sum(asg.uncovered)))


@dataclass
class SchemeMetrics:
    scheme: str
    rates: np.ndarray                 # sorted, bit/s
    sinr_db: np.ndarray               # sorted, covered UEs only
    percentiles: dict[int, float]
    ratios: dict[int, float | None] = field(default_factory=dict)
    ue_per_bs: dict[int, int] = field(default_factory=dict)
    occupancy_low: float = float("nan")
    steps: list[int] = field(default_factory=list)
    converged: list[bool] = field(default_factory=list)

    @property
    def mean_rate(self) -> float:
        return float(self.rates.mean())

    @property
    def mean_ue_per_bs(self) -> float:
        total = sum(self.ue_per_bs.values())
        return sum(k * v for k, v in self.ue_per_bs.items()) / total if total else 0.0


@dataclass
class MetricsReport:
    config: ScenarioConfig
    repetitions: int
    seed: int
    schemes: dict[str, SchemeMetrics]
    reports: list

    def __getitem__(self, scheme: str) -> SchemeMetrics:
        return self.schemes[scheme]

    def merge(self, other: "MetricsReport") -> "MetricsReport":
        return aggregate(self.reports + other.reports)


def _scheme_key(name: str):
    return (SCHEME_ORDER.index(name) if name in SCHEME_ORDER else len(SCHEME_ORDER), name)


def aggregate(reports) -> MetricsReport:
    """Pool per-repetition reports (any order) into per-scheme statistics."""
    reports = sorted(reports, key=lambda r: (_scheme_key(r.scheme), r.repetition))
    if not reports:
        raise EmptySamples("no repetition reports to aggregate")
    cfg = reports[0].config
    if any(r.config != cfg for r in reports):
        raise MixedConfigs("repetition reports come from different scenario configurations")
    seen = set()
    for r in reports:
        if (r.scheme, r.repetition) in seen:
            raise MetricsError(f"repetition {r.repetition} of {r.scheme} appears twice")
        seen.add((r.scheme, r.repetition))

    schemes: dict[str, SchemeMetrics] = {}
    for name in sorted({r.scheme for r in reports}, key=_scheme_key):
        group = [r for r in reports if r.scheme == name]
        rates = np.sort(np.concatenate([r.rate for r in group]))
        sinr = np.sort(np.concatenate([r.sinr_db[r.bs >= 0] for r in group]))
        loads = Counter()
        for r in group:
            loads.update(int(n) for n in r.ue_per_bs)
        occ = [r.trace[-1] for r in group if len(r.trace)]
        schemes[name] = SchemeMetrics(
            scheme=name, rates=rates, sinr_db=sinr,
            percentiles={p: percentile(rates, p) for p in PERCENTILES},
            ue_per_bs=dict(sorted(loads.items())),
            occupancy_low=float(np.mean(occ)) if occ else float("nan"),
            steps=[r.steps for r in group], converged=[r.converged for r in group])
    if BASELINE in schemes:
        base = schemes[BASELINE].percentiles
        for m in schemes.values():
            m.ratios = {p: ratio_vs_baseline(v, base[p]) for p, v in m.percentiles.items()}
    reps = len({r.repetition for r in reports})
    return MetricsReport(cfg, reps, cfg.seed, schemes, reports)


# ---------------------------------------------------------------------------
# CSV output

def _writer(path: Path, header):
    fh = open(path, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    return fh, w


def write_rates(path, reports) -> None:
    fh, w = _writer(path, ["scheme", "repetition", "operator", "ue_id", "rate_bps", "sinr_db",
                           "carrier", "bs_id"])
    with fh:
        for r in reports:
            sinr_db = r.sinr_db
            for u in range(len(r.rate)):
                w.writerow([r.scheme, r.repetition, int(r.ue_op[u]), u, fmt(r.rate[u]),
                            fmt(sinr_db[u]), int(r.carrier[u]), int(r.bs[u])])


def write_percentiles(path, report: MetricsReport) -> None:
    fh, w = _writer(path, ["scheme", "p", "value_bps", "ratio_vs_licensed"])
    with fh:
        for name, m in report.schemes.items():
            for p in PERCENTILES:
                ratio = m.ratios.get(p)
                w.writerow([name, p, fmt(m.percentiles[p]), UNDEFINED if ratio is None else fmt(ratio)])


def write_occupancy(path, reports) -> None:
    fh, w = _writer(path, ["scheme", "repetition", "step", "frac_c_low"])
    with fh:
        for r in reports:
            for step, frac in enumerate(r.trace, start=1):
                w.writerow([r.scheme, r.repetition, step, fmt(frac)])


def write_load(path, reports) -> None:
    fh, w = _writer(path, ["scheme", "repetition", "bs_id", "ue_count"])
    with fh:
        for r in reports:
            for b, n in enumerate(r.ue_per_bs):
                w.writerow([r.scheme, r.repetition, b, int(n)])


def write_all(out_dir, report: MetricsReport) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = report.reports
    paths = [out / "rates.csv", out / "percentiles.csv", out / "occupancy.csv", out / "load.csv"]
    write_rates(paths[0], reports)
    write_percentiles(paths[1], report)
    write_occupancy(paths[2], reports)
    write_load(paths[3], reports)
    return paths
