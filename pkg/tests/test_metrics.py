import csv
import math

import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from mmhybrid.metrics import (EmptySamples, MetricsError, MixedConfigs, PERCENTILES, aggregate,
                              ecdf, fmt, percentile, ratio_vs_baseline, ue_per_bs_distribution,
                              write_all)
from mmhybrid.deployment import Topology
from mmhybrid.scenario import ScenarioConfig
from mmhybrid.simulation import RepetitionReport

CFG = ScenarioConfig(seed=9)


def report(scheme, rep, rates, bs=None, cfg=CFG, trace=(0.5, 0.4), per_bs=(2, 1)):
    rates = np.asarray(rates, float)
    n = len(rates)
    bs = np.zeros(n, np.int64) if bs is None else np.asarray(bs)
    sinr = np.where(bs >= 0, 10.0 ** (rates / 1e9), 0.0)
    return RepetitionReport(scheme, rep, np.zeros(n, np.int64), rates, sinr, bs,
                            np.where(bs >= 0, 0, -1), np.asarray(per_bs), np.asarray(trace, float),
                            len(trace), True, cfg)


def nearest_rank(values, p):
    s = sorted(values)
    k = max(1, math.ceil(p * len(s) / 100))
    return s[min(k, len(s)) - 1]


# ---------------------------------------------------------------------------
# percentile

@pytest.mark.parametrize("samples, p, want", [
    (list(range(1, 101)), 5, 5),
    ([7], 0, 7), ([7], 50, 7), ([7], 100, 7),
    ([1, 2, 3], 50, 2),
    (list(range(1, 101)), 0, 1),
    (list(range(1, 101)), 100, 100),
])
def test_percentile_examples(samples, p, want):
    assert percentile(samples, p) == want


def test_percentile_errors():
    with pytest.raises(EmptySamples):
        percentile([], 50)
    with pytest.raises(MetricsError):
        percentile([1.0], 101)
    with pytest.raises(MetricsError):
        percentile([1.0], -1)


@settings(max_examples=10_000)
@given(st.lists(st.floats(-1e12, 1e12), min_size=1, max_size=60), st.floats(0, 100))
def test_percentile_matches_rank_oracle_and_is_monotone(values, p):
    s = np.sort(values)
    assert percentile(s, p) == nearest_rank(values, p)
    assert percentile(s, 5) <= percentile(s, 50) <= percentile(s, 95)


# ---------------------------------------------------------------------------
# ratios

# reference throughputs in Gb/s (power constraint ii) and their two-digit ratios
@pytest.mark.parametrize("value, base, printed", [
    (0.4492, 0.3848, 1.17),
    (0.0190, 0.0362, 0.52),
    (0.0147, 0.0328, 0.45),
    (0.5081, 0.4176, 1.22),
])
def test_ratio_examples(value, base, printed):
    assert round(ratio_vs_baseline(value, base), 2) == printed


def test_ratio_equal_and_undefined():
    assert ratio_vs_baseline(3.0, 3.0) == 1.0
    assert ratio_vs_baseline(1.0, 0.0) is None
    assert ratio_vs_baseline(0.0, 0.0) is None


# ---------------------------------------------------------------------------
# aggregation

def test_pooled_percentiles_match_concatenate_and_sort():
    rng = np.random.default_rng(4)
    a, b = rng.exponential(1e8, 37), rng.exponential(2e8, 51)
    m = aggregate([report("hybrid", 0, a), report("hybrid", 1, b)])["hybrid"]
    pooled = np.concatenate([a, b])
    for p in PERCENTILES:
        assert m.percentiles[p] == nearest_rank(pooled.tolist(), p)
    assert np.array_equal(m.rates, np.sort(pooled))
    assert len(m.rates) == 88


def test_single_repetition_is_identity():
    rates = [3.0, 1.0, 2.0, 5.0]
    r = report("pooled", 0, rates, trace=(0.2, 0.3))
    agg = aggregate([r])
    m = agg["pooled"]
    assert agg.repetitions == 1 and agg.seed == 9
    assert m.rates.tolist() == sorted(rates)
    assert m.occupancy_low == 0.3
    assert m.steps == [2] and m.converged == [True]
    assert m.ue_per_bs == {1: 1, 2: 1}


def test_merge_is_order_independent():
    rng = np.random.default_rng(5)
    reps = [report(s, k, rng.exponential(1e8, 10 + k)) for s in ("hybrid", "licensed")
            for k in range(4)]
    whole = aggregate(reps)
    for perm in (reps[::-1], reps[3:] + reps[:3]):
        left = aggregate(perm[:3])
        right = aggregate(perm[3:])
        for merged in (left.merge(right), right.merge(left)):
            for s in ("hybrid", "licensed"):
                assert np.array_equal(merged[s].rates, whole[s].rates)
                assert merged[s].percentiles == whole[s].percentiles
                assert merged[s].ratios == whole[s].ratios
                assert merged[s].steps == whole[s].steps


def test_mixed_configs_rejected():
    other = replace(CFG, seed=10)
    with pytest.raises(MixedConfigs):
        aggregate([report("hybrid", 0, [1.0]), report("hybrid", 1, [1.0], cfg=other)])
    with pytest.raises(MetricsError):
        aggregate([report("hybrid", 0, [1.0]), report("hybrid", 0, [2.0])])
    with pytest.raises(EmptySamples):
        aggregate([])


def test_uncovered_ues_are_zero_rate_samples_without_sinr():
    m = aggregate([report("hybrid", 0, [0.0, 2e9, 1e9], bs=[-1, 0, 1])])["hybrid"]
    assert len(m.rates) == 3 and m.rates[0] == 0.0
    assert len(m.sinr_db) == 2
    assert m.sinr_db.tolist() == pytest.approx([10.0, 20.0])


def test_ratio_table_against_licensed():
    m = aggregate([report("hybrid", 0, [2.0] * 20), report("licensed", 0, [1.0] * 20),
                   report("pooled", 0, [0.0] * 20)])
    assert m["hybrid"].ratios == {5: 2.0, 50: 2.0, 95: 2.0}
    assert m["licensed"].ratios == {5: 1.0, 50: 1.0, 95: 1.0}
    m = aggregate([report("hybrid", 0, [2.0]), report("licensed", 0, [0.0])])
    assert m["hybrid"].ratios == {5: None, 50: None, 95: None}


@settings(max_examples=1000)
@given(st.lists(st.floats(0, 1e10), min_size=1, max_size=200))
def test_ecdf_is_a_distribution(values):
    x, f = ecdf(values)
    assert np.all(np.diff(x) >= 0) and np.all(np.diff(f) > 0)
    assert f[0] > 0 and f[-1] == 1.0


# ---------------------------------------------------------------------------
# load distribution

class _Asg:
    def __init__(self, load, uncovered):
        self.load = np.asarray(load)
        self.uncovered = np.asarray(uncovered)


def topo(n_bs, n_ue):
    return Topology(100.0, np.zeros((n_bs, 2)), np.zeros(n_bs, np.int64), np.zeros((n_ue, 2)),
                    np.zeros(n_ue, np.int64))


def test_load_histogram_examples():
    d = ue_per_bs_distribution(_Asg([[3, 4]], [False] * 7), topo(1, 7))
    assert d.histogram == {7: 1} and d.uncovered == 0 and d.mean == 7
    d = ue_per_bs_distribution(_Asg([[0, 0], [0, 0]], [True] * 5), topo(2, 5))
    assert d.histogram == {0: 2} and d.uncovered == 5


# ---------------------------------------------------------------------------
# CSV output

def test_csv_columns_and_formatting(tmp_path):
    reps = [report("hybrid", 0, [1 / 3 * 1e9, 0.0], bs=[0, -1]),
            report("licensed", 0, [2e8, 1e8])]
    paths = write_all(tmp_path, aggregate(reps))
    heads = {p.name: next(csv.reader(open(p))) for p in paths}
    assert heads == {
        "rates.csv": ["scheme", "repetition", "operator", "ue_id", "rate_bps", "sinr_db",
                      "carrier", "bs_id"],
        "percentiles.csv": ["scheme", "p", "value_bps", "ratio_vs_licensed"],
        "occupancy.csv": ["scheme", "repetition", "step", "frac_c_low"],
        "load.csv": ["scheme", "repetition", "bs_id", "ue_count"],
    }
    rows = list(csv.DictReader(open(tmp_path / "rates.csv")))
    assert rows[0]["rate_bps"] == "333333333"
    assert rows[1]["bs_id"] == "-1" and rows[1]["carrier"] == "-1" and rows[1]["sinr_db"] == "nan"
    pct = list(csv.DictReader(open(tmp_path / "percentiles.csv")))
    assert pct[0]["ratio_vs_licensed"] == "0"          # hybrid 5% = 0 over licensed 1e8
    assert pct[2]["ratio_vs_licensed"] == "1.66666667"


def test_fmt_uses_nine_significant_digits():
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(123456789012.0) == "1.23456789e+11"
    assert fmt(2) == "2"
