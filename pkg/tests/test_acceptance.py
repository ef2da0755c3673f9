"""Acceptance criteria, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL`` line with the measured values
before asserting.  Run with ``pytest tests/test_acceptance.py -v -s`` (the
lines are printed even without ``-s``).
"""
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from mmhybrid import kernels
from mmhybrid.association import (Assignment, Network, greedy_carrier_update,
                                  greedy_joint_update)
from mmhybrid.channel import LinkState, link_state_probs, pathloss_db
from mmhybrid.cli import main
from mmhybrid.metrics import aggregate
from mmhybrid.scenario import (AccessMode, HIGH, LOW, Policy, Preset, default_carrier,
                               load_scenario)
from mmhybrid.simulation import associate, prepare

from oracles import DenseOracle, random_instance

ROOT = Path(__file__).resolve().parents[1]
DEFAULTS = ROOT / "configs" / "tableIV.yaml"
SCHEMES = ("hybrid", "licensed", "pooled")


@pytest.fixture
def verdict(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {label}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


@pytest.fixture(scope="session")
def base_cfg():
    cfg = load_scenario(DEFAULTS)
    assert (cfg.seed, cfg.repetitions, cfg.preset) == (42, 20, Preset.II)
    return cfg


@pytest.fixture(scope="session")
def caches(base_cfg):
    """Topologies and link tables of the 20 default repetitions, shared by all schemes."""
    return [prepare(base_cfg, r) for r in range(base_cfg.repetitions)]


@pytest.fixture(scope="session")
def default_reports(base_cfg, caches):
    return [associate(c, base_cfg, s, r) for r, c in enumerate(caches) for s in SCHEMES]


def with_high_width(cfg, width):
    low, high = cfg.carriers
    return replace(cfg, carriers=(low, replace(high, total_bandwidth_hz=width)))


# ---------------------------------------------------------------------------

def test_criterion_1_scheme_ordering(default_reports, verdict):
    m = aggregate(default_reports)
    p = {s: m[s].percentiles for s in SCHEMES}
    order = p["pooled"][5] < p["hybrid"][5] < p["licensed"][5] and \
        p["licensed"][95] < p["hybrid"][95] <= p["pooled"][95]
    r95 = p["hybrid"][95] / p["licensed"][95]
    r5 = p["hybrid"][5] / p["licensed"][5]
    p5 = p["pooled"][5] / p["licensed"][5]
    checks = {"a": order, "b": 1.4 <= r95 <= 2.8, "c": 0.25 <= r5 <= 0.85, "d": p5 < 0.1}
    cells = " ".join(f"{s}=({p[s][5] / 1e9:.4f},{p[s][50] / 1e9:.4f},{p[s][95] / 1e9:.4f})"
                     for s in SCHEMES)
    verdict(1, all(checks.values()),
            f"{cells} Gb/s; h95/l95={r95:.3f} h5/l5={r5:.3f} p5/l5={p5:.3f} "
            f"checks={checks}")
    assert all(checks.values())


def test_criterion_2_path_loss_and_eirp(verdict):
    low = default_carrier("low", 28.0, AccessMode.EXCLUSIVE, Preset.II)
    high = default_carrier("high", 73.0, AccessMode.POOLED, Preset.II)
    pl1 = float(pathloss_db(100.0, LinkState.NLOS, low))
    pl2 = float(pathloss_db(50.0, LinkState.LOS, high))
    # 61.4 + 20 log10(50) with 30-digit arithmetic
    ok = (abs(pl1 - 130.0) < 1e-9 and abs(pl2 - 103.779400086720) < 1e-9
          and abs(low.eirp_dbm - high.eirp_dbm) < 0.1)
    verdict("2 (path loss, EIRP)", ok,
            f"PL={pl1:.12f} dB, {pl2:.12f} dB; EIRP={low.eirp_dbm:.3f}/{high.eirp_dbm:.3f} dBm")
    assert ok


def _leading_digits_match(value, stated):
    """``stated`` is a truncated decimal: value must start with those digits."""
    digits = len(stated.split(".")[1])
    return math.floor(value * 10 ** digits + 1e-12) == int(stated.replace(".", "").lstrip("0") or 0)


def test_criterion_2_los_probability(verdict):
    p_out, p_los, _ = link_state_probs(200.0)
    # independent 30-digit evaluation of the link-state formulas at 200 m
    ok = abs(p_los - 0.011562363287) < 1e-6 and _leading_digits_match(p_los, "0.01156")
    verdict("2 (p_LOS 200 m)", ok, f"p_LOS={p_los:.10f}, stated 0.01156...")
    assert ok


@pytest.mark.xfail(strict=True, reason="stated p_out(200 m) disagrees with the outage formula; "
                                       "see the decisions ledger")
def test_criterion_2_outage_probability(verdict):
    p_out, _, _ = link_state_probs(200.0)
    assert abs(p_out - 0.772362311616) < 1e-9
    ok = _leading_digits_match(p_out, "0.77244")
    verdict("2 (p_out 200 m)", ok, f"p_out={p_out:.10f}, stated 0.77244... "
                                   f"(difference {0.77244 - p_out:.2e})")
    assert ok


def test_criterion_3_greedy_equals_brute_force(verdict):
    total = agree = 0
    for seed in range(200):
        net, asg, _ = random_instance(50_000 + seed, max_bs=4, max_ue=8)
        oracle = DenseOracle(net)
        for u in map(int, np.flatnonzero(net.cache.covered)):
            trial = asg.copy()
            trial.detach(u)
            want, _ = oracle.argmax(oracle.rates(trial, u))
            agree += greedy_joint_update(net, trial, u) == want
            trial = asg.copy()
            home = trial.serving_bs(u)
            trial.detach(u)
            (_, want_c), _ = oracle.argmax(oracle.rates(trial, u, bs_only=home))
            agree += greedy_carrier_update(net, trial, u) == want_c
            total += 2
    ok = agree == total and total > 1000
    verdict(3, ok, f"{agree}/{total} updates agree over 200 instances")
    assert ok


def test_criterion_4_convergence(base_cfg, caches, default_reports, verdict):
    mid = [r for r in default_reports if r.scheme == "hybrid"]
    converged = np.mean([r.converged for r in mid])
    final = {0.5: np.array([r.trace[-1] for r in mid])}
    for p in (0.3, 0.7):
        cfg = replace(base_cfg, initial_low_prob=p)
        final[p] = np.array([associate(c, cfg, "hybrid", r).trace[-1] for r, c in enumerate(caches)])
    diff = {p: float(np.max(np.abs(final[p] - final[0.5]))) for p in (0.3, 0.7)}
    ok = converged >= 0.95 and all(d < 0.05 for d in diff.values())
    verdict(4, ok, f"converged={converged:.0%}; mean final occupancy "
                   + " ".join(f"P={p}:{final[p].mean():.3f}" for p in (0.3, 0.5, 0.7))
                   + f"; max per-repetition difference vs 0.5: {diff}")
    assert ok


def test_criterion_5_load_statistics(base_cfg, caches, verdict):
    served = bss = 0
    for r in range(100):
        cache = caches[r] if r < len(caches) else prepare(base_cfg, r)
        rep = associate(cache, base_cfg, "hybrid", r)
        served += int(rep.ue_per_bs.sum())
        bss += len(rep.ue_per_bs)
    mean = served / bss
    ok = 9.0 <= mean <= 11.0
    verdict(5, ok, f"mean UEs per BS over 100 repetitions = {mean:.3f} ({bss} BS samples)")
    assert ok


def test_criterion_6_bandwidth_sweep(base_cfg, caches, verdict):
    widths = (1e9, 3e9, 5e9)
    means, rel, gap = {s: [] for s in SCHEMES}, [], []
    for w in widths:
        cfg = with_high_width(base_cfg, w)
        m = aggregate([associate(c, cfg, s, r) for r, c in enumerate(caches) for s in SCHEMES])
        for s in SCHEMES:
            means[s].append(m[s].mean_rate)
        h, p = m["hybrid"].percentiles[95], m["pooled"].percentiles[95]
        gap.append(p - h)
        rel.append((p - h) / p)
    nondecreasing = all(np.all(np.diff(v) >= 0) for v in means.values())
    shrinking = bool(np.all(np.diff(rel) < 0) and np.all(np.diff(gap) < 0))
    ok = nondecreasing and shrinking
    verdict(6, ok, "mean Gb/s " + " ".join(f"{s}={[round(x / 1e9, 4) for x in v]}"
                                          for s, v in means.items())
            + f"; pooled-hybrid 95% gap {[round(g / 1e9, 4) for g in gap]} Gb/s,"
              f" relative {[round(x, 4) for x in rel]}")
    assert ok


def test_criterion_7_policy_comparison(base_cfg, verdict):
    cfg = replace(base_cfg, bs_density=60.0, ue_density=600.0)
    reports = {pol: [] for pol in Policy}
    for r in range(20):
        cache = prepare(cfg, r)
        for pol in Policy:
            reports[pol] += [associate(cache, cfg, s, r, pol) for s in SCHEMES]
    joint, carrier = aggregate(reports[Policy.JOINT]), aggregate(reports[Policy.CARRIER_ONLY])
    rows, ok = [], True
    for s in SCHEMES:
        j, c = joint[s].percentiles, carrier[s].percentiles
        good = j[5] >= c[5] and c[95] >= j[95]
        ok &= good
        rows.append(f"{s}: joint(5,95)=({j[5] / 1e9:.4f},{j[95] / 1e9:.4f}) "
                    f"carrier-only=({c[5] / 1e9:.4f},{c[95] / 1e9:.4f}) {'ok' if good else 'violated'}")
    verdict(7, ok, "; ".join(rows))
    assert ok


def test_criterion_8_determinism_and_isolation(base_cfg, caches, tmp_path, verdict):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "--config", str(DEFAULTS), "--reps", "1", "--seed", "7",
                     "--out", str(out)]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    identical = runs[0] == runs[1] and len(runs[0]) == 4

    # exclusive carriers: interference from other operators is exactly zero,
    # and the serving BS never appears in its own interference sum
    cache = caches[0]
    net = Network(cache, replace(base_cfg, carriers=tuple(
        replace(c, mode=m) for c, m in zip(base_cfg.carriers, (AccessMode.EXCLUSIVE, AccessMode.POOLED)))))
    topo = cache.topo
    isolated = excluded = True
    rng = np.random.default_rng(0)
    covered = np.flatnonzero(cache.covered)
    for u in map(int, rng.choice(covered, 40, replace=False)):
        asg = Assignment(net)
        others = [v for v in covered if topo.ue_op[v] != topo.ue_op[u]]
        for v in others:      # load every other-operator UE on the low carrier
            kernels.attach(int(v), 0, LOW, net.arrays, asg.state)
        table = net.rates_table(asg, u)
        n = cache.cand_ptr[u + 1] - cache.cand_ptr[u]
        isolated &= bool(np.all(table[:n, LOW, 1] == 0.0))
        # heavily load the first candidate: its own rows must not change
        i = int(cache.cand_bs[cache.cand_ptr[u]])
        before = net.rates_table(asg, u)[0, HIGH, 1]
        for v in covered:
            if v != u and cache.slot_of(int(v), i) >= 0 and asg.serve_slot[v] < 0:
                kernels.attach(int(v), cache.slot_of(int(v), i), HIGH, net.arrays, asg.state)
        excluded &= net.rates_table(asg, u)[0, HIGH, 1] == before

    # property suites, each at 10^4 cases
    import test_association as ta
    import test_channel as tc
    import test_deployment as td
    suites = {
        "norms": (tc.test_steering_vector_unit_norm, tc.test_gain_norms_phase_invariance_and_bound),
        "monotonicity": (ta.test_sinr_monotonicity, tc.test_link_state_probabilities_valid_and_monotone),
        "conservation": (ta.test_load_conservation_and_greedy_optimality,),
        "translation invariance": (td.test_translation_invariance,),
    }
    passed = {}
    for name, fns in suites.items():
        try:
            for fn in fns:
                assert fn.hypothesis.inner_test and fn._hypothesis_internal_use_settings.max_examples >= 10_000
                fn()
            passed[name] = True
        except AssertionError:
            passed[name] = False
    ok = identical and isolated and excluded and all(passed.values())
    verdict(8, ok, f"byte-identical CSVs={identical}; exclusive isolation={isolated}; "
                   f"serving BS excluded={excluded}; property suites={passed}")
    assert ok
