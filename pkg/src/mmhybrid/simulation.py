"""One Monte Carlo repetition: deploy, realize links, associate under each scheme.

All schemes of a repetition share the topology, the link realizations and
the association stream (common random numbers).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .association import (BeamCache, Network, initial_association, run_to_convergence,
                          served_metrics)
from .channel import realize_links
from .deployment import sample_topology
from .scenario import Policy, ScenarioConfig, with_scheme
from .seeding import stream


@dataclass
class RepetitionReport:
    scheme: str
    repetition: int
    ue_op: np.ndarray
    rate: np.ndarray        # bit/s, 0 for uncovered
    sinr: np.ndarray        # linear, 0 for uncovered
    bs: np.ndarray          # serving BS, -1 for uncovered
    carrier: np.ndarray     # 0 low, 1 high, -1 for uncovered
    ue_per_bs: np.ndarray   # (B,)
    trace: np.ndarray
    steps: int
    converged: bool
    config: ScenarioConfig | None = None   # the scheme-independent scenario

    @property
    def uncovered(self) -> int:
        return int(np.sum(self.bs < 0))

    @property
    def sinr_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.bs >= 0, 10 * np.log10(self.sinr), np.nan)


def prepare(cfg: ScenarioConfig, repetition: int) -> BeamCache:
    rng = stream(cfg.seed, ("repetition", repetition), ("stage", "deployment"))
    topo = sample_topology(cfg, rng)
    links = realize_links(topo, cfg, rng)
    return BeamCache(cfg, topo, links)


def associate(cache: BeamCache, cfg: ScenarioConfig, scheme: str, repetition: int,
              policy: Policy | None = None) -> RepetitionReport:
    scfg = with_scheme(cfg, scheme)
    if policy is not None:
        scfg = replace(scfg, policy=policy)
    net = Network(cache, scfg)
    rng = stream(cfg.seed, ("repetition", repetition), ("stage", "association"))
    asg = initial_association(net, rng)
    res = run_to_convergence(net, asg, rng)
    rates, gamma, _, _ = served_metrics(net, asg)
    pairs = asg.serving()
    per_bs = asg.load.sum(axis=1)
    return RepetitionReport(scheme, repetition, cache.topo.ue_op.copy(), rates, gamma,
                            pairs[:, 0], pairs[:, 1], per_bs, res.trace, res.steps, res.converged,
                            cfg)


def run_repetition(cfg: ScenarioConfig, repetition: int, schemes=("hybrid", "licensed", "pooled"),
                   policy: Policy | None = None) -> list[RepetitionReport]:
    cache = prepare(cfg, repetition)
    return [associate(cache, cfg, s, repetition, policy) for s in schemes]
