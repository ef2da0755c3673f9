import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mmhybrid.association import BeamCache, Network
from mmhybrid.channel import LinkState, LinkTable, realize_links
from mmhybrid.deployment import Topology
from mmhybrid.scenario import ClusterModel, Preset, ScenarioConfig, hybrid_preset

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SINGLE_RAY = ClusterModel(subpaths=1, tx_azimuth_spread_deg=0, tx_elevation_spread_deg=0,
                          rx_azimuth_spread_deg=0, rx_elevation_spread_deg=0)


def small_config(operators=2, scheme="hybrid", preset=Preset.I, **kw) -> ScenarioConfig:
    carriers = hybrid_preset(operators, 1e9, 1e9, preset, scheme)
    kw.setdefault("clusters", ClusterModel(subpaths=2))
    return ScenarioConfig(operators=operators, area_km2=0.01, carriers=carriers,
                          preset=preset, **kw)


def random_topology(rng, cfg, n_bs, n_ue) -> Topology:
    side = cfg.side_m
    bs_op = np.sort(rng.integers(0, cfg.operators, n_bs))
    bs_op[: cfg.operators] = np.arange(min(cfg.operators, n_bs))
    bs_op = np.sort(bs_op)
    ue_op = np.sort(rng.integers(0, cfg.operators, n_ue))
    return Topology(side, rng.uniform(0, side, (n_bs, 2)), bs_op.astype(np.int64),
                    rng.uniform(0, side, (n_ue, 2)), ue_op.astype(np.int64))


def network_for(cfg, topo, rng) -> Network:
    links = realize_links(topo, cfg, rng)
    return Network(BeamCache(cfg, topo, links), cfg)


def manual_links(topo: Topology, spec: dict) -> LinkTable:
    """LinkTable from ``{(b, u): (pathloss_db_pair, [(power, angles4, gain_pair), ...])}``.

    Each cluster is a single ray at its centre; pairs missing from ``spec``
    are in outage.
    """
    B, U = topo.n_bs, topo.n_ue
    link_of = np.full((B, U), -1, dtype=np.int64)
    keys = sorted(spec)
    lbs, lue, pl, ptr, power, centre, gain, best = [], [], [], [0], [], [], [], []
    for lid, (b, u) in enumerate(keys):
        link_of[b, u] = lid
        lbs.append(b)
        lue.append(u)
        loss, clusters = spec[(b, u)]
        pl.append(loss)
        start = len(power)
        for p, ang, g in clusters:
            power.append(p)
            centre.append(ang)
            gain.append(g)
        ptr.append(len(power))
        best.append(start + int(np.argmax(power[start:])))
    centre = np.array(centre, dtype=float).T.reshape(4, -1)
    return LinkTable(
        n_bs=B, n_ue=U, link_of=link_of, link_bs=np.array(lbs, dtype=np.int64),
        link_ue=np.array(lue, dtype=np.int64),
        state=np.full(len(keys), int(LinkState.LOS), dtype=np.int64),
        distance=np.full(len(keys), 10.0), pathloss_db=np.array(pl, dtype=float).T.reshape(2, -1),
        boresight=np.zeros(len(keys)), cl_ptr=np.array(ptr, dtype=np.int64),
        cl_power=np.array(power, dtype=float), centre=centre, subpaths=1, rays=centre.copy(),
        gain=np.array(gain, dtype=complex).T.reshape(2, -1), best=np.array(best, dtype=np.int64))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
