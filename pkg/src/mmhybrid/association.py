"""SINR, rates and the load-aware greedy cell/carrier association.

A :class:`BeamCache` holds everything about one repetition that does not
depend on the access scheme: candidate lists and the beam/ray inner products
needed by every gain the fixed point will ever evaluate.  A :class:`Network`
adds the scheme (bandwidths, pooling, powers).  The mutable state lives in
:class:`Assignment`.

Array layout shared with :mod:`mmhybrid.kernels`::

    net = (cand_ptr, cand_bs, cand_lid, ilink_ptr, ilink_lid, link_bs, bs_op,
           ue_op, slot_in_bs, cp_off, coupling, pl_lin, p_tx, noise, width,
           pooled, bsue_ptr, bsue_ue)
    st = (load, members, mpos, serve_slot, serve_c)

``cand_*`` lists, per UE, the own-operator BSs it has a live link to (sorted
by BS index; the position in that list is the UE's *slot*).  ``bsue_*``
lists, per BS, the own-operator UEs it could serve.  For every live link
``l = (k, u)`` the coupling table stores, per carrier,
``|w_rx(s)^H H_l w_tx(t)|^2`` at ``cp_off[l] + s * T_k + t``: the gain seen
through the RX beam ``u`` would use towards its candidate ``s`` when ``k``
points its TX beam at its ``t``-th servable UE.  Memory does not depend on
the number of rays per link.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import LinkTable, direction_cosines
from .deployment import Topology
from .scenario import LOW, AccessMode, Policy, ScenarioConfig


class Uncovered(RuntimeError):
    """Every link of the UE towards its own operator is in outage."""


def _ptr(counts: np.ndarray) -> np.ndarray:
    return np.concatenate(([0], np.cumsum(counts))).astype(np.int64)


def _rank_in_group(groups: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    return np.arange(len(groups)) - ptr[groups]


class BeamCache:
    def __init__(self, cfg: ScenarioConfig, topo: Topology, links: LinkTable):
        self.cfg = cfg
        self.topo = topo
        self.links = links
        B, U, L = topo.n_bs, topo.n_ue, links.n_links
        lbs, lue = links.link_bs, links.link_ue
        own = topo.bs_op[lbs] == topo.ue_op[lue]

        # per-UE candidates: own-operator live links sorted by (ue, bs)
        own_ids = np.flatnonzero(own)
        by_ue = own_ids[np.lexsort((lbs[own_ids], lue[own_ids]))]
        self.cand_ptr = _ptr(np.bincount(lue[by_ue], minlength=U))
        self.cand_lid = by_ue.astype(np.int64)
        self.cand_bs = lbs[by_ue].astype(np.int64)

        # per-BS servable UEs; link ids are already in (bs, ue) order
        by_bs = own_ids
        self.bsue_ptr = _ptr(np.bincount(lbs[by_bs], minlength=B))
        self.bsue_ue = lue[by_bs].astype(np.int64)
        self.slot_in_bs = np.full(L, -1, dtype=np.int64)
        self.slot_in_bs[by_bs] = _rank_in_group(lbs[by_bs], self.bsue_ptr)

        # every live link towards a UE (potential interferers)
        all_by_ue = np.lexsort((lbs, lue))
        self.ilink_ptr = _ptr(np.bincount(lue, minlength=U))
        self.ilink_lid = all_by_ue.astype(np.int64)

        # coupling block of link l is n_cand[ue] x n_bsue[bs], row-major
        n_cand = np.diff(self.cand_ptr)
        n_bsue = np.diff(self.bsue_ptr)
        size = n_cand[lue] * n_bsue[lbs]
        self.cp_off = _ptr(size)
        self.coupling = np.zeros((2, int(self.cp_off[-1])))

        ray = np.vstack(direction_cosines(links.rays[0], links.rays[1])
                        + direction_cosines(links.rays[2], links.rays[3]))
        centre = links.centre[:, links.best]
        beam = np.vstack(direction_cosines(centre[0], centre[1])
                         + direction_cosines(centre[2], centre[3]))
        sides = np.array([[c.bs_side, c.ue_side] for c in cfg.carriers], dtype=np.int64)
        kernels.coupling(lbs.astype(np.int64), lue.astype(np.int64),
                         links.cl_ptr.astype(np.int64), int(links.subpaths), ray,
                         np.ascontiguousarray(links.gain), beam, self.cand_ptr, self.cand_lid,
                         self.bsue_ptr, self.bsue_ue, links.link_of.astype(np.int64),
                         sides[:, 0].copy(), sides[:, 1].copy(), self.cp_off, self.coupling)

    def block(self, lid: int, c: int) -> np.ndarray:
        """Coupling gains of link ``lid`` on carrier ``c``: rows are the UE's
        candidate RX beams, columns the BS's TX beams towards its servable UEs."""
        u, k = self.links.link_ue[lid], self.links.link_bs[lid]
        shape = (int(np.diff(self.cand_ptr)[u]), int(np.diff(self.bsue_ptr)[k]))
        return self.coupling[c, self.cp_off[lid]:self.cp_off[lid + 1]].reshape(shape)

    @property
    def covered(self) -> np.ndarray:
        return np.diff(self.cand_ptr) > 0

    def slot_of(self, u: int, i: int) -> int:
        lo, hi = self.cand_ptr[u], self.cand_ptr[u + 1]
        hit = np.flatnonzero(self.cand_bs[lo:hi] == i)
        return int(hit[0]) if len(hit) else -1


class Network:
    """A repetition's links seen through one access scheme."""

    def __init__(self, cache: BeamCache, cfg: ScenarioConfig):
        self.cache = cache
        self.cfg = cfg
        self.topo = cache.topo
        self.links = cache.links
        self.p_tx = np.array([10 ** ((c.bs_tx_power_dbm - 30) / 10) for c in cfg.carriers])
        self.width = np.array([cfg.bandwidth(c) for c in range(2)])
        self.noise = np.array([10 ** ((cfg.noise_power_dbm(c) - 30) / 10) for c in range(2)])
        self.pooled = np.array([c.mode is AccessMode.POOLED for c in cfg.carriers], dtype=np.int64)
        self.pl_lin = 10 ** (self.links.pathloss_db / 10)
        ch = cache
        self.arrays = (ch.cand_ptr, ch.cand_bs, ch.cand_lid, ch.ilink_ptr, ch.ilink_lid,
                       self.links.link_bs.astype(np.int64), self.topo.bs_op.astype(np.int64),
                       self.topo.ue_op.astype(np.int64), ch.slot_in_bs, ch.cp_off,
                       ch.coupling, self.pl_lin, self.p_tx, self.noise,
                       self.width, self.pooled, ch.bsue_ptr, ch.bsue_ue)
        self.max_slots = max(1, int(np.diff(ch.cand_ptr).max(initial=1)))

    @classmethod
    def build(cls, cfg: ScenarioConfig, topo: Topology, links: LinkTable) -> "Network":
        return cls(BeamCache(cfg, topo, links), cfg)

    def rates_table(self, asg: "Assignment", u: int, slot_only: int = -1) -> np.ndarray:
        out = np.zeros((self.max_slots, 2, 4))
        kernels.candidate_rates(u, slot_only, self.arrays, asg.state, out)
        return out


class Assignment:
    """Serving (BS, carrier) per UE plus the per-(BS, carrier) member lists."""

    def __init__(self, net: Network):
        B, U = net.topo.n_bs, net.topo.n_ue
        cap = max(1, int(np.diff(net.cache.bsue_ptr).max(initial=1)))
        self.net = net
        self.load = np.zeros((B, 2), dtype=np.int64)
        self.members = np.zeros((B, 2, cap), dtype=np.int64)
        self.mpos = np.full(U, -1, dtype=np.int64)
        self.serve_slot = np.full(U, -1, dtype=np.int64)
        self.serve_c = np.full(U, -1, dtype=np.int64)
        self.home_slot = np.full(U, -1, dtype=np.int64)
        self.uncovered = ~net.cache.covered

    @property
    def state(self):
        return (self.load, self.members, self.mpos, self.serve_slot, self.serve_c)

    def serving_bs(self, u: int) -> int:
        s = self.serve_slot[u]
        return -1 if s < 0 else int(self.net.cache.cand_bs[self.net.cache.cand_ptr[u] + s])

    def serving(self) -> np.ndarray:
        """(U, 2) array of (BS, carrier), -1 where unassigned."""
        out = np.full((len(self.serve_slot), 2), -1, dtype=np.int64)
        on = self.serve_slot >= 0
        out[on, 0] = self.net.cache.cand_bs[self.net.cache.cand_ptr[:-1][on] + self.serve_slot[on]]
        out[on, 1] = self.serve_c[on]
        return out

    def attach(self, u: int, i: int, c: int) -> None:
        s = self.net.cache.slot_of(u, i)
        if s < 0:
            raise ValueError(f"BS {i} is not a candidate for UE {u}")
        self.detach(u)
        kernels.attach(u, s, c, self.net.arrays, self.state)

    def detach(self, u: int) -> None:
        kernels.detach(u, self.net.arrays, self.state)

    def copy(self) -> "Assignment":
        new = Assignment.__new__(Assignment)
        new.net = self.net
        for name in ("load", "members", "mpos", "serve_slot", "serve_c", "home_slot", "uncovered"):
            setattr(new, name, getattr(self, name).copy())
        return new

    def check(self) -> None:
        """Assert load conservation and member-list consistency."""
        topo = self.net.topo
        for m in range(topo.operators):
            bss, ues = topo.bs_of(m), topo.ues_of(m)
            assigned = int(self.load[bss].sum())
            assert assigned + int(self.uncovered[ues].sum()) == len(ues), (m, assigned)
        assert (self.load >= 0).all()
        pairs = self.serving()
        for u in np.flatnonzero(self.serve_slot >= 0):
            i, c = pairs[u]
            t = self.members[i, c, self.mpos[u]]
            assert self.net.cache.bsue_ue[self.net.cache.bsue_ptr[i] + t] == u


@dataclass(frozen=True)
class SinrSample:
    sinr: float
    signal: float
    interference: float
    noise: float


# ---------------------------------------------------------------------------
# per-link quantities

def mean_interference_gain(net: Network, asg: Assignment, u: int, i: int, k: int, c: int) -> float:
    """Average gain from BS ``k`` into UE ``u``'s RX beam towards candidate ``i``.

    The average runs over the UEs ``k`` currently serves on carrier ``c``; a
    silent BS, an outage link or ``k == i`` contributes zero.
    """
    ch = net.cache
    s = ch.slot_of(u, i)
    lk = int(net.links.link_of[k, u])
    n = int(asg.load[k, c])
    if s < 0 or lk < 0 or n == 0 or k == i:
        return 0.0
    return float(np.mean(ch.block(lk, c)[s, asg.members[k, c, :n]]))


def sinr(net: Network, asg: Assignment, u: int, i: int, c: int) -> SinrSample:
    s = net.cache.slot_of(u, i)
    if s < 0:
        from .channel import OutageLink
        raise OutageLink(f"BS {i} has no live own-operator link to UE {u}")
    row = net.rates_table(asg, u, s)[s, c]
    return SinrSample(float(row[2]), float(row[0]), float(row[1]), float(net.noise[c]))


def shannon_rate(width: float, others: int, gamma: float) -> float:
    """W/(1+N) log2(1+gamma): the UE's share of the band when N others share it."""
    return width / (1 + others) * math.log2(1 + gamma)


def rate(net: Network, asg: Assignment, u: int, i: int, c: int) -> float:
    """Rate of UE ``u`` on (i, c); N counts the other UEs on (i, c)."""
    s = net.cache.slot_of(u, i)
    if s < 0:
        return 0.0
    gamma = net.rates_table(asg, u, s)[s, c, 2]
    others = int(asg.load[i, c]) - int(asg.serve_slot[u] == s and asg.serve_c[u] == c)
    return shannon_rate(float(net.width[c]), others, float(gamma))


# ---------------------------------------------------------------------------
# greedy updates

def _update(net: Network, asg: Assignment, u: int, slot_only: int):
    if asg.uncovered[u]:
        raise Uncovered(f"UE {u} has no live link to its operator")
    kernels.detach(u, net.arrays, asg.state)
    out = np.zeros((net.max_slots, 2, 4))
    s, c = kernels.best_move(u, slot_only, net.arrays, asg.state, out)
    kernels.attach(u, s, c, net.arrays, asg.state)
    return asg.serving_bs(u), int(c)


def greedy_joint_update(net: Network, asg: Assignment, u: int) -> tuple[int, int]:
    """Move UE ``u`` to the (BS, carrier) maximizing its rate under the other UEs' loads.

    Ties go to the lowest BS index, then the low carrier.
    """
    return _update(net, asg, u, -1)


def greedy_carrier_update(net: Network, asg: Assignment, u: int) -> int:
    """Re-pick only the carrier; the BS stays at the UE's initial (home) BS."""
    slot = int(asg.home_slot[u])
    if slot < 0:
        slot = int(asg.serve_slot[u])
    if asg.uncovered[u] or slot < 0:
        raise Uncovered(f"UE {u} has no serving BS")
    return _update(net, asg, u, slot)[1]


def initial_association(net: Network, rng: np.random.Generator,
                        initial_low_prob: float | None = None) -> Assignment:
    """Minimum-path-loss BS, then a Bernoulli draw for the carrier.

    The path loss is taken at the low carrier (or the minimum over both when
    the scenario sets ``initial_bs: min``).  One uniform draw is consumed per
    UE, covered or not, so the stream position does not depend on coverage.
    """
    cfg = net.cfg
    p_low = cfg.initial_low_prob if initial_low_prob is None else initial_low_prob
    asg = Assignment(net)
    ch = net.cache
    draws = rng.random(net.topo.n_ue)
    pl = net.links.pathloss_db
    metric = pl[LOW] if cfg.initial_bs == "low" else pl.min(axis=0)
    for u in np.flatnonzero(ch.covered):
        lids = ch.cand_lid[ch.cand_ptr[u]:ch.cand_ptr[u + 1]]
        s = int(np.argmin(metric[lids]))
        c = 0 if draws[u] < p_low else 1
        kernels.attach(int(u), s, c, net.arrays, asg.state)
        asg.home_slot[u] = s
    return asg


@dataclass
class ConvergenceResult:
    assignment: Assignment
    trace: np.ndarray
    steps: int
    converged: bool


def default_max_iterations(cfg: ScenarioConfig, n_ue: int) -> int:
    # small networks still get room for two full windows
    if cfg.max_iterations is not None:
        return cfg.max_iterations
    return max(20 * n_ue, 2 * cfg.window)


def default_min_iterations(cfg: ScenarioConfig, n_ue: int) -> int:
    # the occupancy window settles before individual UEs do; ten sweeps
    # leave almost every UE at its best response
    if cfg.min_iterations is not None:
        return cfg.min_iterations
    return min(10 * n_ue, default_max_iterations(cfg, n_ue))


def run_to_convergence(net: Network, asg: Assignment, rng: np.random.Generator,
                       policy: Policy | None = None) -> ConvergenceResult:
    """Random-UE greedy re-association until the low-carrier share settles.

    Works on ``asg`` in place.  The trace holds the fraction of covered UEs
    on the low carrier after every step.
    """
    cfg = net.cfg
    policy = cfg.policy if policy is None else policy
    covered = np.flatnonzero(~asg.uncovered)
    n_ue = net.topo.n_ue
    max_it = default_max_iterations(cfg, n_ue)
    if len(covered) == 0 or max_it == 0:
        return ConvergenceResult(asg, np.zeros(0), 0, len(covered) == 0)
    picks = covered[rng.integers(0, len(covered), size=max_it)].astype(np.int64)
    fixed = asg.home_slot.copy() if policy is Policy.CARRIER_ONLY else np.full(n_ue, -1, np.int64)
    trace = np.zeros(max_it)
    steps, ok = kernels.run_steps(picks, fixed, net.arrays, asg.state, trace,
                                  float(len(covered)), int(cfg.window), float(cfg.tolerance),
                                  int(default_min_iterations(cfg, n_ue)))
    return ConvergenceResult(asg, trace[:steps].copy(), int(steps), bool(ok))


def served_metrics(net: Network, asg: Assignment):
    """Per-UE (rate bit/s, sinr, signal, interference) at the current assignment.

    Uncovered UEs get zero rate and zero SINR.
    """
    U = net.topo.n_ue
    rates = np.zeros(U)
    gamma = np.zeros(U)
    sig = np.zeros(U)
    intf = np.zeros(U)
    out = np.zeros((net.max_slots, 2, 4))
    pairs = asg.serving()
    for u in np.flatnonzero(asg.serve_slot >= 0):
        s, c = int(asg.serve_slot[u]), int(asg.serve_c[u])
        kernels.candidate_rates(int(u), s, net.arrays, asg.state, out)
        sig[u], intf[u], gamma[u] = out[s, c, 0], out[s, c, 1], out[s, c, 2]
        # load counts u itself
        rates[u] = shannon_rate(net.width[c], asg.load[pairs[u, 0], c] - 1, gamma[u])
    return rates, gamma, sig, intf


def dump_trace(trace, path) -> None:
    """Two-column ``step  fraction_on_low`` text file of an occupancy trace."""
    with open(path, "w") as fh:
        for step, frac in enumerate(trace, start=1):
            fh.write(f"{step}\t{float(frac):.9g}\n")
