"""Per-link channel realizations and beamformed gains.

Every BS-UE pair gets one realization: a LOS/NLOS/outage state (shared by
both carriers), a shadowed path loss per carrier and a set of clusters.
Each cluster holds one or more rays scattered around its centre.  Angles are
shared across carriers; complex gains are drawn independently per carrier.

Channel matrices are never stored.  For a uniform planar array with half
wavelength spacing the inner product between a steering vector and a ray's
array response factorizes into two 1-D geometric sums, which is what
:func:`beam_response` evaluates.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .deployment import Topology, wrapped_vectors
from .scenario import CarrierSpec, ScenarioConfig

A_OUT = 0.0334   # 1/m
B_OUT = 5.2
A_LOS = 0.0149   # 1/m
SPACING = 0.5    # element spacing in wavelengths
MIN_DISTANCE = 1.0


class ChannelError(ValueError):
    pass


class NonPositiveDistance(ChannelError):
    pass


class OutageLink(ChannelError):
    pass


class NotPerfectSquare(ChannelError):
    pass


class DimensionMismatch(ChannelError):
    pass


class LinkState(enum.IntEnum):
    OUTAGE = 0
    LOS = 1
    NLOS = 2


def link_state_probs(d):
    """Return ``(p_out, p_los, p_nlos)`` at distance ``d`` (scalar or array, meters)."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(~(d_arr > 0)):
        raise NonPositiveDistance(f"distance must be > 0, got {d!r}")
    p_out = np.maximum(0.0, 1.0 - np.exp(-A_OUT * d_arr + B_OUT))
    p_los = (1.0 - p_out) * np.exp(-A_LOS * d_arr)
    p_nlos = 1.0 - p_out - p_los
    if d_arr.ndim == 0:
        return float(p_out), float(p_los), float(p_nlos)
    return p_out, p_los, p_nlos


def pathloss_db(d, state, spec: CarrierSpec, xi=0.0):
    """alpha + beta * 10 log10(d) + xi, with (alpha, beta) picked by carrier and state."""
    state = LinkState(state)
    if state is LinkState.OUTAGE:
        raise OutageLink("no path loss is defined for a link in outage")
    if np.any(~(np.asarray(d, dtype=float) > 0)):
        raise NonPositiveDistance(f"distance must be > 0, got {d!r}")
    p = spec.los if state is LinkState.LOS else spec.nlos
    return p.alpha + p.beta * 10.0 * np.log10(d) + xi


# ---------------------------------------------------------------------------
# arrays and beams

def direction_cosines(theta, phi):
    """Map (azimuth, elevation) to the per-axis phase slopes of the UPA."""
    return np.sin(theta) * np.cos(phi), np.sin(phi)


def _side(n: int) -> int:
    side = math.isqrt(int(n))
    if n < 1 or side * side != n:
        raise NotPerfectSquare(f"element count {n} is not a perfect square >= 1")
    return side


def array_response(n: int, theta: float, phi: float) -> np.ndarray:
    """Unit-modulus UPA response; element (p, q) sits at flat index p*side + q."""
    side = _side(n)
    u, v = direction_cosines(theta, phi)
    k = np.arange(side)
    row = np.exp(-2j * np.pi * SPACING * k * u)
    col = np.exp(-2j * np.pi * SPACING * k * v)
    return np.outer(row, col).ravel()


def steering_vector(n: int, theta: float, phi: float) -> np.ndarray:
    return array_response(n, theta, phi) / math.sqrt(n)


def _geometric_sum(side: int, x):
    """sum_{p<side} exp(-j 2 pi SPACING p x), closed form with a direct-sum fallback."""
    x = np.asarray(x, dtype=float)
    half = np.pi * SPACING * x
    s = np.sin(half)
    small = np.abs(s) < 1e-9
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.exp(-1j * half * (side - 1)) * np.sin(side * half) / s
    if np.any(small):
        p = np.arange(side)
        xs = x[small]
        out = np.array(out, dtype=complex, copy=True)
        out[small] = np.exp(-2j * np.pi * SPACING * np.multiply.outer(xs, p)).sum(axis=-1)
    return out


def beam_response(side: int, beam_u, beam_v, ray_u, ray_v):
    """w(beam)^H a(ray) for a side x side UPA, w unit-norm and a unit-modulus."""
    return (_geometric_sum(side, np.subtract(ray_u, beam_u))
            * _geometric_sum(side, np.subtract(ray_v, beam_v)) / side)


# ---------------------------------------------------------------------------
# realizations

@dataclass(frozen=True)
class Ray:
    tx_azimuth: float
    tx_elevation: float
    rx_azimuth: float
    rx_elevation: float
    gain: tuple[complex, complex]   # per carrier (low, high)


@dataclass(frozen=True)
class Cluster:
    """A cluster: centre angles, power share and its rays.

    ``gain`` is the per-carrier sum of the ray gains, so that
    E|gain|^2 equals ``power_fraction``.
    """

    power_fraction: float
    tx_azimuth: float
    tx_elevation: float
    rx_azimuth: float
    rx_elevation: float
    gain: tuple[complex, complex]
    rays: tuple[Ray, ...]


@dataclass(frozen=True)
class LinkRealization:
    state: LinkState
    distance: float
    pathloss_db: tuple[float, float] | None
    clusters: tuple[Cluster, ...]
    boresight_tx: tuple[float, float]
    boresight_rx: tuple[float, float]

    @property
    def strongest(self) -> int:
        powers = [c.power_fraction for c in self.clusters]
        return int(np.argmax(powers))

    def channel_sum(self, carrier: int, w_tx: np.ndarray, w_rx: np.ndarray) -> complex:
        total = 0j
        for cl in self.clusters:
            for ray in cl.rays:
                a_tx = array_response(len(w_tx), ray.tx_azimuth, ray.tx_elevation)
                a_rx = array_response(len(w_rx), ray.rx_azimuth, ray.rx_elevation)
                total += ray.gain[carrier] * np.vdot(w_rx, a_rx) * np.vdot(a_tx, w_tx)
        return total

    def matrix(self, carrier: int, n_tx: int, n_rx: int) -> np.ndarray:
        """Dense n_rx x n_tx channel matrix (tests and debugging only)."""
        h = np.zeros((n_rx, n_tx), dtype=complex)
        for cl in self.clusters:
            for ray in cl.rays:
                a_tx = array_response(n_tx, ray.tx_azimuth, ray.tx_elevation)
                a_rx = array_response(n_rx, ray.rx_azimuth, ray.rx_elevation)
                h += ray.gain[carrier] * np.outer(a_rx, a_tx.conj())
        return h


def beamformed_gain(link: LinkRealization, carrier: int, w_tx, w_rx,
                    spec: CarrierSpec | None = None) -> float:
    """|w_rx^H H w_tx|^2 with H summed over the link's rays."""
    if link.state is LinkState.OUTAGE:
        raise OutageLink("beamformed gain requested on an outage link")
    w_tx = np.asarray(w_tx)
    w_rx = np.asarray(w_rx)
    if spec is not None and (len(w_tx) != spec.bs_elements or len(w_rx) != spec.ue_elements):
        raise DimensionMismatch(
            f"beams ({len(w_tx)}, {len(w_rx)}) vs array ({spec.bs_elements}, {spec.ue_elements})")
    _side(len(w_tx))
    _side(len(w_rx))
    return float(abs(link.channel_sum(carrier, w_tx, w_rx)) ** 2)


def serving_beams(link: LinkRealization, spec: CarrierSpec):
    """TX and RX steering vectors aimed at the strongest cluster's centre (lowest index on ties)."""
    if link.state is LinkState.OUTAGE:
        raise OutageLink("no serving beams on an outage link")
    cl = link.clusters[link.strongest]
    return (steering_vector(spec.bs_elements, cl.tx_azimuth, cl.tx_elevation),
            steering_vector(spec.ue_elements, cl.rx_azimuth, cl.rx_elevation))


def _draw(distance: np.ndarray, cfg: ScenarioConfig, rng: np.random.Generator,
          state: np.ndarray | None = None) -> dict:
    """Draw states, shadowing, clusters and rays for a batch of links (fixed draw order)."""
    n = len(distance)
    d = np.maximum(distance, MIN_DISTANCE)
    r = rng.random(n)
    if state is None:
        p_out, p_los, _ = link_state_probs(d)
        state = np.where(r < p_out, LinkState.OUTAGE,
                         np.where(r < p_out + p_los, LinkState.LOS, LinkState.NLOS))
    state = np.asarray(state, dtype=np.int64)
    live = np.flatnonzero(state != LinkState.OUTAGE)
    m = len(live)

    xi = rng.standard_normal((2, m))
    pl = np.empty((2, m))
    for c, spec in enumerate(cfg.carriers):
        los = state[live] == LinkState.LOS
        sigma = np.where(los, spec.los.sigma, spec.nlos.sigma)
        alpha = np.where(los, spec.los.alpha, spec.nlos.alpha)
        beta = np.where(los, spec.los.beta, spec.nlos.beta)
        pl[c] = alpha + beta * 10.0 * np.log10(d[live]) + sigma * xi[c]

    model = cfg.clusters
    k = np.maximum(1, rng.poisson(model.mean_count, m))
    ptr = np.concatenate(([0], np.cumsum(k))).astype(np.int64)
    total = int(ptr[-1])
    seg = np.repeat(np.arange(m), k)
    rank = np.arange(total) - ptr[seg]
    raw = rng.exponential(1.0, total) * np.exp(-model.power_decay * rank)
    power = raw / np.bincount(seg, weights=raw, minlength=m)[seg]

    el = model.elevation_spread_rad
    centre = np.vstack([rng.uniform(0.0, 2 * np.pi, total), rng.uniform(-el, el, total),
                        rng.uniform(0.0, 2 * np.pi, total), rng.uniform(-el, el, total)])

    P = int(model.subpaths)
    spread = np.deg2rad([model.tx_azimuth_spread_deg, model.tx_elevation_spread_deg,
                         model.rx_azimuth_spread_deg, model.rx_elevation_spread_deg])
    rays = np.repeat(centre, P, axis=1) + spread[:, None] * rng.standard_normal((4, total * P))
    ray_power = np.repeat(power, P) / P
    gain = np.empty((2, total * P), dtype=complex)
    for c in range(2):
        z = rng.standard_normal((2, total * P))
        gain[c] = (z[0] + 1j * z[1]) * np.sqrt(ray_power / 2.0)

    order = np.lexsort((rank, -power, seg))
    best = order[ptr[:-1]]
    return dict(state=state, live=live, pathloss_db=pl, cl_ptr=ptr, cl_power=power,
                centre=centre, subpaths=P, rays=rays, gain=gain, best=best)


@dataclass
class LinkTable:
    """All non-outage links of one repetition, clusters stored in CSR form.

    ``link_of[b, u]`` is the link index or -1 for outage.  Link ``l`` owns
    clusters ``cl_ptr[l]:cl_ptr[l+1]``; cluster ``g`` owns rays
    ``g*subpaths:(g+1)*subpaths``.  Angle arrays are rows of
    (tx azimuth, tx elevation, rx azimuth, rx elevation).
    """

    n_bs: int
    n_ue: int
    link_of: np.ndarray
    link_bs: np.ndarray
    link_ue: np.ndarray
    state: np.ndarray
    distance: np.ndarray
    pathloss_db: np.ndarray     # (2, L)
    boresight: np.ndarray       # (L,) azimuth of the BS->UE direction
    cl_ptr: np.ndarray
    cl_power: np.ndarray
    centre: np.ndarray          # (4, C)
    subpaths: int
    rays: np.ndarray            # (4, C * subpaths)
    gain: np.ndarray            # (2, C * subpaths) complex
    best: np.ndarray            # (L,) global id of the strongest cluster

    @property
    def n_links(self) -> int:
        return len(self.link_bs)

    def link(self, b: int, u: int) -> LinkRealization:
        lid = int(self.link_of[b, u])
        if lid < 0:
            return LinkRealization(LinkState.OUTAGE, float("nan"), None, (), (0.0, 0.0), (0.0, 0.0))
        return self._realization(lid)

    def _realization(self, lid: int) -> LinkRealization:
        P = self.subpaths
        clusters = []
        for g in range(self.cl_ptr[lid], self.cl_ptr[lid + 1]):
            rays = tuple(Ray(*(float(a) for a in self.rays[:, r]),
                             (complex(self.gain[0, r]), complex(self.gain[1, r])))
                         for r in range(g * P, (g + 1) * P))
            total = tuple(complex(self.gain[c, g * P:(g + 1) * P].sum()) for c in range(2))
            clusters.append(Cluster(float(self.cl_power[g]), *(float(a) for a in self.centre[:, g]),
                                    total, rays))
        az = float(self.boresight[lid])
        return LinkRealization(LinkState(int(self.state[lid])), float(self.distance[lid]),
                               (float(self.pathloss_db[0, lid]), float(self.pathloss_db[1, lid])),
                               tuple(clusters), (az, 0.0), (az + np.pi, 0.0))


def _table(n_bs, n_ue, link_of, live, n_ue_cols, dist, boresight, drawn) -> LinkTable:
    return LinkTable(
        n_bs=n_bs, n_ue=n_ue, link_of=link_of,
        link_bs=(live // max(n_ue_cols, 1)).astype(np.int64),
        link_ue=(live % max(n_ue_cols, 1)).astype(np.int64),
        state=drawn["state"][live], distance=dist[live], pathloss_db=drawn["pathloss_db"],
        boresight=boresight, cl_ptr=drawn["cl_ptr"], cl_power=drawn["cl_power"],
        centre=drawn["centre"], subpaths=drawn["subpaths"], rays=drawn["rays"],
        gain=drawn["gain"], best=drawn["best"])


def realize_links(topo: Topology, cfg: ScenarioConfig, rng: np.random.Generator) -> LinkTable:
    vec = wrapped_vectors(topo.bs_xy, topo.ue_xy, topo.side)
    dist = np.hypot(vec[..., 0], vec[..., 1]).ravel()
    drawn = _draw(dist, cfg, rng)
    live = drawn["live"]
    link_of = np.full(topo.n_bs * topo.n_ue, -1, dtype=np.int64)
    link_of[live] = np.arange(len(live))
    boresight = np.arctan2(vec[..., 1], vec[..., 0]).ravel()[live]
    return _table(topo.n_bs, topo.n_ue, link_of.reshape(topo.n_bs, topo.n_ue), live,
                  topo.n_ue, dist, boresight, drawn)


def realize_link(bs, ue, cfg: ScenarioConfig, rng: np.random.Generator,
                 state: LinkState | None = None) -> LinkRealization:
    """Realize a single BS-UE link (wrapped distance on the scenario's square)."""
    vec = wrapped_vectors(np.asarray([bs], dtype=float), np.asarray([ue], dtype=float), cfg.side_m)
    dist = np.hypot(vec[..., 0], vec[..., 1]).ravel()
    forced = None if state is None else np.array([int(state)])
    drawn = _draw(dist, cfg, rng, forced)
    if len(drawn["live"]) == 0:
        return LinkRealization(LinkState.OUTAGE, float(dist[0]), None, (), (0.0, 0.0), (0.0, 0.0))
    az = np.arctan2(vec[..., 1], vec[..., 0]).ravel()
    table = _table(1, 1, np.zeros((1, 1), dtype=np.int64), drawn["live"], 1, dist, az, drawn)
    return table._realization(0)


def dump_link(link: LinkRealization, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"state\t{link.state.name}\ndistance\t{link.distance!r}\n")
        if link.pathloss_db is not None:
            fh.write(f"pathloss_db\t{link.pathloss_db[0]!r}\t{link.pathloss_db[1]!r}\n")
        fh.write("cluster\tpower\ttx_az\ttx_el\trx_az\trx_el\tgain_low\tgain_high\n")
        for k, c in enumerate(link.clusters):
            fh.write(f"{k}\t{c.power_fraction!r}\t{c.tx_azimuth!r}\t{c.tx_elevation!r}\t"
                     f"{c.rx_azimuth!r}\t{c.rx_elevation!r}\t{c.gain[0]!r}\t{c.gain[1]!r}\n")
            for ray in c.rays:
                fh.write(f"{k}\tray\t{ray.tx_azimuth!r}\t{ray.tx_elevation!r}\t{ray.rx_azimuth!r}\t"
                         f"{ray.rx_elevation!r}\t{ray.gain[0]!r}\t{ray.gain[1]!r}\n")
