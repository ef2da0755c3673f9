"""PPP deployment of BSs and UEs on a square torus."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import ScenarioConfig

# BS replicas: the main area plus its eight neighbours
WRAP_OFFSETS = np.array([(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)], dtype=float)


@dataclass(frozen=True)
class Topology:
    side: float
    bs_xy: np.ndarray   # (B, 2) meters
    bs_op: np.ndarray   # (B,) operator index
    ue_xy: np.ndarray   # (U, 2)
    ue_op: np.ndarray   # (U,)

    @property
    def n_bs(self) -> int:
        return len(self.bs_op)

    @property
    def n_ue(self) -> int:
        return len(self.ue_op)

    @property
    def operators(self) -> int:
        return int(max(self.bs_op.max(initial=-1), self.ue_op.max(initial=-1))) + 1

    def bs_of(self, op: int) -> np.ndarray:
        return np.flatnonzero(self.bs_op == op)

    def ues_of(self, op: int) -> np.ndarray:
        return np.flatnonzero(self.ue_op == op)


def _positive_poisson(rng: np.random.Generator, lam: float) -> int:
    """Poisson(lam) conditioned on >= 1, by inversion (same law as redrawing zeros)."""
    u = rng.uniform(math.exp(-lam), 1.0)
    k, p = 0, math.exp(-lam)
    cdf = p
    while cdf < u and k < lam + 50 * math.sqrt(lam) + 50:
        k += 1
        p *= lam / k
        cdf += p
    return max(k, 1)


def sample_topology(cfg: ScenarioConfig, rng: np.random.Generator) -> Topology:
    """Independent PPPs per operator, with I_m >= 1 (an empty BS draw is replaced
    by a draw from the zero-truncated distribution)."""
    side = cfg.side_m
    bs_mean = cfg.bs_density * cfg.area_km2
    ue_mean = cfg.ue_density * cfg.area_km2
    bs_xy, bs_op, ue_xy, ue_op = [], [], [], []
    for m in range(cfg.operators):
        n_bs = rng.poisson(bs_mean)
        if n_bs == 0:
            n_bs = _positive_poisson(rng, bs_mean)
        n_ue = rng.poisson(ue_mean)
        bs_xy.append(rng.uniform(0.0, side, size=(n_bs, 2)))
        ue_xy.append(rng.uniform(0.0, side, size=(n_ue, 2)))
        bs_op.append(np.full(n_bs, m, dtype=np.int64))
        ue_op.append(np.full(n_ue, m, dtype=np.int64))
    return Topology(side, np.concatenate(bs_xy), np.concatenate(bs_op),
                    np.concatenate(ue_xy).reshape(-1, 2), np.concatenate(ue_op))


def wrapped_distance(bs, ue, side: float) -> tuple[float, np.ndarray]:
    """Shortest distance from ``ue`` to any of the 9 replicas of ``bs``.

    Returns the distance and the translation applied to the BS.  Ties go to
    the first offset in :data:`WRAP_OFFSETS` order.
    """
    bs = np.asarray(bs, dtype=float)
    ue = np.asarray(ue, dtype=float)
    replicas = bs[None, :] + WRAP_OFFSETS * side
    d = np.hypot(*(replicas - ue[None, :]).T)
    k = int(np.argmin(d))
    return float(d[k]), WRAP_OFFSETS[k] * side


def wrapped_vectors(bs_xy: np.ndarray, ue_xy: np.ndarray, side: float) -> np.ndarray:
    """(B, U, 2) vectors from each BS (nearest replica) to each UE."""
    delta = ue_xy[None, :, :] - bs_xy[:, None, :]
    # nearest image on a torus; equivalent to the 9-offset search for points inside the square
    return delta - side * np.round(delta / side)


def wrapped_distances(bs_xy: np.ndarray, ue_xy: np.ndarray, side: float) -> np.ndarray:
    v = wrapped_vectors(bs_xy, ue_xy, side)
    return np.hypot(v[..., 0], v[..., 1])


def dump_topology(topo: Topology, path) -> None:
    """Write a tab-separated ``operator  kind  x  y`` table; the first line carries the side."""
    with open(path, "w") as fh:
        fh.write(f"# side\t{topo.side!r}\n")
        fh.write("operator\tkind\tx\ty\n")
        for kind, xy, ops in (("bs", topo.bs_xy, topo.bs_op), ("ue", topo.ue_xy, topo.ue_op)):
            for (x, y), m in zip(xy, ops):
                fh.write(f"{int(m)}\t{kind}\t{float(x)!r}\t{float(y)!r}\n")


def load_topology(path) -> Topology:
    rows = {"bs": ([], []), "ue": ([], [])}
    side = None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# side"):
                side = float(line.split("\t")[1])
                continue
            if not line or line.startswith("operator"):
                continue
            op, kind, x, y = line.split("\t")
            rows[kind][0].append((float(x), float(y)))
            rows[kind][1].append(int(op))
    if side is None:
        raise ValueError(f"{path}: missing '# side' header")

    def arr(kind):
        xy, ops = rows[kind]
        return np.array(xy, dtype=float).reshape(-1, 2), np.array(ops, dtype=np.int64)

    bs_xy, bs_op = arr("bs")
    ue_xy, ue_op = arr("ue")
    return Topology(side, bs_xy, bs_op, ue_xy, ue_op)
