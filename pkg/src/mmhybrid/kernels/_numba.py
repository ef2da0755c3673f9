"""Loop kernels compiled with numba.

``net`` and ``st`` are the array tuples assembled by
:class:`mmhybrid.association.Network` and :class:`mmhybrid.association.Assignment`;
see that module for the field order.
"""
import math

import numba
import numpy as np

jit = numba.njit(cache=True)


@jit
def _phasors(x, side, out):
    """out[p] = exp(-j pi p x) for p < side."""
    z = complex(math.cos(math.pi * x), -math.sin(math.pi * x))
    acc = 1.0 + 0.0j
    for p in range(side):
        out[p] = acc
        acc *= z


@jit
def _dot(f, g, side):
    acc = 0j
    for p in range(side):
        acc += f[p] * g[p]
    return acc


@jit
def coupling(link_bs, link_ue, cl_ptr, subpaths, ray, gain, beam, cand_ptr, cand_lid,
             bsue_ptr, bsue_ue, link_of, bs_side, ue_side, cp_off, out):
    """Fill ``out[c, cp_off[l] + s*T + t]`` with |w_rx(s)^H H_l w_tx(t)|^2.

    ``ray`` and ``beam`` hold direction cosines as rows (tx u, tx v, rx u, rx v),
    per ray and per link (the beam of a link aims at its strongest cluster).
    Each 1-D array factor is a dot product of ray and beam phasors.
    """
    n_links = len(link_bs)
    width = max(bs_side.max(), ue_side.max())
    conj_beam = np.zeros((2, n_links, 4, width), dtype=np.complex128)
    tmp = np.empty(width, dtype=np.complex128)
    for c in range(2):
        for l in range(n_links):
            for a in range(4):
                side = bs_side[c] if a < 2 else ue_side[c]
                _phasors(-beam[a, l], side, tmp)
                for p in range(side):
                    conj_beam[c, l, a, p] = tmp[p]

    f = np.empty((4, width), dtype=np.complex128)
    for l in range(n_links):
        k = link_bs[l]
        u = link_ue[l]
        s0 = cand_ptr[u]
        S = cand_ptr[u + 1] - s0
        t0 = bsue_ptr[k]
        T = bsue_ptr[k + 1] - t0
        if S == 0 or T == 0:
            continue
        r0 = cl_ptr[l] * subpaths
        r1 = cl_ptr[l + 1] * subpaths
        a = np.empty(S, dtype=np.complex128)
        b = np.empty(T, dtype=np.complex128)
        for c in range(2):
            e = np.zeros((S, T), dtype=np.complex128)
            ns, nr = bs_side[c], ue_side[c]
            for r in range(r0, r1):
                _phasors(ray[0, r], ns, f[0])
                _phasors(ray[1, r], ns, f[1])
                _phasors(ray[2, r], nr, f[2])
                _phasors(ray[3, r], nr, f[3])
                for s in range(S):
                    lb = cand_lid[s0 + s]
                    a[s] = gain[c, r] * (_dot(f[2], conj_beam[c, lb, 2], nr)
                                         * _dot(f[3], conj_beam[c, lb, 3], nr)) / nr
                for t in range(T):
                    lb = link_of[k, bsue_ue[t0 + t]]
                    b[t] = np.conj(_dot(f[0], conj_beam[c, lb, 0], ns)
                                   * _dot(f[1], conj_beam[c, lb, 1], ns)) / ns
                for s in range(S):
                    for t in range(T):
                        e[s, t] += a[s] * b[t]
            base = cp_off[l]
            for s in range(S):
                for t in range(T):
                    v = e[s, t]
                    out[c, base + s * T + t] = v.real * v.real + v.imag * v.imag


@jit
def detach(u, net, st):
    cand_ptr, cand_bs, bsue_ptr, bsue_ue = net[0], net[1], net[16], net[17]
    load, members, mpos, serve_slot, serve_c = st
    s = serve_slot[u]
    if s < 0:
        return
    c = serve_c[u]
    i = cand_bs[cand_ptr[u] + s]
    p = mpos[u]
    n = load[i, c]
    last = members[i, c, n - 1]
    members[i, c, p] = last
    mpos[bsue_ue[bsue_ptr[i] + last]] = p
    load[i, c] = n - 1
    serve_slot[u] = -1
    serve_c[u] = -1
    mpos[u] = -1


@jit
def attach(u, s, c, net, st):
    cand_ptr, cand_bs, cand_lid, slot_in_bs = net[0], net[1], net[2], net[8]
    load, members, mpos, serve_slot, serve_c = st
    i = cand_bs[cand_ptr[u] + s]
    n = load[i, c]
    members[i, c, n] = slot_in_bs[cand_lid[cand_ptr[u] + s]]
    mpos[u] = n
    load[i, c] = n + 1
    serve_slot[u] = s
    serve_c[u] = c


@jit
def candidate_rates(u, slot_only, net, st, out):
    """Fill ``out[s, c]`` with (signal W, interference W, sinr, rate bit/s).

    Loads are read as they are, so the caller detaches ``u`` first when the
    rate of a move is wanted.  ``slot_only >= 0`` restricts to one candidate.
    """
    (cand_ptr, cand_bs, cand_lid, ilink_ptr, ilink_lid, link_bs, bs_op, ue_op,
     slot_in_bs, cp_off, cpl, pl_lin, p_tx, noise, width, pooled, bsue_ptr, bsue_ue) = net
    load, members = st[0], st[1]
    base = cand_ptr[u]
    n_slots = cand_ptr[u + 1] - base
    s_lo, s_hi = 0, n_slots
    if slot_only >= 0:
        s_lo, s_hi = slot_only, slot_only + 1
    for s in range(s_lo, s_hi):
        i = cand_bs[base + s]
        lid = cand_lid[base + s]
        t = slot_in_bs[lid]
        t_i = bsue_ptr[i + 1] - bsue_ptr[i]
        for c in range(2):
            sig = p_tx[c] / pl_lin[c, lid] * cpl[c, cp_off[lid] + s * t_i + t]
            intf = 0.0
            for q in range(ilink_ptr[u], ilink_ptr[u + 1]):
                lk = ilink_lid[q]
                k = link_bs[lk]
                if k == i:
                    continue
                if pooled[c] == 0 and bs_op[k] != ue_op[u]:
                    continue
                n = load[k, c]
                if n == 0:
                    continue
                row = cp_off[lk] + s * (bsue_ptr[k + 1] - bsue_ptr[k])
                tot = 0.0
                for r in range(n):
                    tot += cpl[c, row + members[k, c, r]]
                intf += p_tx[c] / pl_lin[c, lk] * tot / n
            sinr = sig / (intf + noise[c])
            out[s, c, 0] = sig
            out[s, c, 1] = intf
            out[s, c, 2] = sinr
            out[s, c, 3] = width[c] / (1.0 + load[i, c]) * math.log2(1.0 + sinr)


@jit
def best_move(u, slot_only, net, st, out):
    candidate_rates(u, slot_only, net, st, out)
    n_slots = net[0][u + 1] - net[0][u]
    s_lo, s_hi = 0, n_slots
    if slot_only >= 0:
        s_lo, s_hi = slot_only, slot_only + 1
    best_s, best_c, best = -1, -1, -1.0
    for s in range(s_lo, s_hi):
        for c in range(2):
            if out[s, c, 3] > best:
                best = out[s, c, 3]
                best_s, best_c = s, c
    return best_s, best_c


@jit
def run_steps(picks, fixed_slot, net, st, trace, n_covered, window, tol, min_steps):
    """Sequential greedy re-association; returns (steps taken, converged)."""
    serve_c = st[4]
    max_slots = 1
    for u in range(len(net[0]) - 1):
        max_slots = max(max_slots, net[0][u + 1] - net[0][u])
    out = np.zeros((max_slots, 2, 4))
    n_low = 0
    for u in range(len(serve_c)):
        if serve_c[u] == 0:
            n_low += 1
    for step in range(len(picks)):
        u = picks[step]
        if serve_c[u] == 0:
            n_low -= 1
        detach(u, net, st)
        s, c = best_move(u, fixed_slot[u], net, st, out)
        attach(u, s, c, net, st)
        if c == 0:
            n_low += 1
        trace[step] = n_low / n_covered
        done = step + 1
        if done >= window and done >= min_steps:
            lo = trace[done - window]
            hi = lo
            for q in range(done - window, done):
                lo = min(lo, trace[q])
                hi = max(hi, trace[q])
            if hi - lo < tol:
                return done, True
    return len(picks), False
