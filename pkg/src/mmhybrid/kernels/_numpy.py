"""Pure-numpy versions of the kernels in :mod:`._numba`.

Same signatures and results (up to floating-point summation order); the
per-candidate work is vectorized over candidate slots and interferer members.
"""
import numpy as np


def _gsum(side, x):
    half = np.pi * 0.5 * x
    s = np.sin(half)
    small = np.abs(s) < 1e-9
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.exp(-1j * half * (side - 1)) * (np.sin(side * half) / s)
    if np.any(small):
        p = np.arange(side)
        out[small] = np.exp(-1j * np.pi * np.multiply.outer(x[small], p)).sum(axis=-1)
    return out


def coupling(link_bs, link_ue, cl_ptr, subpaths, ray, gain, beam, cand_ptr, cand_lid,
             bsue_ptr, bsue_ue, link_of, bs_side, ue_side, cp_off, out):
    for l in range(len(link_bs)):
        k, u = link_bs[l], link_ue[l]
        rx_beam = cand_lid[cand_ptr[u]:cand_ptr[u + 1]]
        tx_beam = link_of[k, bsue_ue[bsue_ptr[k]:bsue_ptr[k + 1]]]
        if len(rx_beam) == 0 or len(tx_beam) == 0:
            continue
        r = np.arange(cl_ptr[l] * subpaths, cl_ptr[l + 1] * subpaths)
        for c in range(2):
            ns, nr = bs_side[c], ue_side[c]
            a = (_gsum(nr, ray[2, r][None, :] - beam[2, rx_beam][:, None])
                 * _gsum(nr, ray[3, r][None, :] - beam[3, rx_beam][:, None])) / nr
            b = np.conj(_gsum(ns, ray[0, r][:, None] - beam[0, tx_beam][None, :])
                        * _gsum(ns, ray[1, r][:, None] - beam[1, tx_beam][None, :])) / ns
            e = (a * gain[c, r][None, :]) @ b
            out[c, cp_off[l]:cp_off[l] + e.size] = (e.real ** 2 + e.imag ** 2).ravel()


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


def candidate_rates(u, slot_only, net, st, out):
    (cand_ptr, cand_bs, cand_lid, ilink_ptr, ilink_lid, link_bs, bs_op, ue_op,
     slot_in_bs, cp_off, cpl, pl_lin, p_tx, noise, width, pooled, bsue_ptr, bsue_ue) = net
    load, members = st[0], st[1]
    base = cand_ptr[u]
    n_slots = cand_ptr[u + 1] - base
    slots = np.arange(n_slots) if slot_only < 0 else np.array([slot_only])
    bs = cand_bs[base + slots]
    lids = cand_lid[base + slots]
    sig_idx = cp_off[lids] + slots * (bsue_ptr[bs + 1] - bsue_ptr[bs]) + slot_in_bs[lids]
    links = ilink_lid[ilink_ptr[u]:ilink_ptr[u + 1]]

    for c in range(2):
        sig = p_tx[c] / pl_lin[c, lids] * cpl[c, sig_idx]
        intf = np.zeros(len(slots))
        for lk in links:
            k = link_bs[lk]
            n = load[k, c]
            if n == 0 or (not pooled[c] and bs_op[k] != ue_op[u]):
                continue
            rows = cp_off[lk] + slots * (bsue_ptr[k + 1] - bsue_ptr[k])
            tot = cpl[c][rows[:, None] + members[k, c, :n][None, :]].sum(axis=1)
            intf += np.where(bs == k, 0.0, p_tx[c] / pl_lin[c, lk] * tot / n)
        sinr = sig / (intf + noise[c])
        out[slots, c, 0] = sig
        out[slots, c, 1] = intf
        out[slots, c, 2] = sinr
        out[slots, c, 3] = width[c] / (1.0 + load[bs, c]) * np.log2(1.0 + sinr)


def best_move(u, slot_only, net, st, out):
    candidate_rates(u, slot_only, net, st, out)
    n_slots = net[0][u + 1] - net[0][u]
    if slot_only >= 0:
        c = int(np.argmax(out[slot_only, :, 3]))
        return slot_only, c
    flat = int(np.argmax(out[:n_slots, :, 3].ravel()))
    return flat // 2, flat % 2


def run_steps(picks, fixed_slot, net, st, trace, n_covered, window, tol, min_steps):
    serve_c = st[4]
    max_slots = max(1, int(np.diff(net[0]).max(initial=1)))
    out = np.zeros((max_slots, 2, 4))
    n_low = int(np.sum(serve_c == 0))
    for step, u in enumerate(picks):
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
            w = trace[done - window:done]
            if w.max() - w.min() < tol:
                return done, True
    return len(picks), False
