"""Pure-Python versions of the compiled kernels.

Each function returns bit-identical results to its counterpart in
``_kernels.pyx`` given the same pre-drawn random inputs.
"""
import numpy as np


def lmf_fixed(picks, sizes, signs, K):
    n = len(picks)
    if len(sizes) < n + K or len(signs) < n + K:
        raise ValueError("need at least n + K pre-drawn sizes and signs")
    picks = np.asarray(picks).tolist()
    sizes_l = np.asarray(sizes).tolist()
    signs_l = np.asarray(signs).tolist()
    slot_id = list(range(K))
    left = sizes_l[:K]
    nxt = K
    eps = [0] * n
    ids = [0] * n
    for t in range(n):
        k = picks[t]
        oid = slot_id[k]
        eps[t] = signs_l[oid]
        ids[t] = oid
        left[k] -= 1
        if left[k] <= 0:
            slot_id[k] = nxt
            left[k] = sizes_l[nxt]
            nxt += 1
    return np.array(eps, dtype=np.int8), np.array(ids, dtype=np.int64)


def lmf_general(u_pick, u_create, sizes, signs, K0, lam):
    n = len(u_pick)
    if len(sizes) < n + K0 or len(signs) < n + K0:
        raise ValueError("need at least n + K0 pre-drawn sizes and signs")
    u_pick = np.asarray(u_pick).tolist()
    u_create = np.asarray(u_create).tolist()
    sizes_l = np.asarray(sizes).tolist()
    signs_l = np.asarray(signs).tolist()
    slot = list(range(K0))
    left = sizes_l[:K0]
    nxt = K0
    eps = [0] * n
    ids = [0] * n
    kt = [0] * n
    for t in range(n):
        if not slot or u_create[t] < lam:
            slot.append(nxt)
            left.append(sizes_l[nxt])
            nxt += 1
        live = len(slot)
        k = min(int(u_pick[t] * live), live - 1)
        oid = slot[k]
        eps[t] = signs_l[oid]
        ids[t] = oid
        kt[t] = live
        left[k] -= 1
        if left[k] <= 0:
            slot[k] = slot[-1]
            left[k] = left[-1]
            slot.pop()
            left.pop()
    return (np.array(eps, dtype=np.int8), np.array(ids, dtype=np.int64),
            np.array(kt, dtype=np.int64))


def markov_signs(u, rho, e0):
    stay = 0.5 * (1.0 + rho)
    prev = int(e0)
    out = []
    for x in np.asarray(u).tolist():
        if x >= stay:
            prev = -prev
        out.append(prev)
    return np.array(out, dtype=np.int8)


def linear_signs(u, coeffs, init):
    coeffs = [float(c) for c in coeffs]
    K = len(coeffs)
    if len(init) != K:
        raise ValueError("init must have one entry per coefficient")
    buf = [int(s) for s in init]
    for x in np.asarray(u).tolist():
        pred = 0.0
        for i in range(K):
            pred += coeffs[i] * buf[-1 - i]
        buf.append(1 if x < 0.5 * (1.0 + pred) else -1)
    return np.array(buf[K:], dtype=np.int8)


def gm_paths(u_type, u_noise, outcome, q, delta0):
    u_type = np.asarray(u_type)
    u_noise = np.asarray(u_noise)
    D, n = u_type.shape
    delta = np.empty((D, n + 1))
    sgn = np.empty((D, n), dtype=np.int8)
    p_hi, p_lo = 0.5 * (1.0 + q), 0.5 * (1.0 - q)
    for i in range(D):
        d = delta0
        delta[i, 0] = d
        ut = u_type[i].tolist()
        un = u_noise[i].tolist()
        out_i = int(outcome[i])
        for t in range(n):
            if ut[t] < q:
                s = out_i
            elif un[t] < 0.5:
                s = 1
            else:
                s = -1
            sgn[i, t] = s
            lh, ll = (p_hi, p_lo) if s > 0 else (p_lo, p_hi)
            d = d * lh / (d * lh + (1.0 - d) * ll)
            delta[i, t + 1] = d
    return delta, sgn


def mm_inventory(eps, vol, phi0, alpha, v0):
    eps_l = np.asarray(eps).tolist()
    vol_l = np.asarray(vol, dtype=float).tolist()
    n = len(eps_l)
    phi = [0.0] * n
    inv = [0.0] * (n + 1)
    V = float(v0)
    inv[0] = V
    for t in range(n):
        f = phi0 * (1.0 + alpha * V * eps_l[t])
        f = min(max(f, 0.0), 1.0)
        phi[t] = f
        V = V - eps_l[t] * f * vol_l[t]
        inv[t + 1] = V
    return np.array(phi), np.array(inv)
