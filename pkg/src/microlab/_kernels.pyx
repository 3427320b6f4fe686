# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def lmf_fixed(const long long[:] picks, const long long[:] sizes,
              const signed char[:] signs, long long K):
    cdef Py_ssize_t n = picks.shape[0]
    if sizes.shape[0] < n + K or signs.shape[0] < n + K:
        raise ValueError("need at least n + K pre-drawn sizes and signs")
    eps_arr = np.empty(n, dtype=np.int8)
    ids_arr = np.empty(n, dtype=np.int64)
    cdef signed char[:] eps = eps_arr
    cdef long long[:] ids = ids_arr
    slot_id_arr = np.arange(K, dtype=np.int64)
    left_arr = np.asarray(sizes[:K], dtype=np.int64).copy()
    cdef long long[:] slot_id = slot_id_arr
    cdef long long[:] left = left_arr
    cdef long long nxt = K
    cdef Py_ssize_t t
    cdef long long k, oid
    for t in range(n):
        k = picks[t]
        oid = slot_id[k]
        eps[t] = signs[oid]
        ids[t] = oid
        left[k] -= 1
        if left[k] <= 0:
            slot_id[k] = nxt
            left[k] = sizes[nxt]
            nxt += 1
    return eps_arr, ids_arr


def lmf_general(const double[:] u_pick, const double[:] u_create,
                const long long[:] sizes, const signed char[:] signs,
                long long K0, double lam):
    cdef Py_ssize_t n = u_pick.shape[0]
    if sizes.shape[0] < n + K0 or signs.shape[0] < n + K0:
        raise ValueError("need at least n + K0 pre-drawn sizes and signs")
    eps_arr = np.empty(n, dtype=np.int8)
    ids_arr = np.empty(n, dtype=np.int64)
    kt_arr = np.empty(n, dtype=np.int64)
    cdef signed char[:] eps = eps_arr
    cdef long long[:] ids = ids_arr
    cdef long long[:] kt = kt_arr
    slot_arr = np.empty(n + K0, dtype=np.int64)
    left_arr = np.empty(n + K0, dtype=np.int64)
    cdef long long[:] slot = slot_arr
    cdef long long[:] left = left_arr
    cdef long long live = K0, nxt = K0
    cdef Py_ssize_t t
    cdef long long k, oid
    for t in range(K0):
        slot[t] = t
        left[t] = sizes[t]
    for t in range(n):
        if live == 0 or u_create[t] < lam:
            slot[live] = nxt
            left[live] = sizes[nxt]
            live += 1
            nxt += 1
        k = <long long>(u_pick[t] * live)
        if k >= live:
            k = live - 1
        oid = slot[k]
        eps[t] = signs[oid]
        ids[t] = oid
        kt[t] = live
        left[k] -= 1
        if left[k] <= 0:
            live -= 1
            slot[k] = slot[live]
            left[k] = left[live]
    return eps_arr, ids_arr, kt_arr


def markov_signs(const double[:] u, double rho, int e0):
    cdef Py_ssize_t n = u.shape[0]
    out_arr = np.empty(n, dtype=np.int8)
    cdef signed char[:] out = out_arr
    cdef double stay = 0.5 * (1.0 + rho)
    cdef int prev = e0
    cdef Py_ssize_t t
    for t in range(n):
        if u[t] >= stay:
            prev = -prev
        out[t] = prev
    return out_arr


def linear_signs(const double[:] u, const double[:] coeffs,
                 const signed char[:] init):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t K = coeffs.shape[0]
    if init.shape[0] != K:
        raise ValueError("init must have one entry per coefficient")
    buf_arr = np.empty(n + K, dtype=np.int8)
    cdef signed char[:] buf = buf_arr
    cdef Py_ssize_t t, i
    cdef double pred
    for t in range(K):
        buf[t] = init[t]
    for t in range(n):
        pred = 0.0
        for i in range(K):
            pred += coeffs[i] * buf[K + t - 1 - i]
        if u[t] < 0.5 * (1.0 + pred):
            buf[K + t] = 1
        else:
            buf[K + t] = -1
    return buf_arr[K:].copy()


def gm_paths(const double[:, :] u_type, const double[:, :] u_noise,
             const signed char[:] outcome, double q, double delta0):
    cdef Py_ssize_t D = u_type.shape[0]
    cdef Py_ssize_t n = u_type.shape[1]
    delta_arr = np.empty((D, n + 1), dtype=np.float64)
    sgn_arr = np.empty((D, n), dtype=np.int8)
    cdef double[:, :] delta = delta_arr
    cdef signed char[:, :] sgn = sgn_arr
    cdef double p_hi = 0.5 * (1.0 + q), p_lo = 0.5 * (1.0 - q)
    cdef double d, lh, ll
    cdef int s
    cdef Py_ssize_t i, t
    for i in range(D):
        d = delta0
        delta[i, 0] = d
        for t in range(n):
            if u_type[i, t] < q:
                s = outcome[i]
            elif u_noise[i, t] < 0.5:
                s = 1
            else:
                s = -1
            sgn[i, t] = s
            if s > 0:
                lh = p_hi
                ll = p_lo
            else:
                lh = p_lo
                ll = p_hi
            d = d * lh / (d * lh + (1.0 - d) * ll)
            delta[i, t + 1] = d
    return delta_arr, sgn_arr


def mm_inventory(const signed char[:] eps, const double[:] vol,
                 double phi0, double alpha, double v0):
    cdef Py_ssize_t n = eps.shape[0]
    phi_arr = np.empty(n, dtype=np.float64)
    inv_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[:] phi = phi_arr
    cdef double[:] inv = inv_arr
    cdef double V = v0, f
    cdef Py_ssize_t t
    inv[0] = V
    for t in range(n):
        f = phi0 * (1.0 + alpha * V * eps[t])
        if f < 0.0:
            f = 0.0
        elif f > 1.0:
            f = 1.0
        phi[t] = f
        V = V - eps[t] * f * vol[t]
        inv[t + 1] = V
    return phi_arr, inv_arr
