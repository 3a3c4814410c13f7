# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_fallback.py`` for the reference semantics."""
import numpy as np
cimport cython
from cython.parallel cimport prange
from libc.math cimport sqrt, log, exp, fabs, pow, isfinite

from mckean_ipm import _ziggurat as _zig
from libc.stdint cimport uint64_t

NAME = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.1102230246251565e-16  # 2**-53


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef double ZX[257]
cdef double ZR[256]
cdef double ZTAIL = _zig.R


def _load_tables():
    cdef Py_ssize_t i
    for i in range(257):
        ZX[i] = _zig.X[i]
    for i in range(256):
        ZR[i] = _zig.RATIO[i]


_load_tables()


cdef inline double unit_open(uint64_t bits) noexcept nogil:
    return (<double>(bits >> 11) + 1.0) * TWO_M53


cdef inline double normal_at(uint64_t h, Py_ssize_t j) noexcept nogil:
    cdef uint64_t w, attempt = 0, t
    cdef Py_ssize_t layer
    cdef double u, x, y, f0, f1, v
    while True:
        w = mix64(h + ((<uint64_t>(j + 1)) + (attempt << 32)) * GOLDEN)
        layer = <Py_ssize_t>(w & 0xFF)
        u = 2.0 * (<double>(w >> 11) * TWO_M53) - 1.0
        if fabs(u) < ZR[layer]:
            return u * ZX[layer]
        if layer == 0:
            t = 0
            while True:
                x = log(unit_open(mix64(w ^ ((2 * t + 1) * GOLDEN)))) / ZTAIL
                y = log(unit_open(mix64(w ^ ((2 * t + 2) * GOLDEN))))
                if not (-2.0 * y < x * x):
                    if u < 0:
                        return x - ZTAIL
                    return ZTAIL - x
                t += 1
        x = u * ZX[layer]
        f0 = exp(-0.5 * (ZX[layer] * ZX[layer] - x * x))
        f1 = exp(-0.5 * (ZX[layer + 1] * ZX[layer + 1] - x * x))
        v = unit_open(mix64(w ^ GOLDEN)) - TWO_M53
        if f1 + v * (f0 - f1) < 1.0:
            return x
        attempt += 1


def normals(const uint64_t[::1] keys, uint64_t counter, Py_ssize_t m):
    cdef Py_ssize_t n = keys.shape[0], i, j
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    cdef uint64_t h
    for i in range(n):
        h = mix64(keys[i] + counter * GOLDEN)
        for j in range(m):
            o[i, j] = normal_at(h, j)
    return out


def uniforms(const uint64_t[::1] keys, uint64_t counter):
    cdef Py_ssize_t n = keys.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = <double>(mix64(mix64(keys[i] + counter * GOLDEN) ^ GOLDEN) >> 11) * TWO_M53
    return out


cdef inline bint particle_step(double* x0, double* xnew, uint64_t key, uint64_t counter,
                               Py_ssize_t d, Py_ssize_t m, double dt, double sqdt,
                               double rate, double c_lag, const double* shift, const double* S,
                               double s0, double s1, double* z, double* new) noexcept nogil:
    # x0 holds x(0); xnew holds x(-r0) and receives the new state (they alias when L == 1)
    cdef Py_ssize_t a, k
    cdef double r2, tmp, acc, xa
    cdef bint ok = True
    cdef uint64_t h = mix64(key + counter * GOLDEN)
    for k in range(m):
        z[k] = normal_at(h, k)
    r2 = 0.0
    if s1 != 0.0:
        # skipped when s1 == 0 so a huge state cannot turn 0 * inf into NaN
        for k in range(d):
            r2 = r2 + x0[k] * x0[k]
    tmp = sqdt * sqrt(s0 + s1 * r2)
    for a in range(d):
        xa = x0[a]
        acc = S[a * m] * z[0]
        for k in range(1, m):
            acc = acc + S[a * m + k] * z[k]
        new[a] = xa + dt * (-rate * xa + c_lag * xnew[a] + shift[a]) + tmp * acc
    for a in range(d):
        xnew[a] = new[a]
        if not isfinite(new[a]):
            ok = False
    return ok


def em_run_affine(double[:, :, ::1] ring, Py_ssize_t head, const uint64_t[::1] keys,
                  uint64_t counter, Py_ssize_t n_steps, double dt, double rate, double c_lag,
                  const double[::1] shift, const double[:, ::1] S, double s0, double s1,
                  int nthreads=1):
    cdef Py_ssize_t n = ring.shape[0], L = ring.shape[1]
    cdef Py_ssize_t d = S.shape[0], m = S.shape[1]
    cdef Py_ssize_t i, s, hd, nx
    cdef double sqdt = sqrt(dt)
    if nthreads < 1:
        nthreads = 1
    if n == 0 or n_steps <= 0:
        return -1, -1
    cdef double[:, ::1] zbuf = np.empty((n, max(m, 1)))
    cdef double[:, ::1] newbuf = np.empty((n, d))
    cdef Py_ssize_t[::1] first_bad = np.full(n, n_steps, dtype=np.intp)
    cdef double* rp = &ring[0, 0, 0]
    cdef const double* sp = &S[0, 0]
    cdef const double* shp = &shift[0]
    cdef double* base
    cdef Py_ssize_t[::1] alive = np.ones(n, dtype=np.intp)
    hd = head
    for s in range(n_steps):
        nx = (hd + 1) % L
        for i in prange(n, nogil=True, num_threads=nthreads, schedule="static"):
            if alive[i]:
                base = rp + i * L * d
                if not particle_step(base + hd * d, base + nx * d, keys[i], counter + s, d, m,
                                     dt, sqdt, rate, c_lag, shp, sp, s0, s1,
                                     &zbuf[i, 0], &newbuf[i, 0]):
                    first_bad[i] = s
                    alive[i] = 0
        hd = nx
    cdef Py_ssize_t best_i = -1, best_s = n_steps
    for i in range(n):
        if first_bad[i] < best_s:
            best_s = first_bad[i]
            best_i = i
    if best_i < 0:
        return -1, -1
    return best_i, best_s


def em_step_affine(double[:, :, ::1] ring, Py_ssize_t head, const uint64_t[::1] keys,
                   uint64_t counter, double dt, double rate, double c_lag,
                   const double[::1] shift, const double[:, ::1] S, double s0, double s1,
                   int nthreads=1):
    bad, _ = em_run_affine(ring, head, keys, counter, 1, dt, rate, c_lag, shift, S, s0, s1, nthreads)
    return bad


def sup_norms(const double[:, :, :] segs):
    cdef Py_ssize_t n = segs.shape[0], L = segs.shape[1], d = segs.shape[2]
    cdef Py_ssize_t i, l, k
    cdef double best, sq
    out = np.empty(n)
    cdef double[::1] o = out
    if d == 1:
        for i in range(n):
            best = 0.0
            for l in range(L):
                sq = fabs(segs[i, l, 0])
                if sq > best:
                    best = sq
            o[i] = best
        return out
    for i in range(n):
        best = 0.0
        for l in range(L):
            sq = segs[i, l, 0] * segs[i, l, 0]
            for k in range(1, d):
                sq = sq + segs[i, l, k] * segs[i, l, k]
            if sq > best:
                best = sq
        o[i] = sqrt(best)
    return out


def sup_cost(const double[:, :, :] A, const double[:, :, :] B, double p, int nthreads=1):
    cdef Py_ssize_t n = A.shape[0], mm = B.shape[0], L = A.shape[1], d = A.shape[2]
    cdef Py_ssize_t i, j, l, k
    cdef double best, sq, diff
    out = np.empty((n, mm))
    cdef double[:, ::1] o = out
    if nthreads < 1:
        nthreads = 1
    for i in prange(n, nogil=True, num_threads=nthreads, schedule="static"):
        for j in range(mm):
            best = 0.0
            if d == 1:
                for l in range(L):
                    sq = fabs(A[i, l, 0] - B[j, l, 0])
                    if sq > best:
                        best = sq
            else:
                for l in range(L):
                    diff = A[i, l, 0] - B[j, l, 0]
                    sq = diff * diff
                    for k in range(1, d):
                        diff = A[i, l, k] - B[j, l, k]
                        sq = sq + diff * diff
                    if sq > best:
                        best = sq
                best = sqrt(best)
            if p != 1.0:
                best = pow(best, p)
            o[i, j] = best
    return out
