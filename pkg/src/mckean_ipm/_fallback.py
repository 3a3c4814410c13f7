"""Pure-numpy implementations of the hot kernels.

Every function here mirrors one in ``_kernels.pyx`` with the same signature
and the same floating-point evaluation order. Accepted ziggurat draws are
bitwise identical across backends; the rare wedge/tail draws go through
``exp``/``log`` and may differ in the last bit.
"""
import numpy as np

from ._ziggurat import RATIO as _ZR, R as _ZTAIL, X as _ZX

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11, _S32 = (np.uint64(s) for s in (30, 27, 31, 11, 32))
_MASK8 = np.uint64(0xFF)
_TWO_M53 = 2.0**-53
_MASK64 = 0xFFFFFFFFFFFFFFFF

NAME = "numpy"


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _mul_golden(k):
    return np.uint64((int(k) * 0x9E3779B97F4A7C15) & _MASK64)


def _step_hash(keys, counter):
    return mix64(keys + _mul_golden(counter))


def _unit_open(bits):
    """(0, 1] from the top 53 bits."""
    return ((bits >> _S11).astype(np.float64) + 1.0) * _TWO_M53


def _ziggurat(h, j):
    """One standard normal per entry of ``h`` for component ``j``."""
    out = np.empty(h.shape[0])
    todo = np.arange(h.shape[0])
    attempt = 0
    while todo.size:
        w = mix64(h[todo] + _mul_golden((j + 1) + (attempt << 32)))
        layer = (w & _MASK8).astype(np.intp)
        u = 2.0 * ((w >> _S11).astype(np.float64) * _TWO_M53) - 1.0
        fast = np.abs(u) < _ZR[layer]
        out[todo[fast]] = u[fast] * _ZX[layer[fast]]
        tail = ~fast & (layer == 0)
        if tail.any():
            out[todo[tail]] = _tail(w[tail], u[tail])
        wedge = np.flatnonzero(~fast & (layer != 0))
        ok = _wedge_accept(w[wedge], layer[wedge], u[wedge])
        out[todo[wedge[ok]]] = u[wedge[ok]] * _ZX[layer[wedge[ok]]]
        todo = todo[wedge[~ok]]
        attempt += 1
    return out


def _tail(w, u):
    res = np.empty(w.shape[0])
    todo = np.arange(w.shape[0])
    t = 0
    while todo.size:
        ww = w[todo]
        x = np.log(_unit_open(mix64(ww ^ _mul_golden(2 * t + 1)))) / _ZTAIL
        y = np.log(_unit_open(mix64(ww ^ _mul_golden(2 * t + 2))))
        done = ~(-2.0 * y < x * x)
        idx = todo[done]
        res[idx] = np.where(u[idx] < 0, x[done] - _ZTAIL, _ZTAIL - x[done])
        todo = todo[~done]
        t += 1
    return res


def _wedge_accept(w, layer, u):
    x = u * _ZX[layer]
    xi, xn = _ZX[layer], _ZX[layer + 1]
    f0 = np.exp(-0.5 * (xi * xi - x * x))
    f1 = np.exp(-0.5 * (xn * xn - x * x))
    v = _unit_open(mix64(w ^ _GOLDEN)) - _TWO_M53
    return f1 + v * (f0 - f1) < 1.0


def normals(keys, counter, m):
    """Standard normals ``Z[i, j]`` keyed by ``(keys[i], counter, j)``."""
    keys = np.asarray(keys, dtype=np.uint64)
    h = _step_hash(keys, counter)
    out = np.empty((keys.shape[0], m))
    for j in range(m):
        out[:, j] = _ziggurat(h, j)
    return out


def uniforms(keys, counter):
    """Uniforms on [0, 1) keyed by ``(keys[i], counter)``."""
    keys = np.asarray(keys, dtype=np.uint64)
    a = mix64(_step_hash(keys, counter) ^ _GOLDEN)
    return (a >> _S11).astype(np.float64) * _TWO_M53


def em_step_affine(ring, head, keys, counter, dt, rate, c_lag, shift, S, s0, s1, nthreads=1):
    """One Euler-Maruyama step for drift ``-rate*x(0) + c_lag*x(-r0) + shift``
    and diffusion ``S * sqrt(s0 + s1*|x(0)|^2)``, written into the ring slot
    after ``head``. Returns the first particle with a non-finite result or -1.
    """
    L = ring.shape[1]
    d, m = S.shape
    nxt = (head + 1) % L
    x = ring[:, head, :]
    xl = ring[:, nxt, :]
    # overflow is reported through the non-finite check below
    with np.errstate(over="ignore", invalid="ignore"):
        drift = -rate * x + c_lag * xl + shift
        if s1 != 0:
            r2 = x[:, 0] * x[:, 0]
            for k in range(1, d):
                r2 = r2 + x[:, k] * x[:, k]
            scale = np.sqrt(s0 + s1 * r2)
        else:
            scale = np.full(len(x), np.sqrt(s0))
        z = normals(keys, counter, m)
        noise = np.empty_like(x)
        for a in range(d):
            acc = S[a, 0] * z[:, 0]
            for k in range(1, m):
                acc = acc + S[a, k] * z[:, k]
            noise[:, a] = acc
        tmp = np.sqrt(dt) * scale
        new = x + dt * drift + tmp[:, None] * noise
    ring[:, nxt, :] = new
    bad = np.flatnonzero(~np.all(np.isfinite(new), axis=1))
    return int(bad[0]) if bad.size else -1


def em_run_affine(ring, head, keys, counter, n_steps, dt, rate, c_lag, shift, S, s0, s1, nthreads=1):
    """``n_steps`` consecutive :func:`em_step_affine` calls with counters
    ``counter, counter + 1, ...``. Returns ``(particle, step_offset)`` of the
    earliest non-finite state, or ``(-1, -1)``."""
    L = ring.shape[1]
    for s in range(n_steps):
        bad = em_step_affine(ring, (head + s) % L, keys, counter + s, dt, rate, c_lag, shift, S, s0, s1)
        if bad >= 0:
            return bad, s
    return -1, -1


def sup_norms(segs):
    """Per-segment sup over grid points of the Euclidean norm; ``segs`` is (N, L, d)."""
    if segs.shape[2] == 1:
        return np.abs(segs[:, :, 0]).max(axis=1)
    sq = segs[:, :, 0] * segs[:, :, 0]
    for k in range(1, segs.shape[2]):
        sq = sq + segs[:, :, k] * segs[:, :, k]
    return np.sqrt(sq.max(axis=1))


def sup_cost(A, B, p, nthreads=1):
    """Cost matrix ``max_l |A[i, l] - B[j, l]|^p`` for segment stacks A, B."""
    n, m = A.shape[0], B.shape[0]
    out = np.empty((n, m))
    rows = max(1, int(2_000_000 // max(1, m * A.shape[1] * A.shape[2])))
    for i0 in range(0, n, rows):
        diff = A[i0 : i0 + rows, None, :, :] - B[None, :, :, :]
        if A.shape[2] == 1:
            out[i0 : i0 + rows] = np.abs(diff[..., 0]).max(axis=2)
            continue
        sq = diff[..., 0] * diff[..., 0]
        for k in range(1, A.shape[2]):
            sq = sq + diff[..., k] * diff[..., k]
        out[i0 : i0 + rows] = np.sqrt(sq.max(axis=2))
    if p != 1.0:
        out = out**p
    return out
