"""Backend selection for the hot kernels.

The compiled Cython core is used when it was built; otherwise, or when
``MCKEAN_IPM_PURE_PYTHON=1`` is set, the numpy fallback is used. Both expose
``normals``, ``uniforms``, ``em_step_affine``, ``em_run_affine``, ``sup_norms``
and ``sup_cost``.

Randomness is counter based: the Gaussian for particle ``i`` at step ``k``
is a hash of ``(seed, i, k)``, so a particle's noise never depends on the
ensemble size, the thread count or the order in which particles are
advanced.
"""
import os

import numpy as np

from . import _fallback

_FORCE_PURE = os.environ.get("MCKEAN_IPM_PURE_PYTHON", "").strip() not in ("", "0")

if _FORCE_PURE:
    impl = _fallback
else:
    try:
        from . import _kernels as impl
    except ImportError:  # extension not built
        impl = _fallback

BACKEND = impl.NAME

# Counter 0 is reserved for initial-law draws; step k uses counter k + 1.
INIT_COUNTER = 0

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def get_backend(name=None):
    """Return the kernel module ``"cython"`` or ``"numpy"`` (default: active)."""
    if name is None:
        return impl
    if name == "numpy":
        return _fallback
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def num_threads() -> int:
    """Worker count for data-parallel kernels; ``MCKEAN_IPM_THREADS`` overrides."""
    env = os.environ.get("MCKEAN_IPM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _mix64_int(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *tags: int) -> int:
    """Split a 64-bit seed: ``s <- mix64(s + golden) ^ mix64((tag + 1) * golden)``
    applied once per tag. Used for per-iteration and per-purpose sub-seeds."""
    s = int(seed) & _MASK
    for tag in tags:
        s = _mix64_int(s + _GOLDEN) ^ _mix64_int((int(tag) + 1) * _GOLDEN)
    return s


def particle_keys(seed: int, indices) -> np.ndarray:
    """Stream keys for particles ``indices``; a pure function of (seed, index)."""
    base = np.uint64(_mix64_int((int(seed) & _MASK) + _GOLDEN))
    idx = np.asarray(indices, dtype=np.uint64)
    return _fallback.mix64(base ^ _fallback.mix64((idx + np.uint64(1)) * _fallback._GOLDEN))
