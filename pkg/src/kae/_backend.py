"""Select the compiled core or the numpy fallback at import time.

``KAE_BACKEND=python`` forces the fallback. ``KAE_THREADS`` caps the number
of threads used by the compiled Jacobian recurrence (0 or unset = all cores).
"""

import os

import numpy as np

from kae import _fallback

try:
    if os.environ.get("KAE_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced by KAE_BACKEND")
    from kae import _core
except ImportError:
    _core = None

NAME = "cython" if _core is not None else "python"


def threads():
    try:
        n = int(os.environ.get("KAE_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def sq_dists(X, Y, backend=None):
    mod = _pick(backend)
    if mod is _fallback:
        return _fallback.sq_dists(X, Y)
    return mod.sq_dists(np.ascontiguousarray(X, dtype=np.float64),
                        np.ascontiguousarray(Y, dtype=np.float64))


def jacobian_step(J_prev, G, phi, a_diag, backend=None):
    mod = _pick(backend)
    if mod is _fallback:
        return _fallback.jacobian_step(J_prev, G, phi, a_diag)
    return mod.jacobian_step(
        np.ascontiguousarray(J_prev, dtype=np.float64),
        np.ascontiguousarray(G, dtype=np.float64),
        np.ascontiguousarray(phi, dtype=np.float64),
        np.ascontiguousarray(a_diag, dtype=np.float64),
        threads(),
    )


def _pick(backend):
    if backend is None:
        return _core if _core is not None else _fallback
    if backend == "python":
        return _fallback
    if backend == "cython":
        if _core is None:
            raise ImportError("compiled core is not available")
        return _core
    raise ValueError(f"unknown backend {backend!r}")
