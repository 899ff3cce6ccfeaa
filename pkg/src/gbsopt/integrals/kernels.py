"""Backend selection for the primitive integral kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module is used. Set ``GBSOPT_BACKEND=python`` to force the fallback.
"""
import os

from . import _pykernels

_impl = _pykernels
if os.environ.get("GBSOPT_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND

_threads = 1


def set_threads(n):
    """Cap the worker count used by compiled kernels (``None`` -> all cores)."""
    global _threads
    _threads = max(1, int(n if n is not None else (os.cpu_count() or 1)))


def get_threads():
    return _threads


def get_backend(name=None):
    """Return the kernel module called ``name`` ("python" or "cython")."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def boys_array(mmax, x):
    return _impl.boys_array(mmax, x)


def overlap_matrix(pa, pb):
    return _impl.overlap_matrix(pa, pb, threads=_threads)


def kinetic_matrix(pa, pb):
    return _impl.kinetic_matrix(pa, pb, threads=_threads)


def nuclear_matrix(pa, pb, charges, positions):
    return _impl.nuclear_matrix(pa, pb, charges, positions, threads=_threads)


def eri_tensor(prims):
    return _impl.eri_tensor(prims, threads=_threads)


def eri_block(pa, prims):
    return _impl.eri_block(pa, prims, threads=_threads)
