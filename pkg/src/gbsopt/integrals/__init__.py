"""Native Gaussian integral engine."""
from .engine import (
    LINDEP_THRESHOLD,
    CrossIntegrals,
    IntegralTensors,
    LinearDependenceError,
    PrimitiveTable,
    build_tensors,
    check_overlap,
    contract4,
    cross_integrals,
    symmetrize_eri,
    unique_eri_elements,
)
from .dump import read_dump, write_dump
from .kernels import BACKEND, boys_array, get_backend, get_threads, set_threads


def boys(m, x):
    """Boys function F_m(x)."""
    if m < 0 or x < 0:
        raise ValueError(f"Boys function needs m >= 0 and x >= 0, got m={m}, x={x}")
    return float(boys_array(int(m), float(x))[m])


def _prim_args(a, b):
    return (a.alpha, a.center, a.ang, b.alpha, b.center, b.ang)


def overlap_prim(a, b):
    """<a|b> of two normalized ``PrimitiveGTO``."""
    return a.norm * b.norm * get_backend().overlap_prim(*_prim_args(a, b))


def kinetic_prim(a, b):
    return a.norm * b.norm * get_backend().kinetic_prim(*_prim_args(a, b))


def nuclear_prim(a, b, field):
    return a.norm * b.norm * get_backend().nuclear_prim(*_prim_args(a, b), field.charges, field.positions)


def eri_prim(a, b, c, d):
    """(ab|cd) in chemist notation for normalized primitives."""
    return (a.norm * b.norm * c.norm * d.norm
            * get_backend().eri_prim(a.alpha, a.center, a.ang, b.alpha, b.center, b.ang,
                                     c.alpha, c.center, c.ang, d.alpha, d.center, d.ang))


__all__ = [
    "BACKEND", "LINDEP_THRESHOLD", "CrossIntegrals", "IntegralTensors", "LinearDependenceError",
    "PrimitiveTable", "boys", "boys_array", "build_tensors", "check_overlap", "contract4",
    "cross_integrals", "eri_prim", "get_backend", "get_threads", "kinetic_prim", "nuclear_prim",
    "overlap_prim", "read_dump", "set_threads", "symmetrize_eri", "unique_eri_elements",
    "write_dump",
]
