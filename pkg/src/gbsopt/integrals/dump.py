"""Flat text dumps of integral tensors: one unique element per line, 1-based indices."""
import numpy as np

from .engine import unique_eri_elements


def _fmt(idx, v):
    return " ".join(str(i + 1) for i in idx) + f" {v:.14e}\n"


def matrix_lines(M):
    """Lower triangle (i >= j) of a symmetric matrix."""
    return [_fmt((i, j), M[i, j]) for i in range(M.shape[0]) for j in range(i + 1)]


def eri_lines(B):
    """Canonical (i >= j, k >= l, ij >= kl) elements of a two-electron tensor."""
    return [_fmt(idx, v) for idx, v in unique_eri_elements(B)]


def write_dump(path, T):
    lines = matrix_lines(T) if T.ndim == 2 else eri_lines(T)
    with open(path, "w") as fh:
        fh.writelines(lines)


def read_dump(path, W):
    """Rebuild the full symmetric tensor from a dump of a W-function basis."""
    rows = [ln.split() for ln in open(path) if ln.strip()]
    if not rows:
        raise ValueError(f"{path}: empty dump")
    rank = len(rows[0]) - 1
    T = np.zeros((W,) * rank)
    for r in rows:
        idx = tuple(int(i) - 1 for i in r[:-1])
        v = float(r[-1])
        if rank == 2:
            i, j = idx
            T[i, j] = T[j, i] = v
        else:
            i, j, k, l = idx
            for p in {(i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                      (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)}:
                T[p] = v
    return T
