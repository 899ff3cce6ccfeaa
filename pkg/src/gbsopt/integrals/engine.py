"""Assembly of overlap, one-electron and two-electron tensors over MCGTO bases."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

LINDEP_THRESHOLD = 1e-10


class LinearDependenceError(ValueError):
    def __init__(self, eigenvalue, threshold=LINDEP_THRESHOLD):
        super().__init__(f"overlap matrix is (near) singular: smallest eigenvalue {eigenvalue:.3e} "
                         f"< {threshold:.0e}")
        self.eigenvalue = eigenvalue


class PrimitiveTable:
    """Primitive occurrences (rows) with integral evaluation shared between identical ones.

    With ``dedup=False`` every row is its own unique primitive. Either way
    the contraction over rows is performed in the same order, so results do
    not depend on the setting.
    """

    def __init__(self, dedup=True):
        self.dedup = dedup
        self._key_to_unique = {}
        self.rows = []
        self._ua, self._uc, self._ul = [], [], []

    def add(self, alpha, center, ang):
        key = (float(alpha), *map(float, center), *map(int, ang))
        u = self._key_to_unique.get(key) if self.dedup else None
        if u is None:
            u = len(self._ua)
            self._ua.append(key[0])
            self._uc.append(key[1:4])
            self._ul.append(key[4:])
            if self.dedup:
                self._key_to_unique[key] = u
        self.rows.append(u)
        return len(self.rows) - 1

    def __len__(self):
        return len(self.rows)

    @property
    def n_unique(self):
        return len(self._ua)

    def unique(self):
        return (np.array(self._ua, dtype=float), np.array(self._uc, dtype=float).reshape(-1, 3),
                np.array(self._ul, dtype=int).reshape(-1, 3))

    def row_map(self):
        return np.array(self.rows, dtype=int)


def expand_functions(functions, table):
    """Coefficient matrix (n_functions x n_rows) of MCGTOs over ``table``."""
    entries = []
    for f in functions:
        entries.append([(c, table.add(a, R, l)) for c, a, R, l in f.expand()])
    C = np.zeros((len(functions), len(table)))
    for i, row in enumerate(entries):
        for c, r in row:
            C[i, r] += c
    return C


def merged_coefficients(functions, table):
    """Coefficients summed onto unique primitives, shape (n_functions, n_unique)."""
    C = expand_functions(functions, table)
    out = np.zeros((len(functions), table.n_unique))
    for r, u in enumerate(table.row_map()):
        out[:, u] += C[:, r]
    return out


def contract4(E, C1, C2=None, C3=None, C4=None):
    """sum_{abcd} E[a,b,c,d] C1[i,a] C2[j,b] C3[k,c] C4[l,d]."""
    C2 = C1 if C2 is None else C2
    C3 = C1 if C3 is None else C3
    C4 = C1 if C4 is None else C4
    X = np.tensordot(E, C4, axes=([3], [1]))        # a b c l
    X = np.tensordot(X, C3, axes=([2], [1]))        # a b l k
    X = np.tensordot(X, C2, axes=([1], [1]))        # a l k j
    X = np.tensordot(X, C1, axes=([0], [1]))        # l k j i
    return X.transpose(3, 2, 1, 0)


def canonical_eri_index(W):
    """Index arrays mapping every (i,j,k,l) to its canonical 8-fold representative."""
    i, j, k, l = np.indices((W, W, W, W))
    a, b = np.maximum(i, j), np.minimum(i, j)
    c, d = np.maximum(k, l), np.minimum(k, l)
    ab = a * (a + 1) // 2 + b
    cd = c * (c + 1) // 2 + d
    swap = cd > ab
    return (np.where(swap, c, a), np.where(swap, d, b), np.where(swap, a, c), np.where(swap, b, d))


def symmetrize_eri(B):
    """Copy each canonical element onto its 7 permutation partners (exact symmetry)."""
    return B[canonical_eri_index(B.shape[0])]


def unique_eri_elements(B):
    """Canonical (i >= j, k >= l, ij >= kl) index tuples and values."""
    W = B.shape[0]
    out = []
    for i in range(W):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(W):
                for l in range(k + 1):
                    if k * (k + 1) // 2 + l <= ij:
                        out.append(((i, j, k, l), B[i, j, k, l]))
    return out


@dataclass(frozen=True, eq=False)
class IntegralTensors:
    """Raw-basis integrals: overlap S, one-electron A = T + V, two-electron B (chemist notation)."""
    S: np.ndarray
    A: np.ndarray
    B: np.ndarray
    T: np.ndarray
    V: np.ndarray

    @property
    def W(self):
        return self.S.shape[0]


def check_overlap(S, threshold=LINDEP_THRESHOLD):
    lam = np.linalg.eigvalsh(S)
    if lam[0] < threshold:
        raise LinearDependenceError(float(lam[0]), threshold)
    return lam


def _sym(M):
    return 0.5 * (M + M.T)


def build_tensors(basis, field, dedup=True, check=True):
    """Overlap, core-Hamiltonian and ERI tensors of ``basis`` in ``field``."""
    functions = basis.functions if hasattr(basis, "functions") else tuple(basis)
    if not functions:
        raise ValueError("empty basis")
    table = PrimitiveTable(dedup)
    C = expand_functions(functions, table)
    prims = table.unique()
    rows = table.row_map()
    grid = np.ix_(rows, rows)
    S = _sym(C @ kernels.overlap_matrix(prims, prims)[grid] @ C.T)
    T = _sym(C @ kernels.kinetic_matrix(prims, prims)[grid] @ C.T)
    V = _sym(C @ kernels.nuclear_matrix(prims, prims, field.charges, field.positions)[grid] @ C.T)
    E = kernels.eri_tensor(prims)[np.ix_(rows, rows, rows, rows)]
    B = symmetrize_eri(contract4(E, C))
    if check:
        check_overlap(S)
    return IntegralTensors(S, T + V, B, T, V)


@dataclass(frozen=True, eq=False)
class CrossIntegrals:
    """Integrals with one index over an auxiliary function set ``psi``.

    ``S[a, n] = <psi_a|phi_n>``, ``A[a, n] = <psi_a|h|phi_n>``,
    ``B[a, n, l, s] = (psi_a phi_n|phi_l phi_s)``.
    """
    S: np.ndarray
    A: np.ndarray
    B: np.ndarray


def cross_integrals(psi_functions, basis_functions, field, two_electron=True):
    """Integrals pairing each ``psi`` function with the basis; see ``CrossIntegrals``."""
    tp = PrimitiveTable()
    Cp = merged_coefficients(basis_functions, tp)
    pp = tp.unique()
    W = len(basis_functions)
    n_psi = len(psi_functions)
    if n_psi == 0:
        return CrossIntegrals(np.zeros((0, W)), np.zeros((0, W)), np.zeros((0, W, W, W)))
    td = PrimitiveTable()
    Cd = merged_coefficients(psi_functions, td)
    pd = td.unique()
    S = Cd @ kernels.overlap_matrix(pd, pp) @ Cp.T
    # kinetic is applied to the basis side: its angular momentum stays small
    A = Cd @ (kernels.kinetic_matrix(pd, pp)
              + kernels.nuclear_matrix(pd, pp, field.charges, field.positions)) @ Cp.T
    if not two_electron:
        return CrossIntegrals(S, A, None)
    E = kernels.eri_block(pd, pp)                      # a b c d
    X = np.tensordot(E, Cp, axes=([3], [1]))           # a b c s
    X = np.tensordot(X, Cp, axes=([2], [1]))           # a b s l
    X = np.tensordot(X, Cp, axes=([1], [1]))           # a s l n
    X = np.tensordot(Cd, X, axes=([1], [0]))           # psi s l n
    return CrossIntegrals(S, A, X.transpose(0, 3, 2, 1))
