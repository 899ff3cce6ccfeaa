"""Restricted closed-shell Hartree-Fock with Loewdin orthogonalization and DIIS."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .integrals.engine import LINDEP_THRESHOLD, LinearDependenceError

log = logging.getLogger(__name__)

DIIS_SPACE = 8
DAMPING = 0.5
MAX_ITER = 200


class ScfError(ArithmeticError):
    """Raised when the SCF produces a non-finite energy."""


@dataclass(frozen=True, eq=False)
class Orthogonalizer:
    """X = S^{-1/2} with the eigenpairs of S it was built from."""
    X: np.ndarray
    V: np.ndarray
    lam: np.ndarray


def sym_orthogonalizer(S, threshold=LINDEP_THRESHOLD):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"overlap must be square, got shape {S.shape}")
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    if lam[0] < threshold:
        raise LinearDependenceError(float(lam[0]), threshold)
    X = (V * lam ** -0.5) @ V.T
    return Orthogonalizer(0.5 * (X + X.T), V, lam)


def coulomb_exchange(D, B):
    """J[m,n] = sum (mn|ls) D[l,s] and K[m,n] = sum (ml|ns) D[l,s]."""
    J = np.tensordot(B, D, axes=([2, 3], [0, 1]))
    K = np.tensordot(B, D, axes=([1, 3], [0, 1]))
    return J, K


def fock(D, A, B):
    J, K = coulomb_exchange(D, B)
    return A + 2.0 * J - K


def rhf_energy(D, tensors):
    """Closed-shell electronic energy for the per-spin density ``D``."""
    A, B = tensors.A, tensors.B
    D = np.asarray(D, dtype=float)
    if D.shape != A.shape:
        raise ValueError(f"density shape {D.shape} does not match basis size {A.shape}")
    J, K = coulomb_exchange(D, B)
    return float(2.0 * np.sum(D * A) + np.sum(D * (2.0 * J - K)))


@dataclass(frozen=True, eq=False)
class ScfResult:
    E0: float
    e_nuc: float
    D: np.ndarray
    D_orth: np.ndarray
    C: np.ndarray
    eps: np.ndarray
    orth: Orthogonalizer
    n_occ: int
    converged: bool
    iterations: int
    history: tuple = field(default=())

    @property
    def e_total(self):
        return self.E0 + self.e_nuc


class _Diis:
    def __init__(self, size=DIIS_SPACE):
        self.size = size
        self.F, self.err = [], []

    def push(self, F, err):
        self.F.append(F)
        self.err.append(err)
        if len(self.F) > self.size:
            self.F.pop(0)
            self.err.pop(0)

    def extrapolate(self):
        """Pulay extrapolation, or ``None`` when the subspace is ill-conditioned."""
        n = len(self.F)
        if n < 2:
            return None
        M = -np.ones((n + 1, n + 1))
        M[n, n] = 0.0
        for i in range(n):
            for j in range(i + 1):
                M[i, j] = M[j, i] = np.sum(self.err[i] * self.err[j])
        rhs = np.zeros(n + 1)
        rhs[n] = -1.0
        scale = np.max(np.abs(np.diag(M)[:n]))
        if scale > 0:
            M[:n, :n] /= scale
        if np.linalg.cond(M) > 1e14:
            return None
        c = np.linalg.solve(M, rhs)[:n]
        return sum(ci * Fi for ci, Fi in zip(c, self.F))


def _occupy(F_on, X, n_occ):
    eps, C_on = np.linalg.eigh(F_on)
    Cocc = C_on[:, :n_occ]
    D_on = Cocc @ Cocc.T
    return eps, C_on, D_on, X @ D_on @ X.T


def rhf(tensors, field, n_elec, conv=1e-9, max_iter=MAX_ITER, comm_tol=None, orth=None):
    """Closed-shell SCF from the core-Hamiltonian guess.

    Converged when the energy change is below ``conv`` and the largest
    element of the orthonormal-basis commutator [F, D] is below ``comm_tol``
    (default ``sqrt(conv)``). Hitting ``max_iter`` returns the last state
    with ``converged=False``.
    """
    if n_elec % 2:
        raise ValueError(f"restricted closed-shell HF needs an even electron count, got {n_elec}")
    if n_elec < 0:
        raise ValueError("negative electron count")
    W = tensors.S.shape[0]
    n_occ = n_elec // 2
    if n_occ > W:
        raise ValueError(f"{n_occ} doubly occupied orbitals do not fit into {W} basis functions")
    comm_tol = math.sqrt(conv) if comm_tol is None else comm_tol
    orth = sym_orthogonalizer(tensors.S) if orth is None else orth
    X = orth.X
    A, B, S = tensors.A, tensors.B, tensors.S
    e_nuc = field.nuclear_repulsion()

    eps, C_on, D_on, D = _occupy(X.T @ A @ X, X, n_occ)
    diis = _Diis()
    history = []
    E_prev = None
    F_prev = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        F = fock(D, A, B)
        E = float(np.sum(D * (A + F)))
        if not math.isfinite(E):
            raise ScfError(f"non-finite SCF energy at iteration {it}")
        err = X.T @ (F @ D @ S - S @ D @ F) @ X
        err_max = float(np.max(np.abs(err))) if W else 0.0
        dE = E - E_prev if E_prev is not None else float("nan")
        history.append(E)
        log.debug("scf %3d  E_elec=% .12f  dE=% .3e  diis_err=%.3e", it, E, dE, err_max)
        if E_prev is not None and abs(dE) < conv and err_max < comm_tol:
            converged = True
            break
        E_prev = E
        F_on = X.T @ F @ X
        diis.push(F_on, err)
        F_ext = diis.extrapolate()
        if F_ext is None:
            F_ext = F_on if F_prev is None or len(diis.F) < 2 else (1 - DAMPING) * F_on + DAMPING * F_prev
        F_prev = F_on
        eps, C_on, D_on, D = _occupy(0.5 * (F_ext + F_ext.T), X, n_occ)
    if not converged:
        log.warning("SCF not converged after %d iterations (last E_elec=%.12f)", it, history[-1])
    return ScfResult(history[-1], e_nuc, D, D_on, X @ C_on, eps, orth, n_occ, converged, it,
                     tuple(history))


__all__ = [
    "Orthogonalizer", "ScfError", "ScfResult", "coulomb_exchange", "fock", "rhf", "rhf_energy",
    "sym_orthogonalizer",
]
