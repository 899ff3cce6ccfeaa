"""Analytic RHF energy gradients with respect to basis-set parameters.

The gradient is split into three parts: the derivative of the energy with
respect to the orthonormal-basis tensors A and B, the derivative of those
tensors with respect to one variable (raw integrals over a derivative basis
set plus the transport through X = S^{-1/2}), and their elementwise
contraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import ContractedGTO, MixedContractedGTO, expansion_overlap, gto_norm
from .integrals.engine import LINDEP_THRESHOLD, LinearDependenceError, build_tensors, contract4, cross_integrals
from .scf import fock, rhf, sym_orthogonalizer


class GradientError(ValueError):
    pass


# ------------------------------------------------------------ derivative functions


def _shift(ang, axis, delta):
    out = list(ang)
    out[axis] += delta
    return tuple(out)


def _cgto_raw(t):
    """Unscaled contraction sum_k d_k N_k g_k as an expansion."""
    return [(d * gto_norm(a, t.ang), a, t.center, t.ang) for a, d in zip(t.alphas, t.coeffs)]


def _cgto_direction(t, weights):
    """Directional derivative of the unscaled contraction of ``t``.

    ``weights`` maps slot name -> dp/ds for the direction ``s``.
    """
    out = []
    if t.slots is None:
        return out
    for axis, slot in enumerate(t.slots.center):
        w = weights.get(slot, 0.0)
        if w == 0.0:
            continue
        for a, d in zip(t.alphas, t.coeffs):
            n = gto_norm(a, t.ang)
            i = t.ang[axis]
            if i > 0:
                out.append((-w * i * d * n, a, t.center, _shift(t.ang, axis, -1)))
            out.append((w * 2.0 * a * d * n, a, t.center, _shift(t.ang, axis, 1)))
    L = sum(t.ang)
    for k, (a, d) in enumerate(zip(t.alphas, t.coeffs)):
        n = gto_norm(a, t.ang)
        wa = weights.get(t.slots.alphas[k], 0.0)
        if wa != 0.0:
            out.append((wa * d * n * (0.75 + 0.5 * L) / a, a, t.center, t.ang))
            for axis in range(3):
                out.append((-wa * d * n, a, t.center, _shift(t.ang, axis, 2)))
        wd = weights.get(t.slots.coeffs[k], 0.0)
        if wd != 0.0:
            out.append((wd * n, a, t.center, t.ang))
    return out


def _scaled(terms, s):
    return [(s * c, a, R, l) for c, a, R, l in terms]


def merge_expansion(terms, tol=0.0):
    """Sum coefficients of identical primitives; drop exact zeros."""
    acc = {}
    for c, a, R, l in terms:
        key = (float(a), tuple(float(x) for x in R), tuple(int(i) for i in l))
        acc[key] = acc.get(key, 0.0) + c
    return [(c, a, R, l) for (a, R, l), c in acc.items() if abs(c) > tol]


def _dphi_expansion(phi, weights):
    """Directional derivative of an MCGTO (including both renormalizations)."""
    u, du = [], []
    for t, w in zip(phi.terms, phi.weights):
        chi = _cgto_raw(t)
        dchi = _cgto_direction(t, weights)
        if not dchi:
            u += _scaled(chi, w * t.scale)
            continue
        c = t.scale
        dc = -c ** 3 * expansion_overlap(chi, dchi) if t.normalize else 0.0
        u += _scaled(chi, w * c)
        du += _scaled(chi, w * dc) + _scaled(dchi, w * c)
    if not du:
        return []
    s = phi.scale
    ds = -s ** 3 * expansion_overlap(u, du) if phi.normalize else 0.0
    return merge_expansion(_scaled(u, ds) + _scaled(du, s))


def expansion_to_mcgto(terms):
    """Un-normalized MCGTO reproducing an expansion list exactly."""
    cg = tuple(ContractedGTO(tuple(R), tuple(l), (a,), (c / gto_norm(a, l),), 1.0, None, False)
               for c, a, R, l in terms)
    return MixedContractedGTO(cg, (1.0,) * len(cg), 1.0, False)


def _referenced_slots(phi):
    out = set()
    for t in phi.terms:
        if t.slots is not None:
            out.update(t.slots.center, t.slots.alphas, t.slots.coeffs)
    return out


def d_phi_d_param(phi, slot):
    """d(phi)/d(slot) as an un-normalized MCGTO."""
    if slot not in _referenced_slots(phi):
        raise GradientError(f"function does not depend on slot {slot!r}")
    terms = _dphi_expansion(phi, {slot: 1.0})
    return expansion_to_mcgto(terms)


@dataclass(frozen=True, eq=False)
class DerivativeBasis:
    """The basis plus psi[n, i] = d(phi_n)/d(theta_i) for every free variable.

    ``index[(n, i)]`` gives the position of psi in ``psi``; pairs whose
    derivative vanishes are absent.
    """
    members: tuple
    psi: tuple
    index: dict
    free: np.ndarray

    @property
    def W(self):
        return len(self.members)

    def __len__(self):
        return len(self.members) + len(self.psi)


def build_derivative_basis(basis, graph=None):
    graph = basis.graph if graph is None else graph
    free = np.flatnonzero(graph.free_mask())
    _, J = graph.jacobian()
    slots = graph.slots
    psi, index = [], {}
    for n, phi in enumerate(basis.functions):
        refs = _referenced_slots(phi)
        for i in free:
            weights = {s: J[k, i] for k, s in enumerate(slots) if s in refs and J[k, i] != 0.0}
            if not weights:
                continue
            terms = _dphi_expansion(phi, weights)
            if not terms:
                continue
            index[(n, int(i))] = len(psi)
            psi.append(expansion_to_mcgto(terms))
    return DerivativeBasis(tuple(basis.functions), tuple(psi), index, free)


# ------------------------------------------------------------ tensor derivatives


@dataclass(frozen=True, eq=False)
class RawDerivatives:
    """Cross integrals of every psi with the basis: <psi|phi>, <psi|h|phi>, (psi phi|phi phi)."""
    S: np.ndarray
    A: np.ndarray
    B: np.ndarray


def raw_derivatives(db, field, two_electron=True):
    ci = cross_integrals(db.psi, db.members, field, two_electron)
    return RawDerivatives(ci.S, ci.A, ci.B)


def _pick(db, raw, i, attr):
    W = db.W
    M = getattr(raw, attr)
    out = np.zeros((W,) + M.shape[1:])
    for n in range(W):
        k = db.index.get((n, i))
        if k is not None:
            out[n] = M[k]
    return out


def d_overlap(db, raw, i):
    """d S / d theta_i in the raw basis."""
    P = _pick(db, raw, i, "S")
    return P + P.T


def d_orthogonalizer(orth, dS, threshold=LINDEP_THRESHOLD):
    """d(S^{-1/2}) from the eigenpairs of S."""
    lam, V = orth.lam, orth.V
    if lam[0] < threshold:
        raise LinearDependenceError(float(lam[0]), threshold)
    r = np.sqrt(lam)
    M = V.T @ dS @ V
    M /= np.outer(r, r) * (r[:, None] + r[None, :])
    return -V @ M @ V.T


def grad_wrt_tensors(scf):
    """dE0/dA and dE0/dB in the orthonormal basis at fixed density."""
    if not scf.converged:
        raise GradientError("tensor gradients need a converged SCF")
    D = scf.D_orth
    gA = 2.0 * D
    gB = 2.0 * np.einsum("ab,cd->abcd", D, D) - np.einsum("ad,bc->abcd", D, D)
    return gA, gB


def _sym8(T):
    T = 0.5 * (T + T.transpose(1, 0, 2, 3))
    T = 0.5 * (T + T.transpose(0, 1, 3, 2))
    return 0.5 * (T + T.transpose(2, 3, 0, 1))


def d_tensors(db, raw, tensors, orth, dX, i):
    """d A_on / d theta_i and d B_on / d theta_i (orthonormal basis)."""
    X = orth.X
    Q = _pick(db, raw, i, "A")
    dA_raw = Q + Q.T
    dA = dX.T @ tensors.A @ X + X.T @ dA_raw @ X + X.T @ tensors.A @ dX
    G = _pick(db, raw, i, "B")
    dB_raw = G + G.transpose(1, 0, 2, 3) + G.transpose(2, 3, 0, 1) + G.transpose(3, 2, 0, 1)
    Xt, dXt = X.T, dX.T
    B = tensors.B
    dB = (contract4(dB_raw, Xt)
          + contract4(B, dXt, Xt, Xt, Xt) + contract4(B, Xt, dXt, Xt, Xt)
          + contract4(B, Xt, Xt, dXt, Xt) + contract4(B, Xt, Xt, Xt, dXt))
    return dA, dB


@dataclass(frozen=True, eq=False)
class GradientReport:
    """dE0/dtheta over the free variables (``theta_ids``) and the full-length vector."""
    dE_dtheta: np.ndarray
    full: np.ndarray
    theta_ids: tuple
    derivative_basis: DerivativeBasis
    parts: dict = field(default_factory=dict)


def energy_gradient(basis, field, scf, graph=None, tensors=None, keep_parts=False):
    """Analytic dE0/dtheta for every free graph variable."""
    graph = basis.graph if graph is None else graph
    if not scf.converged:
        raise GradientError("energy gradient needs a converged SCF")
    if scf.D.shape != (basis.W, basis.W):
        raise GradientError("SCF result does not match the basis size")
    tensors = build_tensors(basis, field) if tensors is None else tensors
    db = build_derivative_basis(basis, graph)
    raw = raw_derivatives(db, field)
    orth = scf.orth
    gA, gB = grad_wrt_tensors(scf)
    full = np.zeros(graph.n_theta)
    parts = {}
    for i in db.free:
        dS = d_overlap(db, raw, i)
        dX = d_orthogonalizer(orth, dS)
        dA, dB = d_tensors(db, raw, tensors, orth, dX, i)
        full[i] = np.sum(gA * dA) + np.sum(gB * dB)
        if keep_parts:
            parts[graph.thetas[i].id] = {"dS": dS, "dX": dX, "dA": dA, "dB": dB}
    if keep_parts:
        parts["gradA"], parts["gradB"] = gA, gB
    ids = tuple(graph.thetas[i].id for i in db.free)
    return GradientReport(full[db.free], full, ids, db, parts)


def fock_gradient(basis, field, scf, graph=None):
    """Same gradient through the energy-weighted density (independent route for checks).

    dE/dtheta = 4 sum D*F_psi - 4 sum (D F D)*<psi|phi>.
    """
    graph = basis.graph if graph is None else graph
    tensors = build_tensors(basis, field)
    db = build_derivative_basis(basis, graph)
    raw = raw_derivatives(db, field)
    D = scf.D
    F = fock(D, tensors.A, tensors.B)
    Wd = D @ F @ D
    full = np.zeros(graph.n_theta)
    for i in db.free:
        P = _pick(db, raw, i, "S")
        Q = _pick(db, raw, i, "A")
        G = _pick(db, raw, i, "B")
        J = np.tensordot(G, D, axes=([2, 3], [0, 1]))
        K = np.tensordot(G, D, axes=([1, 3], [0, 1]))
        full[i] = 4.0 * np.sum(D * (Q + 2.0 * J - K)) - 4.0 * np.sum(Wd * P)
    return full


# ------------------------------------------------------------ evaluation helpers


SCF_CONV = 1e-9
SCF_COMM_TOL = 1e-9


def energy_and_gradient(basis, field, n_elec, theta=None, conv=SCF_CONV, comm_tol=SCF_COMM_TOL,
                        max_iter=200):
    """(E0, GradientReport, ScfResult) at ``theta`` (full-length vector)."""
    b = basis if theta is None else basis.at(theta)
    tensors = build_tensors(b, field)
    res = rhf(tensors, field, n_elec, conv=conv, comm_tol=comm_tol, max_iter=max_iter)
    if not res.converged:
        return res.E0, None, res
    return res.E0, energy_gradient(b, field, res, tensors=tensors), res


def scf_energy(basis, field, n_elec, theta=None, conv=SCF_CONV, comm_tol=SCF_COMM_TOL):
    b = basis if theta is None else basis.at(theta)
    res = rhf(build_tensors(b, field), field, n_elec, conv=conv, comm_tol=comm_tol)
    if not res.converged:
        raise GradientError("SCF did not converge at a displaced point")
    return res.E0


@dataclass(frozen=True)
class GradcheckRow:
    theta_id: str
    analytic: float
    numeric: float

    @property
    def abs_err(self):
        return abs(self.analytic - self.numeric)

    @property
    def rel_err(self):
        scale = max(abs(self.numeric), abs(self.analytic))
        return self.abs_err / scale if scale > 1e-8 else self.abs_err


def gradcheck(basis, field, n_elec, h=1e-5, conv=1e-12, comm_tol=1e-10):
    """Analytic gradient against central differences of converged SCF energies."""
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    theta = basis.graph.theta_values()
    free = np.flatnonzero(basis.graph.free_mask())
    if len(free) == 0:
        return []
    E0, rep, res = energy_and_gradient(basis, field, n_elec, conv=conv, comm_tol=comm_tol)
    if rep is None:
        raise GradientError("SCF did not converge at the reference point")
    rows = []
    for i in free:
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fd = (scf_energy(basis, field, n_elec, tp, conv, comm_tol)
              - scf_energy(basis, field, n_elec, tm, conv, comm_tol)) / (2 * h)
        rows.append(GradcheckRow(basis.graph.thetas[i].id, float(rep.full[i]), float(fd)))
    return rows


def format_gradcheck(rows):
    width = max([len("theta")] + [len(r.theta_id) for r in rows])
    lines = [f"{'theta':<{width}}  {'analytic':>18}  {'finite-diff':>18}  {'abs err':>10}  {'rel err':>10}"]
    for r in rows:
        lines.append(f"{r.theta_id:<{width}}  {r.analytic:>18.10e}  {r.numeric:>18.10e}  "
                     f"{r.abs_err:>10.3e}  {r.rel_err:>10.3e}")
    return "\n".join(lines)


__all__ = [
    "DerivativeBasis", "GradcheckRow", "GradientError", "GradientReport", "build_derivative_basis",
    "d_orthogonalizer", "d_overlap", "d_phi_d_param", "d_tensors", "energy_and_gradient",
    "energy_gradient", "expansion_to_mcgto", "fock_gradient", "format_gradcheck", "grad_wrt_tensors",
    "gradcheck", "merge_expansion", "raw_derivatives", "scf_energy",
]
