"""Pure-Python primitive integral kernels (McMurchie-Davidson).

This is the fallback backend. It mirrors the compiled ``_ckernels`` module
function for function; ``gbsopt.integrals.kernels`` picks one at import.

Primitive sets are passed as ``(alpha, center, ang)`` with shapes ``(n,)``,
``(n, 3)`` and ``(n, 3)``. All primitives are *unnormalized*:
``(x-X)^i (y-Y)^j (z-Z)^k exp(-alpha |r-R|^2)``.
"""
import math

import numpy as np

BACKEND = "python"

# Boys series is used below this argument, upward recursion from erf above.
BOYS_SWITCH = 40.0
PAIR_SCREEN = 1e-14

_TWO_PI_2_5 = 2.0 * math.pi ** 2.5


def boys_array(mmax, x):
    """Return ``[F_0(x), ..., F_mmax(x)]``."""
    out = np.empty(mmax + 1)
    if x < BOYS_SWITCH:
        # series for the top order, then downward recursion (stable)
        m = mmax
        term = 1.0 / (2 * m + 1)
        total = term
        k = 0
        while True:
            k += 1
            term *= 2.0 * x / (2 * m + 2 * k + 1)
            total += term
            if term < 1e-17 * total:
                break
        ex = math.exp(-x)
        out[mmax] = ex * total
        for m in range(mmax, 0, -1):
            out[m - 1] = (2.0 * x * out[m] + ex) / (2 * m - 1)
    else:
        ex = math.exp(-x)
        out[0] = 0.5 * math.sqrt(math.pi / x) * math.erf(math.sqrt(x))
        for m in range(mmax):
            out[m + 1] = ((2 * m + 1) * out[m] - ex) / (2.0 * x)
    return out


def _etable(la, lb, a, b, ab):
    """Hermite expansion coefficients E[i, j, t] for one Cartesian direction."""
    p = a + b
    xpa = -b * ab / p
    xpb = a * ab / p
    oo2p = 0.5 / p
    E = np.zeros((la + 1, lb + 1, la + lb + 2))
    E[0, 0, 0] = math.exp(-a * b / p * ab * ab)
    for i in range(la + 1):
        for j in range(lb + 1):
            if i == 0 and j == 0:
                continue
            if i > 0:
                src, x, ii, jj = E[i - 1, j], xpa, i - 1, j
            else:
                src, x, ii, jj = E[i, j - 1], xpb, i, j - 1
            for t in range(i + j + 1):
                v = x * src[t] + (t + 1) * src[t + 1]
                if t > 0:
                    v += oo2p * src[t - 1]
                E[i, j, t] = v
    return E


def _rtable(L, p, X, Y, Z):
    """Hermite Coulomb integrals R[t, u, v] (order n = 0) for t+u+v <= L."""
    F = boys_array(L, p * (X * X + Y * Y + Z * Z))
    R = np.zeros((L + 1, L + 1, L + 1, L + 1))
    m2p = -2.0 * p
    fac = 1.0
    for n in range(L + 1):
        R[n, 0, 0, 0] = fac * F[n]
        fac *= m2p
    for s in range(1, L + 1):
        for t in range(s + 1):
            for u in range(s - t + 1):
                v = s - t - u
                for n in range(L - s + 1):
                    if t > 0:
                        val = X * R[n + 1, t - 1, u, v]
                        if t > 1:
                            val += (t - 1) * R[n + 1, t - 2, u, v]
                    elif u > 0:
                        val = Y * R[n + 1, t, u - 1, v]
                        if u > 1:
                            val += (u - 1) * R[n + 1, t, u - 2, v]
                    else:
                        val = Z * R[n + 1, t, u, v - 1]
                        if v > 1:
                            val += (v - 1) * R[n + 1, t, u, v - 2]
                    R[n, t, u, v] = val
    return R[0]


def _as_sets(*sets):
    out = []
    for alpha, center, ang in sets:
        out.append((np.asarray(alpha, float), np.asarray(center, float).reshape(-1, 3),
                    np.asarray(ang, int).reshape(-1, 3)))
    return out


def overlap_prim(a, A, la, b, B, lb):
    p = a + b
    val = (math.pi / p) ** 1.5
    for d in range(3):
        val *= _etable(la[d], lb[d], a, b, A[d] - B[d])[la[d], lb[d], 0]
    return val


def kinetic_prim(a, A, la, b, B, lb):
    p = a + b
    s1 = []
    d2 = []
    for d in range(3):
        i, j = la[d], lb[d]
        E = _etable(i, j + 2, a, b, A[d] - B[d])
        s = math.sqrt(math.pi / p)
        s1.append(E[i, j, 0] * s)
        v = -2.0 * b * (2 * j + 1) * E[i, j, 0] + 4.0 * b * b * E[i, j + 2, 0]
        if j >= 2:
            v += j * (j - 1) * E[i, j - 2, 0]
        d2.append(v * s)
    return -0.5 * (d2[0] * s1[1] * s1[2] + s1[0] * d2[1] * s1[2] + s1[0] * s1[1] * d2[2])


def nuclear_prim(a, A, la, b, B, lb, charges, positions):
    p = a + b
    P = (a * np.asarray(A) + b * np.asarray(B)) / p
    Ex = _etable(la[0], lb[0], a, b, A[0] - B[0])[la[0], lb[0]]
    Ey = _etable(la[1], lb[1], a, b, A[1] - B[1])[la[1], lb[1]]
    Ez = _etable(la[2], lb[2], a, b, A[2] - B[2])[la[2], lb[2]]
    L = sum(la) + sum(lb)
    total = 0.0
    for Zc, C in zip(charges, positions):
        R = _rtable(L, p, P[0] - C[0], P[1] - C[1], P[2] - C[2])
        acc = 0.0
        for t in range(la[0] + lb[0] + 1):
            for u in range(la[1] + lb[1] + 1):
                for v in range(la[2] + lb[2] + 1):
                    acc += Ex[t] * Ey[u] * Ez[v] * R[t, u, v]
        total -= Zc * acc
    return 2.0 * math.pi / p * total


def _pair(a, A, la, b, B, lb):
    p = a + b
    P = (a * np.asarray(A, float) + b * np.asarray(B, float)) / p
    Es = [_etable(la[d], lb[d], a, b, A[d] - B[d])[la[d], lb[d], : la[d] + lb[d] + 1]
          for d in range(3)]
    K = math.exp(-a * b / p * sum((A[d] - B[d]) ** 2 for d in range(3)))
    return p, P, Es, K


def _eri_pairs(pab, pcd):
    p, P, Eab, Kab = pab
    q, Q, Ecd, Kcd = pcd
    if Kab < PAIR_SCREEN or Kcd < PAIR_SCREEN:
        return 0.0
    lab = [len(e) - 1 for e in Eab]
    lcd = [len(e) - 1 for e in Ecd]
    L = sum(lab) + sum(lcd)
    al = p * q / (p + q)
    R = _rtable(L, al, P[0] - Q[0], P[1] - Q[1], P[2] - Q[2])
    acc = 0.0
    for t in range(lab[0] + 1):
        for u in range(lab[1] + 1):
            for v in range(lab[2] + 1):
                e1 = Eab[0][t] * Eab[1][u] * Eab[2][v]
                if e1 == 0.0:
                    continue
                inner = 0.0
                for tau in range(lcd[0] + 1):
                    for nu in range(lcd[1] + 1):
                        for phi in range(lcd[2] + 1):
                            sgn = -1.0 if (tau + nu + phi) & 1 else 1.0
                            inner += sgn * Ecd[0][tau] * Ecd[1][nu] * Ecd[2][phi] * R[t + tau, u + nu, v + phi]
                acc += e1 * inner
    return _TWO_PI_2_5 / (p * q * math.sqrt(p + q)) * acc


def eri_prim(a, A, la, b, B, lb, c, C, lc, d, D, ld):
    return _eri_pairs(_pair(a, A, la, b, B, lb), _pair(c, C, lc, d, D, ld))


def overlap_matrix(pa, pb, threads=1):
    (aa, ca, la), (ab, cb, lb) = _as_sets(pa, pb)
    out = np.empty((len(aa), len(ab)))
    for i in range(len(aa)):
        for j in range(len(ab)):
            out[i, j] = overlap_prim(aa[i], ca[i], la[i], ab[j], cb[j], lb[j])
    return out


def kinetic_matrix(pa, pb, threads=1):
    (aa, ca, la), (ab, cb, lb) = _as_sets(pa, pb)
    out = np.empty((len(aa), len(ab)))
    for i in range(len(aa)):
        for j in range(len(ab)):
            out[i, j] = kinetic_prim(aa[i], ca[i], la[i], ab[j], cb[j], lb[j])
    return out


def nuclear_matrix(pa, pb, charges, positions, threads=1):
    (aa, ca, la), (ab, cb, lb) = _as_sets(pa, pb)
    positions = np.asarray(positions, float).reshape(-1, 3)
    out = np.empty((len(aa), len(ab)))
    for i in range(len(aa)):
        for j in range(len(ab)):
            out[i, j] = nuclear_prim(aa[i], ca[i], la[i], ab[j], cb[j], lb[j], charges, positions)
    return out


def eri_tensor(prims, threads=1):
    """Full ``(n, n, n, n)`` primitive ERI tensor, each unique element computed once."""
    ((al, ce, an),) = _as_sets(prims)
    n = len(al)
    pairs = {}
    for i in range(n):
        for j in range(i + 1):
            pairs[i, j] = _pair(al[i], ce[i], an[i], al[j], ce[j], an[j])
    out = np.empty((n, n, n, n))
    keys = list(pairs)
    for x, (i, j) in enumerate(keys):
        for (k, l) in keys[: x + 1]:
            v = _eri_pairs(pairs[i, j], pairs[k, l])
            for (m, n_, o, q) in ((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k)):
                out[m, n_, o, q] = v
                out[o, q, m, n_] = v
    return out


def eri_block(pa, prims, threads=1):
    """``(a b|c d)`` for ``a`` in ``pa`` and ``b, c, d`` in ``prims``."""
    (aa, ca, la), (al, ce, an) = _as_sets(pa, prims)
    n = len(al)
    cd = {}
    for k in range(n):
        for l in range(k + 1):
            cd[k, l] = _pair(al[k], ce[k], an[k], al[l], ce[l], an[l])
    out = np.empty((len(aa), n, n, n))
    for i in range(len(aa)):
        for j in range(n):
            pab = _pair(aa[i], ca[i], la[i], al[j], ce[j], an[j])
            for (k, l), pcd in cd.items():
                v = _eri_pairs(pab, pcd)
                out[i, j, k, l] = v
                out[i, j, l, k] = v
    return out
