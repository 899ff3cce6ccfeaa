# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled primitive integral kernels (McMurchie-Davidson).

Same public surface as ``_pykernels``. Primitives are unnormalized Cartesian
Gaussians given as ``(alpha, center, ang)`` arrays.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange, parallel
from libc.math cimport exp, sqrt, erf, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"

cdef enum:
    LMAX_DIM = 8           # per-direction angular momentum of one primitive
    EJ = LMAX_DIM + 3      # j may be raised by 2 in the kinetic integral
    ES = 2 * LMAX_DIM + 6
    LPAIR = 2 * LMAX_DIM + 1
    BOYS_MMAX = 48
    BOYS_NGRID = 801
    TAYLOR = 8

cdef double BOYS_H = 0.05
cdef double _BOYS_SWITCH = 40.0
cdef double _PAIR_SCREEN = 1e-14
BOYS_SWITCH = _BOYS_SWITCH
PAIR_SCREEN = _PAIR_SCREEN
MAX_L = 4 * LMAX_DIM

cdef double _table[BOYS_NGRID][BOYS_MMAX + 1]
cdef double _inv_fact[TAYLOR]


cdef double _boys_series(int m, double x) nogil:
    cdef double term = 1.0 / (2 * m + 1)
    cdef double total = term
    cdef int k = 0
    while True:
        k += 1
        term *= 2.0 * x / (2 * m + 2 * k + 1)
        total += term
        if term < 1e-17 * total:
            break
    return exp(-x) * total


cdef void _init_table():
    cdef int g, m
    cdef double x, ex
    for g in range(BOYS_NGRID):
        x = g * BOYS_H
        ex = exp(-x)
        _table[g][BOYS_MMAX] = _boys_series(BOYS_MMAX, x)
        for m in range(BOYS_MMAX, 0, -1):
            _table[g][m - 1] = (2.0 * x * _table[g][m] + ex) / (2 * m - 1)
    _inv_fact[0] = 1.0
    for m in range(1, TAYLOR):
        _inv_fact[m] = _inv_fact[m - 1] / m


_init_table()


cdef void boys_fill(int L, double x, double *F) nogil:
    """F[0..L] = F_m(x); requires L + TAYLOR - 1 <= BOYS_MMAX."""
    cdef int g, k, m
    cdef double d, dk, acc, ex
    ex = exp(-x)
    if x < _BOYS_SWITCH:
        g = <int>(x / BOYS_H + 0.5)
        d = g * BOYS_H - x
        acc = 0.0
        dk = 1.0
        for k in range(TAYLOR):
            acc += _table[g][L + k] * dk * _inv_fact[k]
            dk *= d
        F[L] = acc
        for m in range(L, 0, -1):
            F[m - 1] = (2.0 * x * F[m] + ex) / (2 * m - 1)
    else:
        F[0] = 0.5 * sqrt(M_PI / x) * erf(sqrt(x))
        for m in range(L):
            F[m + 1] = ((2 * m + 1) * F[m] - ex) / (2.0 * x)


def boys_array(int mmax, double x):
    if mmax + TAYLOR - 1 > BOYS_MMAX:
        raise ValueError(f"Boys order {mmax} exceeds table limit {BOYS_MMAX - TAYLOR + 1}")
    out = np.empty(mmax + 1)
    cdef double[::1] o = out
    boys_fill(mmax, x, &o[0])
    return out


cdef inline int eidx(int i, int j, int t) nogil:
    return (i * EJ + j) * ES + t


cdef void etable(int la, int lb, double a, double b, double ab, double *E) nogil:
    cdef double p = a + b
    cdef double xpa = -b * ab / p
    cdef double xpb = a * ab / p
    cdef double oo2p = 0.5 / p
    cdef int i, j, t, src
    cdef double x, v
    E[eidx(0, 0, 0)] = exp(-a * b / p * ab * ab)
    E[eidx(0, 0, 1)] = 0.0
    for i in range(la + 1):
        for j in range(lb + 1):
            if i == 0 and j == 0:
                continue
            if i > 0:
                src = eidx(i - 1, j, 0)
                x = xpa
            else:
                src = eidx(i, j - 1, 0)
                x = xpb
            for t in range(i + j + 1):
                v = x * E[src + t]
                if t + 1 <= i + j - 1:
                    v = v + (t + 1) * E[src + t + 1]
                if t > 0:
                    v = v + oo2p * E[src + t - 1]
                E[eidx(i, j, t)] = v
            E[eidx(i, j, i + j + 1)] = 0.0


cdef struct PairData:
    double p
    double P[3]
    double K
    int l[3]
    double E[3][LPAIR + 1]


cdef void make_pair(double a, double *A, int *la, double b, double *B, int *lb,
                    PairData *out, double *Ebuf) nogil:
    cdef int d, t
    cdef double p = a + b
    cdef double r2 = 0.0
    out.p = p
    for d in range(3):
        out.P[d] = (a * A[d] + b * B[d]) / p
        r2 += (A[d] - B[d]) * (A[d] - B[d])
        out.l[d] = la[d] + lb[d]
        etable(la[d], lb[d], a, b, A[d] - B[d], Ebuf)
        for t in range(la[d] + lb[d] + 1):
            out.E[d][t] = Ebuf[eidx(la[d], lb[d], t)]
    out.K = exp(-a * b / p * r2)


cdef inline int ridx(int n, int t, int u, int v, int L1) nogil:
    return ((n * L1 + t) * L1 + u) * L1 + v


cdef void rtable(int L, double p, double X, double Y, double Z, double *W) nogil:
    """Fill W with R^n_{tuv}; the n = 0 layer is W[ridx(0, t, u, v)]."""
    cdef double F[BOYS_MMAX + 1]
    cdef int L1 = L + 1
    cdef int n, s, t, u, v
    cdef double fac = 1.0
    cdef double val
    boys_fill(L, p * (X * X + Y * Y + Z * Z), F)
    for n in range(L + 1):
        W[ridx(n, 0, 0, 0, L1)] = fac * F[n]
        fac *= -2.0 * p
    for s in range(1, L + 1):
        for t in range(s + 1):
            for u in range(s - t + 1):
                v = s - t - u
                for n in range(L - s + 1):
                    if t > 0:
                        val = X * W[ridx(n + 1, t - 1, u, v, L1)]
                        if t > 1:
                            val = val + (t - 1) * W[ridx(n + 1, t - 2, u, v, L1)]
                    elif u > 0:
                        val = Y * W[ridx(n + 1, t, u - 1, v, L1)]
                        if u > 1:
                            val = val + (u - 1) * W[ridx(n + 1, t, u - 2, v, L1)]
                    else:
                        val = Z * W[ridx(n + 1, t, u, v - 1, L1)]
                        if v > 1:
                            val = val + (v - 1) * W[ridx(n + 1, t, u, v - 2, L1)]
                    W[ridx(n, t, u, v, L1)] = val


cdef double eri_pairs(PairData *ab, PairData *cd, double *W) nogil:
    cdef int L, L1, t, u, v, tau, nu, phi
    cdef double q, p, al, acc, inner, e1, sgn
    if ab.K < _PAIR_SCREEN or cd.K < _PAIR_SCREEN:
        return 0.0
    p = ab.p
    q = cd.p
    L = ab.l[0] + ab.l[1] + ab.l[2] + cd.l[0] + cd.l[1] + cd.l[2]
    L1 = L + 1
    al = p * q / (p + q)
    rtable(L, al, ab.P[0] - cd.P[0], ab.P[1] - cd.P[1], ab.P[2] - cd.P[2], W)
    acc = 0.0
    for t in range(ab.l[0] + 1):
        for u in range(ab.l[1] + 1):
            for v in range(ab.l[2] + 1):
                e1 = ab.E[0][t] * ab.E[1][u] * ab.E[2][v]
                if e1 == 0.0:
                    continue
                inner = 0.0
                for tau in range(cd.l[0] + 1):
                    for nu in range(cd.l[1] + 1):
                        for phi in range(cd.l[2] + 1):
                            sgn = -1.0 if (tau + nu + phi) & 1 else 1.0
                            inner = inner + sgn * cd.E[0][tau] * cd.E[1][nu] * cd.E[2][phi] * \
                                W[ridx(0, t + tau, u + nu, v + phi, L1)]
                acc = acc + e1 * inner
    return 2.0 * M_PI * M_PI * sqrt(M_PI) / (p * q * sqrt(p + q)) * acc


cdef double overlap_one(double a, double *A, int *la, double b, double *B, int *lb,
                        double *Ebuf) nogil:
    cdef double val = (M_PI / (a + b)) ** 1.5
    cdef int d
    for d in range(3):
        etable(la[d], lb[d], a, b, A[d] - B[d], Ebuf)
        val *= Ebuf[eidx(la[d], lb[d], 0)]
    return val


cdef double kinetic_one(double a, double *A, int *la, double b, double *B, int *lb,
                        double *Ebuf) nogil:
    cdef double s1[3]
    cdef double d2[3]
    cdef double s = sqrt(M_PI / (a + b))
    cdef double v
    cdef int d, i, j
    for d in range(3):
        i = la[d]
        j = lb[d]
        etable(i, j + 2, a, b, A[d] - B[d], Ebuf)
        s1[d] = Ebuf[eidx(i, j, 0)] * s
        v = -2.0 * b * (2 * j + 1) * Ebuf[eidx(i, j, 0)] + 4.0 * b * b * Ebuf[eidx(i, j + 2, 0)]
        if j >= 2:
            v = v + j * (j - 1) * Ebuf[eidx(i, j - 2, 0)]
        d2[d] = v * s
    return -0.5 * (d2[0] * s1[1] * s1[2] + s1[0] * d2[1] * s1[2] + s1[0] * s1[1] * d2[2])


cdef double nuclear_one(double a, double *A, int *la, double b, double *B, int *lb,
                        double[::1] charges, double[:, ::1] pos, double *Ebuf, double *W) nogil:
    cdef PairData pr
    cdef int c, t, u, v, L, L1
    cdef double acc, total = 0.0
    make_pair(a, A, la, b, B, lb, &pr, Ebuf)
    L = pr.l[0] + pr.l[1] + pr.l[2]
    L1 = L + 1
    for c in range(charges.shape[0]):
        rtable(L, pr.p, pr.P[0] - pos[c, 0], pr.P[1] - pos[c, 1], pr.P[2] - pos[c, 2], W)
        acc = 0.0
        for t in range(pr.l[0] + 1):
            for u in range(pr.l[1] + 1):
                for v in range(pr.l[2] + 1):
                    acc = acc + pr.E[0][t] * pr.E[1][u] * pr.E[2][v] * W[ridx(0, t, u, v, L1)]
        total = total - charges[c] * acc
    return 2.0 * M_PI / pr.p * total


def _prep(alpha, center, ang):
    a = np.ascontiguousarray(alpha, dtype=np.float64).reshape(-1)
    c = np.ascontiguousarray(center, dtype=np.float64).reshape(-1, 3)
    l = np.ascontiguousarray(ang, dtype=np.intc).reshape(-1, 3)
    if l.size and (l.min() < 0 or l.max() > LMAX_DIM):
        raise ValueError(f"angular momentum per direction must lie in [0, {LMAX_DIM}]")
    return a, c, l


cdef size_t _wsize(int L):
    return <size_t>(L + 1) * (L + 1) * (L + 1) * (L + 1)


def _check_L(int L):
    if L > BOYS_MMAX - TAYLOR + 1:
        raise ValueError(f"total angular momentum {L} exceeds kernel limit")


def overlap_matrix(pa, pb, int threads=1):
    a1, c1, l1 = _prep(*pa)
    a2, c2, l2 = _prep(*pb)
    cdef double[::1] aa = a1, ab = a2
    cdef double[:, ::1] ca = c1, cb = c2
    cdef int[:, ::1] la = l1, lb = l2
    cdef Py_ssize_t na = aa.shape[0], nb = ab.shape[0], i, j
    out = np.empty((na, nb))
    cdef double[:, ::1] o = out
    cdef double *Ebuf
    if na == 0 or nb == 0:
        return out
    with nogil, parallel(num_threads=threads):
        Ebuf = <double *> malloc(EJ * EJ * ES * sizeof(double))
        for i in prange(na, schedule='static'):
            for j in range(nb):
                o[i, j] = overlap_one(aa[i], &ca[i, 0], &la[i, 0], ab[j], &cb[j, 0], &lb[j, 0], Ebuf)
        free(Ebuf)
    return out


def kinetic_matrix(pa, pb, int threads=1):
    a1, c1, l1 = _prep(*pa)
    a2, c2, l2 = _prep(*pb)
    if l2.size and l2.max() > LMAX_DIM - 2:
        raise ValueError("kinetic integral needs two spare units of angular momentum")
    cdef double[::1] aa = a1, ab = a2
    cdef double[:, ::1] ca = c1, cb = c2
    cdef int[:, ::1] la = l1, lb = l2
    cdef Py_ssize_t na = aa.shape[0], nb = ab.shape[0], i, j
    out = np.empty((na, nb))
    cdef double[:, ::1] o = out
    cdef double *Ebuf
    if na == 0 or nb == 0:
        return out
    with nogil, parallel(num_threads=threads):
        Ebuf = <double *> malloc(EJ * EJ * ES * sizeof(double))
        for i in prange(na, schedule='static'):
            for j in range(nb):
                o[i, j] = kinetic_one(aa[i], &ca[i, 0], &la[i, 0], ab[j], &cb[j, 0], &lb[j, 0], Ebuf)
        free(Ebuf)
    return out


def nuclear_matrix(pa, pb, charges, positions, int threads=1):
    a1, c1, l1 = _prep(*pa)
    a2, c2, l2 = _prep(*pb)
    cdef double[::1] aa = a1, ab = a2
    cdef double[:, ::1] ca = c1, cb = c2
    cdef int[:, ::1] la = l1, lb = l2
    cdef double[::1] z = np.ascontiguousarray(charges, dtype=np.float64).reshape(-1)
    cdef double[:, ::1] pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
    cdef Py_ssize_t na = aa.shape[0], nb = ab.shape[0], i, j
    cdef int L = 0
    if na:
        L += int(l1.sum(axis=1).max())
    if nb:
        L += int(l2.sum(axis=1).max())
    _check_L(L)
    out = np.empty((na, nb))
    cdef double[:, ::1] o = out
    cdef double *Ebuf
    cdef double *W
    cdef size_t wsz = _wsize(L)
    if na == 0 or nb == 0:
        return out
    with nogil, parallel(num_threads=threads):
        Ebuf = <double *> malloc(EJ * EJ * ES * sizeof(double))
        W = <double *> malloc(wsz * sizeof(double))
        for i in prange(na, schedule='static'):
            for j in range(nb):
                o[i, j] = nuclear_one(aa[i], &ca[i, 0], &la[i, 0], ab[j], &cb[j, 0], &lb[j, 0],
                                      z, pos, Ebuf, W)
        free(W)
        free(Ebuf)
    return out


cdef PairData *_pairs_lower(double[::1] al, double[:, ::1] ce, int[:, ::1] an):
    """Pairs (i, j) with j <= i, stored at index i*(i+1)/2 + j."""
    cdef Py_ssize_t n = al.shape[0], i, j
    cdef PairData *pairs = <PairData *> malloc(max(1, n * (n + 1) // 2) * sizeof(PairData))
    cdef double *Ebuf = <double *> malloc(EJ * EJ * ES * sizeof(double))
    for i in range(n):
        for j in range(i + 1):
            make_pair(al[i], &ce[i, 0], &an[i, 0], al[j], &ce[j, 0], &an[j, 0],
                      &pairs[i * (i + 1) // 2 + j], Ebuf)
    free(Ebuf)
    return pairs


def eri_tensor(prims, int threads=1):
    """Full (n, n, n, n) ERI tensor; each unique element computed by one worker."""
    a1, c1, l1 = _prep(*prims)
    cdef double[::1] al = a1
    cdef double[:, ::1] ce = c1
    cdef int[:, ::1] an = l1
    cdef Py_ssize_t n = al.shape[0]
    cdef Py_ssize_t npair = n * (n + 1) // 2
    cdef int L = 4 * int(l1.sum(axis=1).max()) if n else 0
    _check_L(L)
    out = np.empty((n, n, n, n))
    if n == 0:
        return out
    cdef double[:, :, :, ::1] o = out
    cdef PairData *pairs = _pairs_lower(al, ce, an)
    cdef int[::1] pi = np.empty(npair, dtype=np.intc), pj = np.empty(npair, dtype=np.intc)
    cdef Py_ssize_t i, j, k, l, x, y
    cdef double v
    cdef double *W
    cdef size_t wsz = _wsize(L)
    x = 0
    for i in range(n):
        for j in range(i + 1):
            pi[x] = i
            pj[x] = j
            x += 1
    with nogil, parallel(num_threads=threads):
        W = <double *> malloc(wsz * sizeof(double))
        for x in prange(npair, schedule='dynamic'):
            i = pi[x]
            j = pj[x]
            for y in range(x + 1):
                k = pi[y]
                l = pj[y]
                v = eri_pairs(&pairs[x], &pairs[y], W)
                o[i, j, k, l] = v
                o[j, i, k, l] = v
                o[i, j, l, k] = v
                o[j, i, l, k] = v
                o[k, l, i, j] = v
                o[l, k, i, j] = v
                o[k, l, j, i] = v
                o[l, k, j, i] = v
        free(W)
    free(pairs)
    return out


cdef struct GroupPair:
    double p
    double P[3]
    double K
    double E[3][LMAX_DIM + 1][LPAIR + 1]


cdef void make_group_pair(double a, double *A, int *lmax, double b, double *B, int *lb,
                          GroupPair *out, double *Ebuf) nogil:
    """E coefficients for every bra row i <= lmax[d] against a fixed ket ``lb``."""
    cdef int d, i, t
    cdef double p = a + b
    cdef double r2 = 0.0
    out.p = p
    for d in range(3):
        out.P[d] = (a * A[d] + b * B[d]) / p
        r2 += (A[d] - B[d]) * (A[d] - B[d])
        etable(lmax[d], lb[d], a, b, A[d] - B[d], Ebuf)
        for i in range(lmax[d] + 1):
            for t in range(i + lb[d] + 1):
                out.E[d][i][t] = Ebuf[eidx(i, lb[d], t)]
    out.K = exp(-a * b / p * r2)


cdef double group_contract(GroupPair *ab, int *la, int *lb, PairData *cd, double *W, int L1) nogil:
    cdef int t, u, v, tau, nu, phi
    cdef int lx = la[0] + lb[0], ly = la[1] + lb[1], lz = la[2] + lb[2]
    cdef double acc = 0.0, inner, e1, sgn
    for t in range(lx + 1):
        for u in range(ly + 1):
            for v in range(lz + 1):
                e1 = ab.E[0][la[0]][t] * ab.E[1][la[1]][u] * ab.E[2][la[2]][v]
                if e1 == 0.0:
                    continue
                inner = 0.0
                for tau in range(cd.l[0] + 1):
                    for nu in range(cd.l[1] + 1):
                        for phi in range(cd.l[2] + 1):
                            sgn = -1.0 if (tau + nu + phi) & 1 else 1.0
                            inner = inner + sgn * cd.E[0][tau] * cd.E[1][nu] * cd.E[2][phi] * \
                                W[ridx(0, t + tau, u + nu, v + phi, L1)]
                acc = acc + e1 * inner
    return acc


def eri_block(pa, prims, int threads=1):
    """(a b|c d) for a in ``pa`` and b, c, d in ``prims``; shape (na, n, n, n).

    Rows of ``pa`` sharing exponent and center are evaluated together so the
    Hermite Coulomb table is built once per group and ket pair.
    """
    a1, c1, l1 = _prep(*pa)
    a2, c2, l2 = _prep(*prims)
    cdef Py_ssize_t na = a1.shape[0], n = a2.shape[0]
    out = np.empty((na, n, n, n))
    if na == 0 or n == 0:
        return out
    _check_L(int(l1.sum(axis=1).max()) + 3 * int(l2.sum(axis=1).max()))
    uniq, inv = np.unique(np.column_stack([a1, c1]), axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    order = np.argsort(inv, kind="stable").astype(np.intc)
    bounds = np.concatenate([[0], np.cumsum(np.bincount(inv, minlength=len(uniq)))]).astype(np.intc)
    mang = np.ascontiguousarray(l1[order], dtype=np.intc)
    glmax = np.zeros((len(uniq), 3), dtype=np.intc)
    gltot = np.zeros(len(uniq), dtype=np.intc)
    np.maximum.at(glmax, inv, l1)
    np.maximum.at(gltot, inv, l1.sum(axis=1).astype(np.intc))
    cdef double[::1] ga = np.ascontiguousarray(uniq[:, 0])
    cdef double[:, ::1] gc = np.ascontiguousarray(uniq[:, 1:])
    cdef int[:, ::1] gl = glmax, ma = mang
    cdef int[::1] gt = gltot, mem = order, gb = bounds
    cdef double[::1] al = a2
    cdef double[:, ::1] ce = c2
    cdef int[:, ::1] an = l2
    cdef Py_ssize_t ng = ga.shape[0]
    cdef double[:, :, :, ::1] o = out
    cdef PairData *cd = _pairs_lower(al, ce, an)
    cdef Py_ssize_t g, j, k, l, y, mi, m
    cdef int L, L1
    cdef double v, pref, q, p
    cdef double *W
    cdef double *Ebuf
    cdef GroupPair *ab
    cdef size_t wsz = _wsize(int(gltot.max()) + 3 * int(l2.sum(axis=1).max()))
    with nogil, parallel(num_threads=threads):
        W = <double *> malloc(wsz * sizeof(double))
        Ebuf = <double *> malloc(EJ * EJ * ES * sizeof(double))
        ab = <GroupPair *> malloc(sizeof(GroupPair))
        for g in prange(ng, schedule='dynamic'):
            for j in range(n):
                make_group_pair(ga[g], &gc[g, 0], &gl[g, 0], al[j], &ce[j, 0], &an[j, 0], ab, Ebuf)
                y = 0
                for k in range(n):
                    for l in range(k + 1):
                        if ab.K < _PAIR_SCREEN or cd[y].K < _PAIR_SCREEN:
                            for mi in range(gb[g], gb[g + 1]):
                                m = mem[mi]
                                o[m, j, k, l] = 0.0
                                o[m, j, l, k] = 0.0
                            y = y + 1
                            continue
                        p = ab.p
                        q = cd[y].p
                        L = gt[g] + an[j, 0] + an[j, 1] + an[j, 2] + cd[y].l[0] + cd[y].l[1] + cd[y].l[2]
                        L1 = L + 1
                        rtable(L, p * q / (p + q), ab.P[0] - cd[y].P[0], ab.P[1] - cd[y].P[1],
                               ab.P[2] - cd[y].P[2], W)
                        pref = 2.0 * M_PI * M_PI * sqrt(M_PI) / (p * q * sqrt(p + q))
                        for mi in range(gb[g], gb[g + 1]):
                            m = mem[mi]
                            v = pref * group_contract(ab, &ma[mi, 0], &an[j, 0], &cd[y], W, L1)
                            o[m, j, k, l] = v
                            o[m, j, l, k] = v
                        y = y + 1
        free(ab)
        free(Ebuf)
        free(W)
    free(cd)
    return out


def overlap_prim(a, A, la, b, B, lb):
    return float(overlap_matrix(([a], [A], [la]), ([b], [B], [lb]))[0, 0])


def kinetic_prim(a, A, la, b, B, lb):
    return float(kinetic_matrix(([a], [A], [la]), ([b], [B], [lb]))[0, 0])


def nuclear_prim(a, A, la, b, B, lb, charges, positions):
    return float(nuclear_matrix(([a], [A], [la]), ([b], [B], [lb]), charges, positions)[0, 0])


def eri_prim(a, A, la, b, B, lb, c, C, lc, d, D, ld):
    return float(eri_block(([a], [A], [la]), ([b, c, d], [B, C, D], [lb, lc, ld]))[0, 0, 1, 2])
