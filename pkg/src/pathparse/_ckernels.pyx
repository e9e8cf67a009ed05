# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors ``_pykernels`` operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos as c_cos, exp, fabs, floor, M_PI
from libc.stdlib cimport malloc, free, calloc

BACKEND = "cython"

cdef double TWO_PI = 2.0 * M_PI


cdef inline void _neumaier_add(double* s, double* c, double x) noexcept nogil:
    cdef double t = s[0] + x
    if fabs(s[0]) >= fabs(x):
        c[0] += (s[0] - t) + x
    else:
        c[0] += (x - t) + s[0]
    s[0] = t


def neumaier_sum(values):
    cdef const double[:] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef double s = 0.0, c = 0.0
    cdef Py_ssize_t i
    for i in range(v.shape[0]):
        _neumaier_add(&s, &c, v[i])
    return s + c


def phase_sums(cos, sin):
    return neumaier_sum(cos), neumaier_sum(sin)


cdef void _block_sums(const double[:] cs, const double[:] sn, const long[:] labels,
                      int nblocks, double* X, double* Y, double* work) noexcept nogil:
    # work holds 4*nblocks doubles: sx, cx, sy, cy
    cdef int b
    cdef Py_ssize_t i
    for b in range(4 * nblocks):
        work[b] = 0.0
    for i in range(labels.shape[0]):
        b = <int>labels[i]
        _neumaier_add(&work[b], &work[nblocks + b], cs[i])
        _neumaier_add(&work[2 * nblocks + b], &work[3 * nblocks + b], sn[i])
    for b in range(nblocks):
        X[b] = work[b] + work[nblocks + b]
        Y[b] = work[2 * nblocks + b] + work[3 * nblocks + b]


cdef double _worst(double* X, double* Y, int nb, double C, double D, double eps_x,
                   bint relaxed) noexcept nogil:
    cdef double f = 0.0, worst = 0.0, r, total = C * C + D * D, lim
    cdef int b
    for b in range(nb):
        f += X[b] * X[b] + Y[b] * Y[b]
    if relaxed:
        return fabs(total - f)
    lim = 1e-8 * total
    if eps_x > lim:
        lim = eps_x
    if fabs(total - f) > lim:
        return 1.0 / 0.0
    for b in range(nb):
        r = X[b] * (C - X[b]) + Y[b] * (D - Y[b])
        if fabs(r) > worst:
            worst = fabs(r)
    return worst


def block_sums(cos, sin, labels, nblocks):
    cdef const double[:] cs = np.ascontiguousarray(cos, dtype=np.float64)
    cdef const double[:] sn = np.ascontiguousarray(sin, dtype=np.float64)
    cdef const long[:] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef int nb = nblocks
    X = np.zeros(nb)
    Y = np.zeros(nb)
    cdef double[:] xv = X
    cdef double[:] yv = Y
    cdef double* work = <double*>malloc(4 * max(nb, 1) * sizeof(double))
    try:
        if nb > 0:
            _block_sums(cs, sn, lab, nb, &xv[0], &yv[0], work)
    finally:
        free(work)
    return X, Y


def direct_pair_sum(phases):
    cdef const double[:] th = np.ascontiguousarray(phases, dtype=np.float64)
    cdef Py_ssize_t n = th.shape[0], a, b
    cdef double s = 0.0, c = 0.0
    with nogil:
        for a in range(n):
            for b in range(n):
                _neumaier_add(&s, &c, c_cos(th[a] - th[b]))
    return s + c


def scan_partitions(cos, sin, double C, double D, double eps_x, bint relaxed):
    cdef const double[:] cs = np.ascontiguousarray(cos, dtype=np.float64)
    cdef const double[:] sn = np.ascontiguousarray(sin, dtype=np.float64)
    cdef Py_ssize_t n = cs.shape[0]
    a_arr = np.zeros(n, dtype=np.int64)
    cdef long[:] a = a_arr
    cdef long* pm = <long*>calloc(n, sizeof(long))
    cdef double* X = <double*>malloc(n * sizeof(double))
    cdef double* Y = <double*>malloc(n * sizeof(double))
    cdef double* work = <double*>malloc(4 * n * sizeof(double))
    cdef Py_ssize_t cap = 64, count = 0, scanned = 0, i, j
    out = np.empty((cap, n), dtype=np.int64)
    cdef long[:, :] ov = out
    try:
        while True:
            scanned += 1
            _block_sums(cs, sn, a, pm[n - 1] + 1, X, Y, work)
            if _worst(X, Y, pm[n - 1] + 1, C, D, eps_x, relaxed) <= eps_x:
                if count == cap:
                    cap *= 2
                    grown = np.empty((cap, n), dtype=np.int64)
                    grown[:count] = out[:count]
                    out = grown
                    ov = out
                for j in range(n):
                    ov[count, j] = a[j]
                count += 1
            i = n - 1
            while i >= 1 and a[i] > pm[i - 1]:
                i -= 1
            if i < 1:
                break
            a[i] += 1
            pm[i] = pm[i - 1] if pm[i - 1] > a[i] else a[i]
            for j in range(i + 1, n):
                a[j] = 0
                pm[j] = pm[i]
    finally:
        free(pm)
        free(X)
        free(Y)
        free(work)
    return out[:count].copy(), scanned


cdef void _energy(double* X, double* Y, long* size, int n, double C, double D,
                  double weight, bint relaxed, double* E, int* k, double* worst) noexcept nogil:
    cdef int b, kk = 0
    cdef double acc = 0.0, f = 0.0, w = 0.0, r, g
    for b in range(n):
        if size[b]:
            kk += 1
            if relaxed:
                f += X[b] * X[b] + Y[b] * Y[b]
            else:
                r = X[b] * (C - X[b]) + Y[b] * (D - Y[b])
                acc += r * r
                if fabs(r) > w:
                    w = fabs(r)
    if relaxed:
        g = (C * C + D * D) - f
        acc = g * g
        w = fabs(g)
    E[0] = acc / (<double>n * <double>n) - weight * kk
    k[0] = kk
    worst[0] = w


cdef int _compact(long* labels, long* out, long* remap, int n) noexcept nogil:
    cdef int i, nb = 0
    cdef long b
    for i in range(n):
        remap[i] = -1
    for i in range(n):
        b = labels[i]
        if remap[b] < 0:
            remap[b] = nb
            nb += 1
        out[i] = remap[b]
    return nb


def anneal(cos, sin, angles, double C, double D, labels0, uniforms, double t0,
           double cooling, double eps_x, double weight, bint relaxed):
    cdef const double[:] cs = np.ascontiguousarray(cos, dtype=np.float64)
    cdef const double[:] sn = np.ascontiguousarray(sin, dtype=np.float64)
    cdef const double[:] ang = np.ascontiguousarray(angles, dtype=np.float64)
    cdef const double[:, :] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef int n = cs.shape[0]
    labels_arr = np.ascontiguousarray(labels0, dtype=np.int64).copy()
    compact_arr = np.zeros(n, dtype=np.int64)
    best_arr = np.zeros(n, dtype=np.int64)
    cdef long[:] labels = labels_arr
    cdef long[:] compact = compact_arr
    cdef long[:] best = best_arr
    cdef double* X = <double*>calloc(n, sizeof(double))
    cdef double* Y = <double*>calloc(n, sizeof(double))
    cdef double* EX = <double*>malloc(n * sizeof(double))
    cdef double* EY = <double*>malloc(n * sizeof(double))
    cdef double* work = <double*>malloc(4 * n * sizeof(double))
    cdef long* size = <long*>calloc(n, sizeof(long))
    cdef long* ne = <long*>malloc(n * sizeof(long))
    cdef long* moved = <long*>malloc(n * sizeof(long))
    cdef long* remap = <long*>malloc(n * sizeof(long))
    cdef int i, b, K, fr, c, ia, ib, src = 0, dst = 0, nmoved, k, k2, nb, best_k = 0
    cdef bint have_best = False
    cdef double E, E2, worst, worst2, w, best_worst = 1.0 / 0.0, temp = t0
    cdef double u0, u1, u2, u3, alpha, d, dE, sX, sY, dX, dY
    cdef Py_ssize_t step, tried = 0, accepted = 0
    try:
        for i in range(n):
            b = <int>labels[i]
            X[b] += cs[i]
            Y[b] += sn[i]
            size[b] += 1
        _energy(X, Y, size, n, C, D, weight, relaxed, &E, &k, &worst)
        if worst <= eps_x:
            nb = _compact(&labels[0], &compact[0], remap, n)
            _block_sums(cs, sn, compact, nb, EX, EY, work)
            w = _worst(EX, EY, nb, C, D, eps_x, relaxed)
            if w <= eps_x and (nb > best_k or (nb == best_k and w < best_worst)):
                best[:] = compact
                best_k = nb
                best_worst = w
                have_best = True
        for step in range(u.shape[0]):
            u0 = u[step, 0]
            u1 = u[step, 1]
            u2 = u[step, 2]
            u3 = u[step, 3]
            temp *= cooling
            K = 0
            fr = -1
            for b in range(n):
                if size[b]:
                    ne[K] = b
                    K += 1
                elif fr < 0:
                    fr = b
            if u0 < 0.6:
                i = <int>(u1 * n)
                src = <int>labels[i]
                c = <int>(u2 * (K + 1))
                if c >= K:
                    if size[src] == 1 or fr < 0:
                        continue
                    dst = fr
                else:
                    dst = <int>ne[c]
                if dst == src:
                    continue
                moved[0] = i
                nmoved = 1
            elif u0 < 0.8:
                if K < 2:
                    continue
                ia = <int>(u1 * K)
                ib = <int>(u2 * (K - 1))
                if ib >= ia:
                    ib += 1
                dst = <int>ne[ia]
                src = <int>ne[ib]
                nmoved = 0
                for i in range(n):
                    if labels[i] == src:
                        moved[nmoved] = i
                        nmoved += 1
            else:
                src = <int>ne[<int>(u1 * K)]
                if size[src] < 2 or fr < 0:
                    continue
                alpha = u2 * TWO_PI
                nmoved = 0
                for i in range(n):
                    if labels[i] == src:
                        d = ang[i] - alpha
                        d = d - TWO_PI * floor(d / TWO_PI)
                        if d < M_PI:
                            moved[nmoved] = i
                            nmoved += 1
                if nmoved == 0 or nmoved == size[src]:
                    continue
                dst = fr
            tried += 1
            sX = X[src]
            sY = Y[src]
            dX = X[dst]
            dY = Y[dst]
            for c in range(nmoved):
                i = <int>moved[c]
                labels[i] = dst
                X[src] -= cs[i]
                Y[src] -= sn[i]
                X[dst] += cs[i]
                Y[dst] += sn[i]
            size[src] -= nmoved
            size[dst] += nmoved
            if size[src] == 0:
                X[src] = 0.0
                Y[src] = 0.0
            _energy(X, Y, size, n, C, D, weight, relaxed, &E2, &k2, &worst2)
            dE = E2 - E
            if dE <= 0.0 or (temp > 0.0 and u3 < exp(-dE / temp)):
                accepted += 1
                E = E2
                k = k2
                worst = worst2
                if worst <= eps_x:
                    nb = _compact(&labels[0], &compact[0], remap, n)
                    _block_sums(cs, sn, compact, nb, EX, EY, work)
                    w = _worst(EX, EY, nb, C, D, eps_x, relaxed)
                    if w <= eps_x and (nb > best_k or (nb == best_k and w < best_worst)):
                        best[:] = compact
                        best_k = nb
                        best_worst = w
                        have_best = True
            else:
                for c in range(nmoved):
                    labels[moved[c]] = src
                size[src] += nmoved
                size[dst] -= nmoved
                X[src] = sX
                Y[src] = sY
                X[dst] = dX
                Y[dst] = dY
    finally:
        free(X); free(Y); free(EX); free(EY); free(work)
        free(size); free(ne); free(moved); free(remap)
    if not have_best:
        return None, tried, accepted
    return best_arr, tried, accepted
