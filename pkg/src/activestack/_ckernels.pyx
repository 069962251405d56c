# cython: language_level=3
"""Compiled kernels; ``_pykernels`` holds the reference implementations."""

import numpy as np

from libc.math cimport INFINITY, fabs


cdef int _lu_factor(double[:, ::1] A, Py_ssize_t[::1] piv) noexcept nogil:
    """In-place LU with partial pivoting, as LAPACK ``getrf``.

    Returns 1 for a non-finite matrix or an exactly zero pivot (singular),
    where the reference backend's ``np.linalg.solve`` raises.
    """
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, j, k, p
    cdef double best, tmp, f, amax = 0.0
    for i in range(n):
        for j in range(n):
            if fabs(A[i, j]) > amax:
                amax = fabs(A[i, j])
    if not (amax > 0.0) or amax == INFINITY:
        return 1
    for k in range(n):
        p = k
        best = fabs(A[k, k])
        for i in range(k + 1, n):
            if fabs(A[i, k]) > best:
                best = fabs(A[i, k])
                p = i
        piv[k] = p
        if p != k:
            for j in range(n):
                tmp = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = tmp
        if best == 0.0:
            return 1
        for i in range(k + 1, n):
            f = A[i, k] / A[k, k]
            A[i, k] = f
            for j in range(k + 1, n):
                A[i, j] -= f * A[k, j]
    return 0


cdef void _lu_solve(double[:, ::1] LU, Py_ssize_t[::1] piv, double[::1] b) noexcept nogil:
    cdef Py_ssize_t n = LU.shape[0]
    cdef Py_ssize_t i, j
    cdef double tmp
    for i in range(n):
        if piv[i] != i:
            tmp = b[i]
            b[i] = b[piv[i]]
            b[piv[i]] = tmp
    for i in range(n):
        for j in range(i):
            b[i] -= LU[i, j] * b[j]
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, n):
            b[i] -= LU[i, j] * b[j]
        b[i] /= LU[i, i]


cdef double _mu_at(double[::1] a, double[::1] s, double[::1] u, double[::1] v,
                   double[::1] da, double[::1] du, double[::1] dv, double t) noexcept nogil:
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += (a[i] + t * da[i]) * (u[i] + t * du[i]) + (s[i] - t * da[i]) * (v[i] + t * dv[i])
    return acc / (2 * n)


cdef double _max_step(double[::1] x, double[::1] dx, double sign, double cur, double frac) noexcept nogil:
    cdef Py_ssize_t i
    cdef double d, r
    for i in range(x.shape[0]):
        d = sign * dx[i]
        if d < 0:
            r = frac * (-x[i] / d)
            if r < cur:
                cur = r
    return cur


def svr_ipm(gram, y, double C, double tube, double tol, long max_iter):
    cdef const double[:, ::1] G = np.ascontiguousarray(gram, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t K = yv.shape[0]
    cdef Py_ssize_t n = 2 * K
    cdef Py_ssize_t i, j, si, sj
    a_arr = np.empty(n)
    cdef double[::1] a = a_arr
    cdef double[::1] s = np.empty(n)
    cdef double[::1] u = np.empty(n)
    cdef double[::1] v = np.empty(n)
    cdef double[::1] z = np.empty(n)
    cdef double[::1] p = np.empty(n)
    cdef double[::1] rd = np.empty(n)
    cdef double[::1] da = np.empty(n)
    cdef double[::1] du = np.empty(n)
    cdef double[::1] dv = np.empty(n)
    cdef double[::1] rc1 = np.empty(n)
    cdef double[::1] rc2 = np.empty(n)
    cdef double[::1] rhs = np.empty(n + 1)
    cdef double[::1] rhs2 = np.empty(n + 1)
    cdef double[::1] beta = np.empty(K)
    cdef double[::1] Gb = np.empty(K)
    cdef double[:, ::1] kkt = np.zeros((n + 1, n + 1))
    cdef Py_ssize_t[::1] piv = np.empty(n + 1, dtype=np.intp)
    cdef double nu = 0.0, acc, qa, quad, primal, dual_min, gap, floor, ymax = 0.0
    cdef double mu, mu_aff, sigma, step, rp, sa
    cdef long it = 0
    cdef bint converged = False

    for i in range(K):
        z[i] = 1.0
        z[i + K] = -1.0
        p[i] = tube - yv[i]
        p[i + K] = tube + yv[i]
        if fabs(yv[i]) > ymax:
            ymax = fabs(yv[i])
    floor = 1e-14 * (1.0 + ymax) * (1.0 + ymax)
    for i in range(n):
        a[i] = 0.5 * C
        s[i] = 0.5 * C
    for i in range(n):
        si = i % K
        acc = 0.0
        for j in range(n):
            sj = j % K
            acc += z[i] * z[j] * G[si, sj] * a[j]
        acc += p[i]
        u[i] = (acc if acc > 0 else 0.0) + 1.0
        v[i] = (-acc if acc < 0 else 0.0) + 1.0

    while True:
        for i in range(K):
            beta[i] = a[i] - a[i + K]
        quad = 0.0
        for i in range(K):
            acc = 0.0
            for j in range(K):
                acc += G[i, j] * beta[j]
            Gb[i] = acc
            quad += beta[i] * acc
        quad *= 0.5
        primal = quad
        dual_min = quad
        for i in range(K):
            acc = fabs(yv[i] - Gb[i] - nu) - tube
            if acc > 0:
                primal += C * acc
            dual_min += tube * (a[i] + a[i + K]) - yv[i] * beta[i]
        gap = primal + dual_min
        if gap <= tol * fabs(primal) + floor:
            converged = True
            break
        if it >= max_iter:
            break

        rp = 0.0
        sa = 0.0
        for i in range(n):
            rp += z[i] * a[i]
            sa += a[i] * u[i] + s[i] * v[i]
        mu = sa / (2 * n)
        for i in range(n):
            si = i % K
            acc = 0.0
            for j in range(n):
                sj = j % K
                qa = z[i] * z[j] * G[si, sj]
                kkt[i, j] = qa
                acc += qa * a[j]
            rd[i] = acc + p[i] - u[i] + v[i] + nu * z[i]
            kkt[i, i] += u[i] / a[i] + v[i] / s[i]
            kkt[i, n] = z[i]
            kkt[n, i] = z[i]
        kkt[n, n] = 0.0
        if _lu_factor(kkt, piv):
            break

        # predictor
        for i in range(n):
            rhs[i] = -rd[i] - u[i] + v[i]
        rhs[n] = -rp
        _lu_solve(kkt, piv, rhs)
        for i in range(n):
            da[i] = rhs[i]
            du[i] = (-a[i] * u[i] - u[i] * da[i]) / a[i]
            dv[i] = (-s[i] * v[i] + v[i] * da[i]) / s[i]
        step = _max_step(a, da, 1.0, 1.0, 1.0)
        step = _max_step(s, da, -1.0, step, 1.0)
        step = _max_step(u, du, 1.0, step, 1.0)
        step = _max_step(v, dv, 1.0, step, 1.0)
        mu_aff = 0.0
        for i in range(n):
            mu_aff += (a[i] + step * da[i]) * (u[i] + step * du[i])
            mu_aff += (s[i] - step * da[i]) * (v[i] + step * dv[i])
        mu_aff /= 2 * n
        sigma = (mu_aff / mu) ** 3

        # corrector
        for i in range(n):
            rc1[i] = sigma * mu - a[i] * u[i] - da[i] * du[i]
            rc2[i] = sigma * mu - s[i] * v[i] + da[i] * dv[i]
            rhs2[i] = -rd[i] + rc1[i] / a[i] - rc2[i] / s[i]
        rhs2[n] = -rp
        _lu_solve(kkt, piv, rhs2)
        for i in range(n):
            da[i] = rhs2[i]
            du[i] = (rc1[i] - u[i] * da[i]) / a[i]
            dv[i] = (rc2[i] + v[i] * da[i]) / s[i]
        step = _max_step(a, da, 1.0, 1.0, 0.995)
        step = _max_step(s, da, -1.0, step, 0.995)
        step = _max_step(u, du, 1.0, step, 0.995)
        step = _max_step(v, dv, 1.0, step, 0.995)
        # On badly scaled problems the full step can raise mu and the
        # iteration cycles; backtrack until mu decreases sufficiently.
        while step > 1e-12 and _mu_at(a, s, u, v, da, du, dv, step) > (1.0 - 0.01 * step) * mu:
            step *= 0.5
        for i in range(n):
            a[i] += step * da[i]
            s[i] -= step * da[i]
            u[i] += step * du[i]
            v[i] += step * dv[i]
        nu += step * rhs2[n]
        it += 1
        if not (a[0] == a[0]):
            break
    return np.asarray(beta).copy(), nu, it, converged


cdef void _sqdist(const double[:, ::1] X, const double[:, ::1] C, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], m = X.shape[1], k = C.shape[0]
    cdef Py_ssize_t i, c, col
    cdef double diff
    for i in range(n):
        for c in range(k):
            out[i, c] = 0.0
    for col in range(m):
        for i in range(n):
            for c in range(k):
                diff = X[i, col] - C[c, col]
                out[i, c] += diff * diff


def lloyd(Xin, centers_in, long max_iter):
    cdef const double[:, ::1] X = np.ascontiguousarray(Xin, dtype=np.float64)
    centers_arr = np.array(centers_in, dtype=np.float64, order="C")
    cdef double[:, ::1] centers = centers_arr
    cdef Py_ssize_t n = X.shape[0], m = X.shape[1], k = centers.shape[0]
    labels_arr = np.full(n, -1, dtype=np.intp)
    new_arr = np.empty(n, dtype=np.intp)
    counts_arr = np.zeros(k, dtype=np.intp)
    d2_arr = np.empty((n, k))
    own_arr = np.empty(n)
    cdef Py_ssize_t[::1] labels = labels_arr
    cdef Py_ssize_t[::1] new = new_arr
    cdef Py_ssize_t[::1] counts = counts_arr
    cdef double[:, ::1] d2 = d2_arr
    cdef double[::1] own = own_arr
    cdef Py_ssize_t i, c, col, p, best_c
    cdef double best, inertia = 0.0
    cdef long it = 0
    cdef bint same
    trace = []
    while it < max_iter:
        it += 1
        _sqdist(X, centers, d2)
        for c in range(k):
            counts[c] = 0
        for i in range(n):
            best_c = 0
            best = d2[i, 0]
            for c in range(1, k):
                if d2[i, c] < best:
                    best = d2[i, c]
                    best_c = c
            new[i] = best_c
            own[i] = best
            counts[best_c] += 1
        for c in range(k):
            if counts[c] == 0:
                p = -1
                best = -INFINITY
                for i in range(n):
                    if counts[new[i]] > 1:
                        if own[i] > best:
                            best = own[i]
                            p = i
                    elif -1.0 > best:
                        best = -1.0
                        p = i
                counts[new[p]] -= 1
                new[p] = c
                counts[c] = 1
                own[p] = 0.0
        for c in range(k):
            for col in range(m):
                centers[c, col] = 0.0
        for i in range(n):
            for col in range(m):
                centers[new[i], col] += X[i, col]
        for c in range(k):
            for col in range(m):
                centers[c, col] = centers[c, col] / counts[c]
        _sqdist(X, centers, d2)
        inertia = 0.0
        for i in range(n):
            inertia += d2[i, new[i]]
        trace.append(inertia)
        same = True
        for i in range(n):
            if new[i] != labels[i]:
                same = False
                break
        if same:
            break
        for i in range(n):
            labels[i] = new[i]
    return labels_arr.copy(), centers_arr, inertia, it, trace
