"""Pure-Python/numpy kernels; reference for ``_ckernels.pyx``.

``lloyd`` follows the same scalar operation order as the compiled version and
agrees with it bit for bit. ``svr_ipm`` uses LAPACK for its linear solves, so
it agrees with the compiled solver to rounding only.
"""

import numpy as np


def _svr_certificate(G, y, beta, a, nu, C, tube):
    """Primal SVR objective at ``(w = X'beta, b = nu)`` and the duality gap."""
    Gb = G @ beta
    quad = 0.5 * (beta @ Gb)
    r = np.abs(y - Gb - nu) - tube
    primal = quad + C * np.sum(np.maximum(r, 0.0))
    dual_min = quad + tube * np.sum(a) - y @ beta
    return primal, primal + dual_min


def svr_ipm(gram, y, C, tube, tol, max_iter):
    """Primal-dual interior point (Mehrotra predictor-corrector) for the SVR dual.

    Minimises ``0.5 a'Qa + p'a`` over ``a = [alpha, alpha*]`` in ``[0, C]^2K``
    subject to ``sum(alpha) = sum(alpha*)``, where ``Q = [[G, -G], [-G, G]]``
    and ``p = [tube - y, tube + y]``. Stops once the gap between the primal
    SVR objective at ``(w = X' beta, b = nu)`` and the dual objective is at
    most ``tol * primal`` (plus a round-off floor).

    Returns ``(beta, nu, n_iter, converged)`` with ``beta = alpha - alpha*`` and
    ``nu`` the multiplier of the equality constraint (the intercept).
    """
    G = np.asarray(gram, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    K = y.shape[0]
    n = 2 * K
    z = np.concatenate([np.ones(K), -np.ones(K)])
    Q = np.block([[G, -G], [-G, G]])
    p = np.concatenate([tube - y, tube + y])
    a = np.full(n, 0.5 * C)
    s = np.full(n, 0.5 * C)  # C - a, tracked separately to stay positive
    r0 = Q @ a + p
    u = np.maximum(r0, 0.0) + 1.0
    v = np.maximum(-r0, 0.0) + 1.0
    nu = 0.0
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, n] = z
    kkt[n, :n] = z
    beta = a[:K] - a[K:]
    floor = 1e-14 * (1.0 + float(np.max(np.abs(y)))) ** 2
    it = 0
    converged = False
    while True:
        beta = a[:K] - a[K:]
        primal, gap = _svr_certificate(G, y, beta, a, nu, C, tube)
        if gap <= tol * abs(primal) + floor:
            converged = True
            break
        if it >= max_iter:
            break
        rd = Q @ a + p - u + v + nu * z
        rp = z @ a
        mu = (a @ u + s @ v) / (2 * n)
        kkt[:n, :n] = Q + np.diag(u / a + v / s)
        try:
            # predictor
            rhs = np.empty(n + 1)
            rhs[:n] = -rd - u + v
            rhs[n] = -rp
            d = np.linalg.solve(kkt, rhs)
            da = d[:n]
            du = (-a * u - u * da) / a
            dv = (-s * v + v * da) / s
            step = _step(a, s, u, v, da, du, dv, 1.0)
            mu_aff = ((a + step * da) @ (u + step * du) + (s - step * da) @ (v + step * dv)) / (2 * n)
            sigma = (mu_aff / mu) ** 3
            # corrector
            rc1 = sigma * mu - a * u - da * du
            rc2 = sigma * mu - s * v + da * dv
            rhs[:n] = -rd + rc1 / a - rc2 / s
            d = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            break
        da = d[:n]
        du = (rc1 - u * da) / a
        dv = (rc2 + v * da) / s
        step = _step(a, s, u, v, da, du, dv, 0.995)
        # On badly scaled problems the full step can raise mu and the
        # iteration cycles; backtrack until mu decreases sufficiently.
        while step > 1e-12 and _mu_at(a, s, u, v, da, du, dv, step) > (1.0 - 0.01 * step) * mu:
            step *= 0.5
        a = a + step * da
        s = s - step * da
        u = u + step * du
        v = v + step * dv
        nu = nu + step * d[n]
        it += 1
        if not np.all(np.isfinite(a)):
            break
    return beta, nu, it, converged


def _mu_at(a, s, u, v, da, du, dv, t):
    return ((a + t * da) @ (u + t * du) + (s - t * da) @ (v + t * dv)) / (2 * a.shape[0])


def _step(a, s, u, v, da, du, dv, frac):
    step = 1.0
    for x, dx in ((a, da), (s, -da), (u, du), (v, dv)):
        neg = dx < 0
        if np.any(neg):
            step = min(step, frac * float(np.min(-x[neg] / dx[neg])))
    return step


def _sqdist(X, C):
    n, m = X.shape
    d2 = np.zeros((n, C.shape[0]))
    for col in range(m):
        diff = X[:, col, None] - C[None, :, col]
        d2 += diff * diff
    return d2


def lloyd(X, centers, max_iter):
    """Lloyd iterations from ``centers`` with farthest-point empty-cluster repair.

    Returns ``(labels, centers, inertia, n_iter, trace)``; ``trace`` holds the
    inertia after every centroid update.
    """
    X = np.asarray(X, dtype=np.float64)
    centers = np.array(centers, dtype=np.float64)
    n = X.shape[0]
    k = centers.shape[0]
    labels = np.full(n, -1, dtype=np.intp)
    trace = []
    inertia = 0.0
    it = 0
    while it < max_iter:
        it += 1
        d2 = _sqdist(X, centers)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=k)
        own = d2[np.arange(n), new]
        for c in range(k):
            if counts[c] == 0:
                eligible = counts[new] > 1
                cand = np.where(eligible, own, -1.0)
                p = int(np.argmax(cand))
                counts[new[p]] -= 1
                new[p] = c
                counts[c] = 1
                own[p] = 0.0
        sums = np.zeros_like(centers)
        np.add.at(sums, new, X)
        centers = sums / counts[:, None]
        d2 = _sqdist(X, centers)
        inertia = 0.0
        for idx in range(n):
            inertia += d2[idx, new[idx]]
        trace.append(inertia)
        if np.array_equal(new, labels):
            break
        labels = new
    return labels, centers, inertia, it, trace
