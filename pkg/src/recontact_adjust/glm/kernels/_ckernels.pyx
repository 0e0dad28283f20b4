# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled likelihood kernels.

Mirrors ``kernels.reference`` function for function; see that module
for the shared contract.  One extra restriction here: count vectors
must be integer-valued, because digamma/trigamma differences are
computed by recurrence instead of calling special functions.
"""

import numpy as np

from libc.math cimport exp, lgamma, log, log1p, sqrt

# same saturation cap as the reference backend
cdef double ETA_CAP = 30.0


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline double _softplus(double x) nogil:
    if x > 0.0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


def logistic_core(eta, y, w):
    cdef double[::1] ev = np.ascontiguousarray(eta, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = ev.shape[0], i
    g_arr = np.empty(n)
    h_arr = np.empty(n)
    cdef double[::1] g = g_arr
    cdef double[::1] h = h_arr
    cdef double ll = 0.0, p, e
    for i in range(n):
        e = ev[i]
        p = _sigmoid(e)
        ll += wv[i] * (yv[i] * e - _softplus(e))
        g[i] = wv[i] * (yv[i] - p)
        h[i] = wv[i] * p * (1.0 - p)
    return ll, g_arr, h_arr


cdef int _chol(double[:, ::1] a, Py_ssize_t p) nogil:
    """In-place lower Cholesky; returns -1 if a pivot fails."""
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(p):
        s = a[j, j]
        for k in range(j):
            s -= a[j, k] * a[j, k]
        if s <= 0.0:
            return -1
        a[j, j] = sqrt(s)
        for i in range(j + 1, p):
            s = a[i, j]
            for k in range(j):
                s -= a[i, k] * a[j, k]
            a[i, j] = s / a[j, j]
    return 0


cdef void _chol_solve(double[:, ::1] L, double[::1] b, double[::1] x, Py_ssize_t p) nogil:
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(p):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * x[k]
        x[i] = s / L[i, i]
    for i in range(p - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, p):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]


cdef int _solve_damped(double[:, ::1] info, double[::1] score, double[::1] step,
                       double[:, ::1] work, Py_ssize_t p) nogil:
    """Damped Cholesky solve, same lambda schedule as the reference."""
    cdef double dmax = 1e-300, lam = 0.0
    cdef Py_ssize_t i, j, attempt
    for i in range(p):
        if info[i, i] > dmax:
            dmax = info[i, i]
    for attempt in range(9):
        for i in range(p):
            for j in range(p):
                work[i, j] = info[i, j]
            work[i, i] += lam * dmax
        if _chol(work, p) == 0:
            _chol_solve(work, score, step, p)
            return 0
        lam = 1e-8 if lam == 0.0 else lam * 100.0
    return -1


cdef double _ll_logistic(double[::1] eta, double[::1] y, double[::1] w,
                         double[::1] beta, double[::1] pen,
                         Py_ssize_t n, Py_ssize_t p) nogil:
    cdef double ll = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        ll += w[i] * (y[i] * eta[i] - _softplus(eta[i]))
    for i in range(p):
        ll -= 0.5 * pen[i] * beta[i] * beta[i]
    return ll


def solve_logistic(X, y, w, double ridge=0.0, beta0=None, int max_iter=100,
                   double tol=1e-6):
    """Newton/IRLS solve; see reference.solve_logistic for semantics."""
    X_arr = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] xv = X_arr
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], p = xv.shape[1], i, j, k

    beta_arr = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=np.float64).copy()
    pen_arr = np.full(p, ridge)
    pen_arr[0] = 0.0
    cdef double[::1] beta = beta_arr
    cdef double[::1] pen = pen_arr

    eta_arr = X_arr @ beta_arr
    cdef double[::1] eta = eta_arr
    cdef double[::1] g = np.empty(n)
    cdef double[::1] h = np.empty(n)
    cdef double[::1] score = np.empty(p)
    cdef double[::1] step = np.empty(p)
    cdef double[::1] x_step = np.empty(n)
    cdef double[::1] eta_try = np.empty(n)
    cdef double[::1] beta_try = np.empty(p)
    cdef double[:, ::1] info = np.empty((p, p))
    cdef double[:, ::1] work = np.empty((p, p))

    cdef double ll, ll_try, score_inf, pr, gi, scale, a, slack
    cdef int iters = 0, status, half
    cdef bint accepted

    # score, per-row curvature and penalized ll at the start point
    ll = _ll_logistic(eta, yv, wv, beta, pen, n, p)
    for j in range(p):
        score[j] = -pen[j] * beta[j]
    for i in range(n):
        pr = _sigmoid(eta[i])
        gi = wv[i] * (yv[i] - pr)
        g[i] = gi
        h[i] = wv[i] * pr * (1.0 - pr)
        for j in range(p):
            score[j] += xv[i, j] * gi
    score_inf = 0.0
    for j in range(p):
        if score[j] > score_inf:
            score_inf = score[j]
        elif -score[j] > score_inf:
            score_inf = -score[j]
    status = 0 if score_inf <= tol else 1

    while status == 1 and iters < max_iter:
        for j in range(p):
            for k in range(p):
                info[j, k] = 0.0
        for i in range(n):
            for j in range(p):
                a = h[i] * xv[i, j]
                for k in range(j + 1):
                    info[j, k] += a * xv[i, k]
        for j in range(p):
            for k in range(j):
                info[k, j] = info[j, k]
            info[j, j] += pen[j]
        if _solve_damped(info, score, step, work, p) != 0:
            status = 3
            break
        for i in range(n):
            a = 0.0
            for j in range(p):
                a += xv[i, j] * step[j]
            x_step[i] = a
        scale = 1.0
        accepted = False
        slack = 1e-9 * (1.0 + (ll if ll >= 0 else -ll))
        for half in range(30):
            for j in range(p):
                beta_try[j] = beta[j] + scale * step[j]
            for i in range(n):
                eta_try[i] = eta[i] + scale * x_step[i]
            ll_try = _ll_logistic(eta_try, yv, wv, beta_try, pen, n, p)
            if ll_try >= ll - slack:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            status = 2
            break
        for j in range(p):
            beta[j] = beta_try[j]
        for i in range(n):
            eta[i] = eta_try[i]
        ll = ll_try
        for j in range(p):
            score[j] = -pen[j] * beta[j]
        for i in range(n):
            pr = _sigmoid(eta[i])
            gi = wv[i] * (yv[i] - pr)
            g[i] = gi
            h[i] = wv[i] * pr * (1.0 - pr)
            for j in range(p):
                score[j] += xv[i, j] * gi
        score_inf = 0.0
        for j in range(p):
            if score[j] > score_inf:
                score_inf = score[j]
            elif -score[j] > score_inf:
                score_inf = -score[j]
        iters += 1
        if score_inf <= tol:
            status = 0
    return beta_arr, ll, score_inf, iters, status


def nb_core(y, eta, double log_theta, w):
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] ev = np.ascontiguousarray(eta, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0], i
    cdef long m, k
    g_eta_arr = np.empty(n)
    g_lt_arr = np.empty(n)
    h_eta_arr = np.empty(n)
    h_cross_arr = np.empty(n)
    h_lt_arr = np.empty(n)
    cdef double[::1] g_eta = g_eta_arr
    cdef double[::1] g_lt = g_lt_arr
    cdef double[::1] h_eta = h_eta_arr
    cdef double[::1] h_cross = h_cross_arr
    cdef double[::1] h_lt = h_lt_arr
    cdef double theta = exp(log_theta)
    cdef double lg_theta = lgamma(theta)
    cdef double ll = 0.0, e, mu, den, ld, yi, dg, tg, t, fp, wi
    for i in range(n):
        e = ev[i]
        if e > ETA_CAP:
            e = ETA_CAP
        mu = exp(e)
        den = theta + mu
        ld = log(den)
        yi = yv[i]
        wi = wv[i]
        ll += wi * (lgamma(yi + theta) - lg_theta - lgamma(yi + 1.0)
                    + theta * log_theta + yi * e - (yi + theta) * ld)
        g_eta[i] = wi * theta * (yi - mu) / den
        dg = 0.0
        tg = 0.0
        m = <long> (yi + 0.5)
        for k in range(m):
            dg += 1.0 / (theta + k)
            tg -= 1.0 / ((theta + k) * (theta + k))
        t = theta * (dg + log_theta + 1.0 - ld - (yi + theta) / den)
        g_lt[i] = wi * t
        h_eta[i] = wi * theta * mu * (yi + theta) / (den * den)
        h_cross[i] = -wi * theta * mu * (yi - mu) / (den * den)
        fp = tg + 1.0 / theta - 1.0 / den - (mu - yi) / (den * den)
        h_lt[i] = -(wi * t + wi * theta * theta * fp)
    return ll, g_eta_arr, g_lt_arr, h_eta_arr, h_cross_arr, h_lt_arr


def zinb_core(y, eta_count, eta_zero, double log_theta):
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] ec = np.ascontiguousarray(eta_count, dtype=np.float64)
    cdef double[::1] ez = np.ascontiguousarray(eta_zero, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0], i
    cdef long m, k
    g_eta_arr = np.empty(n)
    g_zeta_arr = np.empty(n)
    g_lt_arr = np.empty(n)
    cdef double[::1] g_eta = g_eta_arr
    cdef double[::1] g_zeta = g_zeta_arr
    cdef double[::1] g_lt = g_lt_arr
    cdef double theta = exp(log_theta)
    cdef double lg_theta = lgamma(theta)
    cdef double ll = 0.0, e, mu, den, ld, yi, pi, llnb0, r, dg
    for i in range(n):
        e = ec[i]
        if e > ETA_CAP:
            e = ETA_CAP
        mu = exp(e)
        den = theta + mu
        ld = log(den)
        yi = yv[i]
        pi = _sigmoid(ez[i])
        if yi > 0.0:
            ll += (-_softplus(ez[i]) + lgamma(yi + theta) - lg_theta
                   - lgamma(yi + 1.0) + theta * log_theta + yi * e
                   - (yi + theta) * ld)
            g_eta[i] = theta * (yi - mu) / den
            g_zeta[i] = -pi
            dg = 0.0
            m = <long> (yi + 0.5)
            for k in range(m):
                dg += 1.0 / (theta + k)
            g_lt[i] = theta * (dg + log_theta + 1.0 - ld - (yi + theta) / den)
        else:
            llnb0 = theta * (log_theta - ld)
            r = _sigmoid(ez[i] - llnb0)
            ll += -_softplus(ez[i]) + llnb0 + _softplus(ez[i] - llnb0)
            g_eta[i] = -(1.0 - r) * theta * mu / den
            g_zeta[i] = r - pi
            g_lt[i] = (1.0 - r) * theta * (log_theta - ld + mu / den)
    return ll, g_eta_arr, g_zeta_arr, g_lt_arr
