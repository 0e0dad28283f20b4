"""NumPy implementations of the likelihood kernels.

This is the fallback backend when the compiled extension is missing and
the ground truth the extension is tested against.  Both backends expose
the same four functions with identical signatures and return layouts:

* ``logistic_core``  per-row Bernoulli log-likelihood pieces
* ``solve_logistic`` full Newton/IRLS solve with optional ridge
* ``nb_core``        per-row NB2 pieces including log-theta derivatives
* ``zinb_core``      per-row zero-inflated NB log-likelihood and gradient

Conventions: ``eta`` is a linear predictor, ``log_theta`` the log of the
NB size parameter, and per-row gradient vectors are returned without the
design matrix applied (callers assemble scores as ``X.T @ g``).
Curvature outputs are negated second derivatives, so they are the
per-row contributions to the observed information.
"""

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import digamma, gammaln, polygamma

# linear predictors above this are treated as saturated on the log scale
ETA_CAP = 30.0


def _softplus(x):
    out = np.empty_like(x)
    pos = x > 0
    out[pos] = x[pos] + np.log1p(np.exp(-x[pos]))
    out[~pos] = np.log1p(np.exp(x[~pos]))
    return out


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logistic_core(eta, y, w):
    """Weighted Bernoulli log-likelihood with per-row score and curvature.

    Returns ``(ll, g, h)`` where ``g[i] = w[i]*(y[i]-p[i])`` and
    ``h[i] = w[i]*p[i]*(1-p[i])``.  ``y`` may be fractional (EM
    responsibilities are valid inputs).
    """
    p = _sigmoid(eta)
    ll = float(np.dot(w, y * eta - _softplus(eta)))
    g = w * (y - p)
    h = w * p * (1.0 - p)
    return ll, g, h


def _solve_damped(a, b):
    """Solve a @ x = b by Cholesky, escalating Levenberg damping on failure."""
    dmax = max(float(np.max(np.diag(a))), 1e-300)
    lam = 0.0
    eye = np.eye(a.shape[0])
    for _ in range(9):
        try:
            chol = np.linalg.cholesky(a + lam * dmax * eye)
        except np.linalg.LinAlgError:
            lam = 1e-8 if lam == 0.0 else lam * 100.0
            continue
        half = solve_triangular(chol, b, lower=True)
        return solve_triangular(chol.T, half, lower=False)
    return None


def solve_logistic(X, y, w, ridge=0.0, beta0=None, max_iter=100, tol=1e-6):
    """Newton/IRLS maximization of the (optionally ridged) Bernoulli ll.

    The ridge penalty is ``-0.5*ridge*sum(beta[1:]**2)``; column 0 is
    never penalized.  Returns ``(beta, ll, score_inf, iters, status)``
    with status 0 converged, 1 iteration cap, 2 line-search stall,
    3 singular system beyond damping rescue.  ``ll`` is penalized.
    """
    n, p = X.shape
    beta = np.zeros(p) if beta0 is None else np.asarray(beta0, float).copy()
    pen = np.full(p, float(ridge))
    pen[0] = 0.0
    eta = X @ beta
    ll, g, h = logistic_core(eta, y, w)
    ll -= 0.5 * float(pen @ (beta * beta))
    score = X.T @ g - pen * beta
    score_inf = float(np.max(np.abs(score)))
    iters = 0
    status = 0 if score_inf <= tol else 1
    while status == 1 and iters < max_iter:
        info = (X * h[:, None]).T @ X
        info[np.diag_indices(p)] += pen
        step = _solve_damped(info, score)
        if step is None:
            status = 3
            break
        x_step = X @ step
        scale = 1.0
        accepted = False
        slack = 1e-9 * (1.0 + abs(ll))
        for _ in range(30):
            beta_try = beta + scale * step
            eta_try = eta + scale * x_step
            ll_try, g_try, h_try = logistic_core(eta_try, y, w)
            ll_try -= 0.5 * float(pen @ (beta_try * beta_try))
            if ll_try >= ll - slack:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            status = 2
            break
        beta, eta, ll, g, h = beta_try, eta_try, ll_try, g_try, h_try
        score = X.T @ g - pen * beta
        score_inf = float(np.max(np.abs(score)))
        iters += 1
        if score_inf <= tol:
            status = 0
    return beta, ll, score_inf, iters, status


def nb_core(y, eta, log_theta, w):
    """Weighted NB2 log-likelihood pieces.

    Returns ``(ll, g_eta, g_lt, h_eta, h_cross, h_lt)``: per-row score
    and observed-information contributions for the linear predictor and
    for log(theta), including the cross term.
    """
    theta = float(np.exp(log_theta))
    eta_c = np.minimum(eta, ETA_CAP)
    mu = np.exp(eta_c)
    denom = theta + mu
    log_denom = np.log(denom)
    ll_rows = (
        gammaln(y + theta)
        - gammaln(theta)
        - gammaln(y + 1.0)
        + theta * log_theta
        + y * eta_c
        - (y + theta) * log_denom
    )
    ll = float(np.dot(w, ll_rows))
    g_eta = w * theta * (y - mu) / denom
    dg = digamma(y + theta) - digamma(theta)
    t_rows = theta * (dg + log_theta + 1.0 - log_denom - (y + theta) / denom)
    g_lt = w * t_rows
    h_eta = w * theta * mu * (y + theta) / (denom * denom)
    h_cross = -w * theta * mu * (y - mu) / (denom * denom)
    tg = polygamma(1, y + theta) - polygamma(1, theta)
    f_prime = tg + 1.0 / theta - 1.0 / denom - (mu - y) / (denom * denom)
    h_lt = -(g_lt + w * theta * theta * f_prime)
    return ll, g_eta, g_lt, h_eta, h_cross, h_lt


def zinb_core(y, eta_count, eta_zero, log_theta):
    """Zero-inflated NB2 log-likelihood with per-row analytic gradient.

    Returns ``(ll, g_eta_count, g_eta_zero, g_lt)``.  ``eta_zero`` may
    contain -inf, which pins the excess-zero probability to 0 for that
    row.  Curvature is not provided; callers differentiate the gradient.
    """
    theta = float(np.exp(log_theta))
    eta_c = np.minimum(eta_count, ETA_CAP)
    mu = np.exp(eta_c)
    denom = theta + mu
    log_denom = np.log(denom)
    pi = _sigmoid(eta_zero)
    sp_zero = _softplus(eta_zero)

    llnb0 = theta * (log_theta - log_denom)
    zero = y == 0

    ll_rows = np.empty_like(mu)
    g_eta = np.empty_like(mu)
    g_zeta = np.empty_like(mu)
    g_lt = np.empty_like(mu)

    # rows with a positive count: excess-zero branch is impossible
    pos = ~zero
    yp = y[pos]
    ll_rows[pos] = (
        -sp_zero[pos]
        + gammaln(yp + theta)
        - gammaln(theta)
        - gammaln(yp + 1.0)
        + theta * log_theta
        + yp * eta_c[pos]
        - (yp + theta) * log_denom[pos]
    )
    g_eta[pos] = theta * (yp - mu[pos]) / denom[pos]
    g_zeta[pos] = -pi[pos]
    dg = digamma(yp + theta) - digamma(theta)
    g_lt[pos] = theta * (
        dg + log_theta + 1.0 - log_denom[pos] - (yp + theta) / denom[pos]
    )

    # zero rows: mixture of excess zero and an NB zero
    r = _sigmoid(eta_zero[zero] - llnb0[zero])
    ll_rows[zero] = -sp_zero[zero] + llnb0[zero] + _softplus(eta_zero[zero] - llnb0[zero])
    g_eta[zero] = -(1.0 - r) * theta * mu[zero] / denom[zero]
    g_zeta[zero] = r - pi[zero]
    g_lt[zero] = (1.0 - r) * theta * (log_theta - log_denom[zero] + mu[zero] / denom[zero])

    return float(np.sum(ll_rows)), g_eta, g_zeta, g_lt
