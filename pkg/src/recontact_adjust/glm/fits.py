"""Maximum-likelihood fitters: logistic, NB2 and zero-inflated NB2.

All three families are fitted from scratch on top of the likelihood
kernels.  Covariances are inverse observed information at the optimum,
which makes them directly usable for Wald intervals and for the
posterior-approximate coefficient draws used in proper imputation.

Parameter vector layouts (used by ``parameters`` / ``draw_coefficients``
and by the serialized form):

* logistic: ``beta``
* negbin:   ``beta + [log_theta]``
* zinb:     ``count_beta + zero_gamma + [log_theta]``
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import (
    CollinearityError,
    DataError,
    NumericError,
    SeparationError,
)
from . import kernels

# coefficient norm beyond which an unpenalized logistic fit is treated
# as separated (the likelihood is unbounded along some direction)
SEPARATION_NORM = 100.0
CONDITION_LIMIT = 1e8
POISSON_LIMIT_THETA = 1e6
LOG_THETA_MIN = np.log(1e-4)
LOG_THETA_MAX = np.log(1e7)


@dataclass(frozen=True)
class DesignMatrix:
    """Dense design matrix with named columns; column 0 is the intercept."""

    matrix: np.ndarray
    names: tuple

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise DataError("design matrix must be 2-dimensional")
        if len(self.names) != m.shape[1]:
            raise DataError(
                f"{len(self.names)} column names for {m.shape[1]} columns"
            )
        if not np.all(np.isfinite(m)):
            raise DataError("design matrix contains non-finite entries")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n_rows(self):
        return self.matrix.shape[0]

    @property
    def n_cols(self):
        return self.matrix.shape[1]


@dataclass
class GlmFit:
    family: str
    names: tuple
    coefficients: np.ndarray
    covariance: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    dispersion: float = None
    poisson_limit: bool = False
    ridge: float = 0.0

    @property
    def parameters(self):
        if self.family == "negbin":
            return np.append(self.coefficients, np.log(self.dispersion))
        return self.coefficients.copy()

    @property
    def parameter_names(self):
        if self.family == "negbin":
            return self.names + ("log_theta",)
        return self.names

    def to_dict(self):
        d = {
            "kind": "glm",
            "family": self.family,
            "names": list(self.names),
            "coefficients": self.coefficients.tolist(),
            "covariance": self.covariance.tolist(),
            "log_likelihood": self.log_likelihood,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "ridge": self.ridge,
        }
        if self.family == "negbin":
            d["dispersion"] = self.dispersion
            d["poisson_limit"] = bool(self.poisson_limit)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            family=d["family"],
            names=tuple(d["names"]),
            coefficients=np.asarray(d["coefficients"], float),
            covariance=np.asarray(d["covariance"], float),
            log_likelihood=d["log_likelihood"],
            converged=d["converged"],
            iterations=d["iterations"],
            dispersion=d.get("dispersion"),
            poisson_limit=d.get("poisson_limit", False),
            ridge=d.get("ridge", 0.0),
        )


@dataclass
class ZinbFit:
    count_names: tuple
    zero_names: tuple
    count_coefficients: np.ndarray
    zero_coefficients: np.ndarray
    dispersion: float
    covariance: np.ndarray
    log_likelihood: float
    converged: bool
    em_iterations: int = 0
    newton_iterations: int = 0

    @property
    def parameters(self):
        return np.concatenate(
            [
                self.count_coefficients,
                self.zero_coefficients,
                [np.log(self.dispersion)],
            ]
        )

    @property
    def parameter_names(self):
        return (
            tuple(f"count:{n}" for n in self.count_names)
            + tuple(f"zero:{n}" for n in self.zero_names)
            + ("log_theta",)
        )

    def to_dict(self):
        return {
            "kind": "zinb",
            "count_names": list(self.count_names),
            "zero_names": list(self.zero_names),
            "count_coefficients": self.count_coefficients.tolist(),
            "zero_coefficients": self.zero_coefficients.tolist(),
            "dispersion": self.dispersion,
            "covariance": self.covariance.tolist(),
            "log_likelihood": self.log_likelihood,
            "converged": bool(self.converged),
            "em_iterations": int(self.em_iterations),
            "newton_iterations": int(self.newton_iterations),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            count_names=tuple(d["count_names"]),
            zero_names=tuple(d["zero_names"]),
            count_coefficients=np.asarray(d["count_coefficients"], float),
            zero_coefficients=np.asarray(d["zero_coefficients"], float),
            dispersion=d["dispersion"],
            covariance=np.asarray(d["covariance"], float),
            log_likelihood=d["log_likelihood"],
            converged=d["converged"],
            em_iterations=d.get("em_iterations", 0),
            newton_iterations=d.get("newton_iterations", 0),
        )


def _as_design(X):
    if isinstance(X, DesignMatrix):
        return X
    X = np.asarray(X, float)
    return DesignMatrix(X, tuple(f"x{i}" for i in range(X.shape[1])))


def _check_collinearity(X):
    gram = X.T @ X
    eig = np.linalg.eigvalsh(gram)
    lo, hi = eig[0], eig[-1]
    if lo <= 0 or np.sqrt(hi / lo) > CONDITION_LIMIT:
        raise CollinearityError(
            "design matrix is rank deficient or near singular "
            f"(condition number above {CONDITION_LIMIT:g})"
        )


def _symmetrize(a):
    return (a + a.T) / 2.0


def _invert_info(info):
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
    return _symmetrize(cov)


def fit_logistic(X, y, weights=None, ridge=0.0, max_iter=100, tol=1e-6):
    """Fit a Bernoulli GLM by Newton/IRLS.

    ``ridge`` adds a quadratic penalty on all non-intercept coefficients;
    it exists for imputation-internal fits on small strata where an
    answer is mandatory.  With a positive ridge the convergence
    criterion and the reported log-likelihood refer to the penalized
    objective, and the separation/collinearity checks are skipped.
    """
    dm = _as_design(X)
    X = dm.matrix
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (dm.n_rows,):
        raise DataError("y length does not match design rows")
    if np.any((y != 0.0) & (y != 1.0)):
        raise DataError("y must be binary 0/1")
    # the penalty makes the optimum unique even past saturation
    if dm.n_rows <= dm.n_cols and ridge == 0.0:
        raise DataError("need more rows than columns to fit")
    w = np.ones(dm.n_rows) if weights is None else np.ascontiguousarray(weights, float)
    if ridge == 0.0:
        _check_collinearity(X)
    beta, ll, score_inf, iters, status = kernels.solve_logistic(
        X, y, w, ridge=ridge, max_iter=max_iter, tol=tol
    )
    eta = X @ beta
    if ridge == 0.0:
        # an unbounded likelihood shows up either as every fitted
        # probability saturating at its outcome or as a runaway norm;
        # the score itself goes quiet exponentially, so it cannot tell
        p_hat = _sigmoid_np(eta)
        saturated = bool(
            np.all(np.where(y == 1.0, p_hat > 1.0 - 1e-6, p_hat < 1e-6))
        )
        if saturated or np.max(np.abs(beta)) > SEPARATION_NORM:
            worst = dm.names[int(np.argmax(np.abs(beta)))]
            raise SeparationError(
                f"perfect separation suspected: likelihood unbounded along {worst!r}",
                column=worst,
            )
    _, _, h = kernels.logistic_core(eta, y, w)
    info = (X * np.asarray(h)[:, None]).T @ X
    pen = np.full(dm.n_cols, ridge)
    pen[0] = 0.0
    info[np.diag_indices(dm.n_cols)] += pen
    return GlmFit(
        family="logistic",
        names=dm.names,
        coefficients=np.asarray(beta, float),
        covariance=_invert_info(info),
        log_likelihood=float(ll),
        converged=status == 0,
        iterations=int(iters),
        ridge=float(ridge),
    )


def _poisson_start(X, y, w):
    """A few damped Poisson-IRLS steps to seed the NB mean model."""
    n, p = X.shape
    beta = np.zeros(p)
    beta[0] = np.log(max(float(np.average(y, weights=w)), 1e-3))
    for _ in range(15):
        eta = np.minimum(X @ beta, kernels.reference.ETA_CAP)
        mu = np.exp(eta)
        score = X.T @ (w * (y - mu))
        if np.max(np.abs(score)) < 1e-6 * max(1.0, float(np.sum(w * mu))):
            break
        info = (X * (w * mu)[:, None]).T @ X
        info[np.diag_indices(p)] += 1e-10 * max(info.max(), 1.0)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            break
        # cap the step so early iterations cannot overshoot the log scale
        norm = np.max(np.abs(step))
        if norm > 2.0:
            step *= 2.0 / norm
        beta = beta + step
    return beta


def _nb_newton(X, y, w, beta, log_theta, max_iter, tol):
    """Joint Newton on (beta, log_theta) for the weighted NB2 likelihood.

    Returns (beta, log_theta, ll, score_inf, iters, converged).
    """
    n, p = X.shape
    eta = X @ beta
    ll, g_eta, g_lt, h_eta, h_cross, h_lt = kernels.nb_core(y, eta, log_theta, w)
    iters = 0
    converged = False
    for iters in range(1, max_iter + 1):
        score = np.empty(p + 1)
        score[:p] = X.T @ np.asarray(g_eta)
        score[p] = float(np.sum(g_lt))
        score_inf = float(np.max(np.abs(score)))
        if score_inf <= tol:
            converged = True
            iters -= 1
            break
        info = np.empty((p + 1, p + 1))
        info[:p, :p] = (X * np.asarray(h_eta)[:, None]).T @ X
        cross = X.T @ np.asarray(h_cross)
        info[:p, p] = cross
        info[p, :p] = cross
        info[p, p] = float(np.sum(h_lt))
        step = _damped_solve(info, score)
        if step is None:
            break
        scale = 1.0
        accepted = False
        slack = 1e-9 * (1.0 + abs(ll))
        for _ in range(30):
            beta_try = beta + scale * step[:p]
            lt_try = float(
                np.clip(log_theta + scale * step[p], LOG_THETA_MIN, LOG_THETA_MAX)
            )
            out = kernels.nb_core(y, X @ beta_try, lt_try, w)
            if out[0] >= ll - slack:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
        beta, log_theta = beta_try, lt_try
        ll, g_eta, g_lt, h_eta, h_cross, h_lt = out
    score = np.empty(p + 1)
    score[:p] = X.T @ np.asarray(g_eta)
    score[p] = float(np.sum(g_lt))
    score_inf = float(np.max(np.abs(score)))
    if score_inf <= tol:
        converged = True
    return beta, log_theta, ll, score_inf, iters, converged


def _damped_solve(a, b):
    dmax = max(float(np.max(np.diag(a))), 1e-300)
    lam = 0.0
    eye = np.eye(a.shape[0])
    for _ in range(9):
        try:
            chol = np.linalg.cholesky(a + lam * dmax * eye)
        except np.linalg.LinAlgError:
            lam = 1e-8 if lam == 0.0 else lam * 100.0
            continue
        z = np.linalg.solve(chol, b)
        return np.linalg.solve(chol.T, z)
    return None


def _nb_information(X, y, w, beta, log_theta):
    p = X.shape[1]
    _, _, _, h_eta, h_cross, h_lt = kernels.nb_core(y, X @ beta, log_theta, w)
    info = np.empty((p + 1, p + 1))
    info[:p, :p] = (X * np.asarray(h_eta)[:, None]).T @ X
    cross = X.T @ np.asarray(h_cross)
    info[:p, p] = cross
    info[p, :p] = cross
    info[p, p] = float(np.sum(h_lt))
    return info


def fit_negbin(X, y, weights=None, max_iter=100, tol=1e-6):
    """Fit an NB2 regression (Var = mu + mu^2/theta) by joint Newton.

    The dispersion is optimized on the log scale.  A fit whose theta
    runs into the upper bound is reported with ``poisson_limit=True``
    (the data carry no evidence of overdispersion); convergence is then
    judged on the mean-model score alone.
    """
    dm = _as_design(X)
    X = dm.matrix
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (dm.n_rows,):
        raise DataError("y length does not match design rows")
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise DataError("y must be nonnegative integer counts")
    if not np.any(y > 0):
        raise DataError("degenerate data: all counts are zero")
    if dm.n_rows <= dm.n_cols:
        raise DataError("need more rows than columns to fit")
    w = np.ones(dm.n_rows) if weights is None else np.ascontiguousarray(weights, float)
    _check_collinearity(X)

    beta = _poisson_start(X, y, w)
    mean = float(np.average(y, weights=w))
    var = float(np.average((y - mean) ** 2, weights=w))
    excess = max(var - mean, mean / 10.0)
    theta0 = np.clip(mean * mean / excess, 0.05, 1e4)
    log_theta = float(np.log(theta0))

    beta, log_theta, ll, score_inf, iters, converged = _nb_newton(
        X, y, w, beta, log_theta, max_iter, tol
    )
    theta = float(np.exp(log_theta))
    poisson_limit = theta > POISSON_LIMIT_THETA
    if poisson_limit and not converged:
        # at the theta cap only the mean-model score can vanish
        eta = X @ beta
        _, g_eta, _, _, _, _ = kernels.nb_core(y, eta, log_theta, w)
        converged = float(np.max(np.abs(X.T @ np.asarray(g_eta)))) <= tol
    info = _nb_information(X, y, w, beta, log_theta)
    return GlmFit(
        family="negbin",
        names=dm.names,
        coefficients=np.asarray(beta, float),
        covariance=_invert_info(info),
        log_likelihood=float(ll),
        converged=bool(converged),
        iterations=int(iters),
        dispersion=theta,
        poisson_limit=bool(poisson_limit),
    )


def _zinb_loglik_grad(Xc, Xz, y, params, pc, pz):
    beta = params[:pc]
    gamma = params[pc : pc + pz]
    lt = params[pc + pz]
    ll, g_eta, g_zeta, g_lt = kernels.zinb_core(y, Xc @ beta, Xz @ gamma, lt)
    grad = np.empty(pc + pz + 1)
    grad[:pc] = Xc.T @ np.asarray(g_eta)
    grad[pc : pc + pz] = Xz.T @ np.asarray(g_zeta)
    grad[pc + pz] = float(np.sum(g_lt))
    return float(ll), grad


def _zinb_loglik(Xc, Xz, y, params, pc, pz):
    beta = params[:pc]
    gamma = params[pc : pc + pz]
    lt = params[pc + pz]
    return float(kernels.zinb_core(y, Xc @ beta, Xz @ gamma, lt)[0])


def _fd_hessian(fun_grad, params, rel_step=1e-5):
    q = len(params)
    H = np.empty((q, q))
    for j in range(q):
        h = rel_step * max(1.0, abs(params[j]))
        up = params.copy()
        up[j] += h
        dn = params.copy()
        dn[j] -= h
        H[:, j] = (fun_grad(up)[1] - fun_grad(dn)[1]) / (2.0 * h)
    return _symmetrize(H)


def fit_zinb(X_count, X_zero, y, em_max=500, newton_max=50, tol=1e-5):
    """Fit a zero-inflated NB2 by EM with a Newton polish.

    EM treats excess-zero membership as the latent variable; the polish
    step drives the joint score below ``tol`` and yields an observed-
    information covariance over (beta, gamma, log_theta).  If the
    iteration budget runs out the best iterate found is returned with
    ``converged=False``.
    """
    dmc = _as_design(X_count)
    dmz = _as_design(X_zero)
    Xc, Xz = dmc.matrix, dmz.matrix
    if dmc.n_rows != dmz.n_rows:
        raise DataError("count and zero designs must have the same rows")
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (dmc.n_rows,):
        raise DataError("y length does not match design rows")
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise DataError("y must be nonnegative integer counts")
    if not np.any(y > 0):
        raise DataError("degenerate data: all counts are zero")
    if not np.any(y == 0):
        raise NumericError("no zeros in y: excess-zero part is unidentifiable")
    pc, pz = dmc.n_cols, dmz.n_cols
    n = dmc.n_rows

    nb = fit_negbin(dmc, y.astype(int))
    beta = nb.coefficients.copy()
    lt = float(np.log(nb.dispersion))

    mu = np.exp(np.minimum(Xc @ beta, kernels.reference.ETA_CAP))
    theta = np.exp(lt)
    z_nb = float(np.mean((theta / (theta + mu)) ** theta))
    z_obs = float(np.mean(y == 0))
    excess = np.clip((z_obs - z_nb) / max(1.0 - z_nb, 1e-6), 0.02, 0.6)
    gamma = np.zeros(pz)
    gamma[0] = float(np.log(excess / (1.0 - excess)))

    params = np.concatenate([beta, gamma, [lt]])
    ll = _zinb_loglik(Xc, Xz, y, params, pc, pz)
    best_params, best_ll = params.copy(), ll

    zero_mask = y == 0
    grad_fun = lambda p: _zinb_loglik_grad(Xc, Xz, y, p, pc, pz)
    grad = grad_fun(params)[1]
    em_iters = 0
    newton_iters = 0

    # EM finds the basin, Newton sharpens; alternate until the joint
    # score is below tol or both budgets are spent
    while float(np.max(np.abs(grad))) > tol and (
        em_iters < em_max or newton_iters < newton_max
    ):
        em_chunk = min(60, em_max - em_iters)
        for _ in range(em_chunk):
            em_iters += 1
            theta = float(np.exp(lt))
            mu = np.exp(np.minimum(Xc @ beta, kernels.reference.ETA_CAP))
            llnb0 = theta * (lt - np.log(theta + mu))
            eta_z = Xz @ gamma
            resp = np.zeros(n)
            resp[zero_mask] = _sigmoid_np(eta_z[zero_mask] - llnb0[zero_mask])
            # zero part: weighted Bernoulli on the responsibilities
            gamma_new, _, _, _, _ = kernels.solve_logistic(
                Xz, resp, np.ones(n), ridge=0.0, beta0=gamma, max_iter=10, tol=1e-8
            )
            gamma = np.clip(np.asarray(gamma_new, float), -50.0, 50.0)
            # count part: NB weighted by the non-excess membership
            w_count = np.where(zero_mask, 1.0 - resp, 1.0)
            beta, lt, _, _, _, _ = _nb_newton(Xc, y, w_count, beta, lt, 3, 1e-8)
            params = np.concatenate([beta, gamma, [lt]])
            ll_new = _zinb_loglik(Xc, Xz, y, params, pc, pz)
            if ll_new > best_ll:
                best_ll, best_params = ll_new, params.copy()
            moved = abs(ll_new - ll)
            ll = ll_new
            if moved <= 1e-5 * (1.0 + abs(ll_new)):
                break

        ll, grad = grad_fun(params)
        stall = 0
        score_prev = float(np.max(np.abs(grad)))
        while newton_iters < newton_max:
            score_inf = float(np.max(np.abs(grad)))
            if score_inf <= tol:
                break
            newton_iters += 1
            H = _fd_hessian(grad_fun, params)
            step = _damped_solve(-H, grad)
            if step is None:
                break
            scale = 1.0
            accepted = False
            slack = 1e-9 * (1.0 + abs(ll))
            for _ in range(30):
                p_try = params + scale * step
                p_try[pc + pz] = np.clip(p_try[pc + pz], LOG_THETA_MIN, LOG_THETA_MAX)
                ll_try, grad_try = grad_fun(p_try)
                if ll_try >= ll - slack:
                    accepted = True
                    break
                scale *= 0.5
            if not accepted:
                break
            params, ll, grad = p_try, ll_try, grad_try
            if ll > best_ll:
                best_ll, best_params = ll, params.copy()
            score_now = float(np.max(np.abs(grad)))
            stall = stall + 1 if score_now > 0.5 * score_prev else 0
            score_prev = score_now
            if stall >= 8:
                break
        if em_iters >= em_max and newton_iters >= newton_max:
            break
        if float(np.max(np.abs(grad))) > tol and em_iters >= em_max:
            break
        # resume from the polish point for the next EM stretch
        beta = params[:pc].copy()
        gamma = params[pc : pc + pz].copy()
        lt = float(params[pc + pz])

    # keep the converged point; fall back to the best-ll iterate otherwise
    if float(np.max(np.abs(grad))) > tol and best_ll > ll:
        params = best_params
        ll, grad = grad_fun(params)

    # ZINB nests NB: never report a fit below the pi = 0 boundary
    boundary = np.concatenate([nb.coefficients, np.full(pz, 0.0), [np.log(nb.dispersion)]])
    boundary[pc] = -35.0
    ll_boundary = _zinb_loglik(Xc, Xz, y, boundary, pc, pz)
    if ll_boundary > ll:
        params = boundary
        ll, grad = grad_fun(params)

    score_inf = float(np.max(np.abs(grad)))
    H = _fd_hessian(grad_fun, params)
    cov = _invert_info(-H)
    return ZinbFit(
        count_names=dmc.names,
        zero_names=dmz.names,
        count_coefficients=params[:pc].copy(),
        zero_coefficients=params[pc : pc + pz].copy(),
        dispersion=float(np.exp(params[pc + pz])),
        covariance=cov,
        log_likelihood=float(ll),
        converged=score_inf <= tol,
        em_iterations=em_iters,
        newton_iterations=newton_iters,
    )


def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def loglik_zinb(params, X_count, X_zero, y):
    """Exact ZINB log-likelihood at the given parameters.

    ``params`` is a ZinbFit or a (count_coefficients, zero_coefficients,
    theta) triple.  Passing ``zero_coefficients=None`` forces pi = 0,
    the plain-NB limit of the mixture.
    """
    if isinstance(params, ZinbFit):
        beta, gamma, theta = (
            params.count_coefficients,
            params.zero_coefficients,
            params.dispersion,
        )
    else:
        beta, gamma, theta = params
    Xc = X_count.matrix if isinstance(X_count, DesignMatrix) else np.asarray(X_count, float)
    Xz = X_zero.matrix if isinstance(X_zero, DesignMatrix) else np.asarray(X_zero, float)
    y = np.ascontiguousarray(y, dtype=np.float64)
    beta = np.asarray(beta, float)
    if Xc.shape[0] != y.shape[0] or Xc.shape[1] != beta.shape[0]:
        raise DataError("count design, y and coefficients disagree in shape")
    if gamma is None:
        eta_z = np.full(y.shape[0], -np.inf)
    else:
        gamma = np.asarray(gamma, float)
        if Xz.shape[0] != y.shape[0] or Xz.shape[1] != gamma.shape[0]:
            raise DataError("zero design and coefficients disagree in shape")
        eta_z = Xz @ gamma
    return float(kernels.zinb_core(y, Xc @ beta, eta_z, np.log(theta))[0])


def predict_expected_count(fit, x_count, x_zero):
    """E[y] = (1 - pi) * mu for each design row of a ZINB fit."""
    Xc = x_count.matrix if isinstance(x_count, DesignMatrix) else np.atleast_2d(np.asarray(x_count, float))
    Xz = x_zero.matrix if isinstance(x_zero, DesignMatrix) else np.atleast_2d(np.asarray(x_zero, float))
    mu = np.exp(np.minimum(Xc @ fit.count_coefficients, kernels.reference.ETA_CAP))
    pi = _sigmoid_np(Xz @ fit.zero_coefficients)
    out = (1.0 - pi) * mu
    return out if out.size > 1 else float(out[0])


def draw_coefficients(fit, rng):
    """One draw from N(mle, covariance) over the fit's parameter vector.

    The covariance is symmetrized and its spectrum clipped at zero;
    a meaningfully negative eigenvalue is an error rather than silently
    repaired.
    """
    mean = fit.parameters
    cov = _symmetrize(np.asarray(fit.covariance, float))
    if cov.shape != (mean.size, mean.size):
        raise DataError("covariance shape does not match the parameter vector")
    eigval, eigvec = np.linalg.eigh(cov)
    top = max(1.0, float(eigval[-1]))
    if eigval[0] < -1e-8 * top:
        raise NumericError(
            f"covariance is not positive semidefinite (min eigenvalue {eigval[0]:.3e})"
        )
    eigval = np.clip(eigval, 0.0, None)
    z = rng.standard_normal(mean.size)
    return mean + eigvec @ (np.sqrt(eigval) * z)
