"""Quasi maximum likelihood and quasi Bayesian estimators on the parameter box."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .likelihood import loglik_eval, loglik_many, quasi_loglik
from .model import ModelSpec
from .simulate import PointPath

__all__ = [
    "QmleOptions",
    "QmleResult",
    "QbeOptions",
    "QbeResult",
    "EstimationError",
    "qmle",
    "qbe",
    "confidence_region",
    "ConfidenceRegion",
]


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class QmleOptions:
    n_starts: int = 8
    seed: int = 0
    grad_tol: float = 1e-6
    max_iter: int = 500
    newton_polish: int = 6


@dataclass
class QmleResult:
    theta_hat: np.ndarray
    loglik: float
    grad_norm: float
    observed_info: np.ndarray  # Gamma_n(theta_hat) = -hessian/n
    stderr: np.ndarray
    n_restarts_used: int
    converged: bool
    on_boundary: bool = False

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat.tolist(),
            "loglik": self.loglik,
            "grad_norm": self.grad_norm,
            "observed_info": self.observed_info.tolist(),
            "stderr": self.stderr.tolist(),
            "n_restarts_used": self.n_restarts_used,
            "converged": self.converged,
            "on_boundary": self.on_boundary,
        }


def _latin_hypercube(box, n: int, rng: np.random.Generator) -> np.ndarray:
    p = box.dim
    pts = np.empty((n, p))
    for k in range(p):
        perm = rng.permutation(n)
        pts[:, k] = box.lower[k] + (box.upper[k] - box.lower[k]) * (
            (perm + rng.random(n)) / n
        )
    return pts


def qmle(model: ModelSpec, path: PointPath, opts: QmleOptions | None = None) -> QmleResult:
    """Maximize l_n over the closed box: multi-start L-BFGS-B + Newton polish."""
    opts = opts or QmleOptions()
    box = model.param_space
    rng = np.random.default_rng(np.random.SeedSequence(opts.seed))
    starts = [box.center]
    if opts.n_starts > 1:
        starts.extend(_latin_hypercube(box, opts.n_starts - 1, rng))
    bounds = list(zip(box.lower, box.upper))

    def neg(th):
        ev = loglik_eval(model, box.clip(th), path, order=1)
        if not ev.feasible:
            return 1e30, np.zeros(model.p)
        return -ev.value, -ev.gradient

    best = None
    used = 0
    for th0 in starts:
        used += 1
        res = optimize.minimize(
            neg,
            np.asarray(th0, dtype=float),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": opts.max_iter, "ftol": 1e-14, "gtol": 1e-10},
        )
        if res.fun >= 1e29:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise EstimationError("all optimizer starts were infeasible")

    theta = box.clip(best.x)
    # Newton polish on interior coordinates for high-accuracy stationarity.
    for _ in range(opts.newton_polish):
        ev = loglik_eval(model, theta, path, order=2)
        if not ev.feasible:
            break
        interior = (theta > box.lower + 1e-12) & (theta < box.upper - 1e-12)
        free = np.where(interior)[0]
        if free.size == 0:
            break
        g = ev.gradient[free]
        H = ev.hessian[np.ix_(free, free)]
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        cand = theta.copy()
        cand[free] = theta[free] - step
        cand = box.clip(cand)
        cand_ev = loglik_eval(model, cand, path, order=0)
        if cand_ev.feasible and cand_ev.value >= ev.value - 1e-9:
            if np.max(np.abs(cand - theta)) < 1e-15:
                theta = cand
                break
            theta = cand
        else:
            break

    ev = loglik_eval(model, theta, path, order=2)
    on_boundary = bool(
        np.any(theta <= box.lower + 1e-9 * (box.upper - box.lower))
        or np.any(theta >= box.upper - 1e-9 * (box.upper - box.lower))
    )
    interior = (theta > box.lower + 1e-12) & (theta < box.upper - 1e-12)
    grad_norm = float(np.linalg.norm(ev.gradient[interior])) if np.any(interior) else 0.0
    observed_info = -ev.hessian / model.n
    with np.errstate(invalid="ignore"):
        try:
            cov = np.linalg.inv(-ev.hessian)
            diag = np.diag(cov)
            stderr = np.sqrt(np.where(diag > 0, diag, np.nan))
        except np.linalg.LinAlgError:
            stderr = np.full(model.p, np.nan)
    converged = on_boundary or grad_norm <= opts.grad_tol * (1.0 + abs(ev.value))
    return QmleResult(
        theta_hat=theta,
        loglik=float(ev.value),
        grad_norm=grad_norm,
        observed_info=observed_info,
        stderr=stderr,
        n_restarts_used=used,
        converged=bool(converged),
        on_boundary=on_boundary,
    )


# ---------------------------------------------------------------------------
# Quasi Bayesian estimator: posterior mean under a box-supported prior.


@dataclass(frozen=True)
class QbeOptions:
    method: str = "auto"  # auto | tensor_quadrature | importance_sampling
    nodes_per_axis: int | None = None  # default 801 / 101 / 41 for p = 1 / 2 / 3
    n_draws: int = 50_000
    seed: int = 0
    qmle_result: object = None  # reuse a precomputed QMLE for centering


@dataclass
class QbeResult:
    theta_tilde: np.ndarray
    log_normalizer: float
    method: str
    error_estimate: float

    def to_dict(self) -> dict:
        return {
            "theta_tilde": self.theta_tilde.tolist(),
            "log_normalizer": self.log_normalizer,
            "method": self.method,
            "error_estimate": self.error_estimate,
        }


def _prior_callable(model: ModelSpec, prior):
    if prior is None or prior == "uniform":
        return lambda th: np.ones(np.atleast_2d(th).shape[0])
    if callable(prior):
        def f(th):
            th = np.atleast_2d(th)
            vals = np.array([float(prior(x)) for x in th])
            if np.any(vals <= 0):
                raise EstimationError("prior must be strictly positive on the box")
            return vals

        return f
    raise EstimationError(f"unsupported prior spec {prior!r}")


def qbe(
    model: ModelSpec,
    path: PointPath,
    prior="uniform",
    opts: QbeOptions | None = None,
) -> QbeResult:
    """Posterior mean of theta under exp(l_n) times the prior, on the box.

    Tensor Gauss-Legendre quadrature for p <= 3 (log-sum-exp stabilized at the
    QMLE value), self-normalized Gaussian importance sampling otherwise.
    """
    opts = opts or QbeOptions()
    prior_f = _prior_callable(model, prior)
    method = opts.method
    if method == "auto":
        method = "tensor_quadrature" if model.p <= 3 else "importance_sampling"

    center = opts.qmle_result or qmle(model, path, QmleOptions(n_starts=4, seed=opts.seed))
    l_hat = center.loglik

    if method == "tensor_quadrature":
        nodes = opts.nodes_per_axis
        if nodes is None:
            nodes = {1: 801, 2: 101, 3: 41}.get(model.p, 21)
        theta_t, log_norm, err = _qbe_quadrature(model, path, prior_f, l_hat, nodes)
    elif method == "importance_sampling":
        theta_t, log_norm, err = _qbe_importance(model, path, prior_f, center, opts)
    else:
        raise EstimationError(f"unknown QBE method {method!r}")
    if not np.all(np.isfinite(theta_t)):
        raise EstimationError("QBE normalizer underflowed after stabilization")
    return QbeResult(
        theta_tilde=model.param_space.clip(theta_t),
        log_normalizer=float(log_norm),
        method=method,
        error_estimate=float(err),
    )


def _qbe_nodes(box, nodes_per_axis: int):
    x, w = np.polynomial.legendre.leggauss(nodes_per_axis)
    axes = []
    weights = []
    for k in range(box.dim):
        half = 0.5 * (box.upper[k] - box.lower[k])
        mid = 0.5 * (box.upper[k] + box.lower[k])
        axes.append(mid + half * x)
        weights.append(half * w)
    nodes = np.array(list(itertools.product(*axes)))
    wts = np.array([np.prod(c) for c in itertools.product(*weights)])
    return nodes, wts


def _qbe_at_nodes(model, path, prior_f, l_hat, nodes, wts):
    logw = loglik_many(model, nodes, path) - l_hat
    pri = prior_f(nodes)
    finite = np.isfinite(logw)
    lw = np.where(finite, logw, -np.inf)
    m = float(np.max(lw))
    w = np.exp(lw - m) * pri * wts
    norm = float(np.sum(w))
    if norm <= 0.0:
        raise EstimationError("QBE normalizer underflowed after stabilization")
    theta_t = (w @ nodes) / norm
    return theta_t, np.log(norm) + m + l_hat


def _qbe_quadrature(model, path, prior_f, l_hat, nodes_per_axis):
    nodes, wts = _qbe_nodes(model.param_space, nodes_per_axis)
    theta_t, log_norm = _qbe_at_nodes(model, path, prior_f, l_hat, nodes, wts)
    # Error estimate: compare against the half-resolution rule.
    half_n = max(nodes_per_axis // 2, 4)
    nodes2, wts2 = _qbe_nodes(model.param_space, half_n)
    theta2, _ = _qbe_at_nodes(model, path, prior_f, l_hat, nodes2, wts2)
    err = float(np.max(np.abs(theta_t - theta2)))
    return theta_t, log_norm, err


def _qbe_importance(model, path, prior_f, center, opts: QbeOptions):
    # Two-stage Student-t importance sampler.  A pilot pass centered at the
    # QMLE with the inverse observed information as shape locates the posterior
    # bulk; the main pass is recentered and rescaled to the pilot's weighted
    # mean and covariance.  Recentering matters because the posterior mean can
    # sit well away from the QMLE along the weakly identified direction, and
    # the posterior spread there exceeds the observed-information scale.  The
    # heavy t tails keep the weights bounded when the posterior is skewed
    # relative to its Gaussian approximation.
    box = model.param_space
    p = box.dim
    df = 4.0
    rng = np.random.default_rng(np.random.SeedSequence((opts.seed, 0x15)))
    n_info = model.n * center.observed_info
    try:
        cov = np.linalg.inv(0.5 * (n_info + n_info.T)) * 1.5**2
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        cov = np.diag(((box.upper - box.lower) / 6.0) ** 2)
    mean = center.theta_hat
    n_pilot = opts.n_draws // 3
    for stage, n_stage in ((0, n_pilot), (1, opts.n_draws - n_pilot)):
        L = np.linalg.cholesky(cov)
        z = rng.standard_normal((n_stage, p))
        u = rng.chisquare(df, size=n_stage)
        draws = mean + (z @ L.T) * np.sqrt(df / u)[:, None]
        inside = np.all((draws >= box.lower) & (draws <= box.upper), axis=1)
        draws = draws[inside]
        if draws.shape[0] < 16:
            raise EstimationError("importance proposal misses the box")
        logl = loglik_many(model, draws, path)
        dev = np.linalg.solve(L, (draws - mean).T)
        q2 = np.sum(dev**2, axis=0)
        logq = -0.5 * (df + p) * np.log1p(q2 / df)  # constants cancel
        logw = logl - logq + np.log(prior_f(draws))
        m = float(np.max(logw[np.isfinite(logw)]))
        w = np.exp(np.where(np.isfinite(logw), logw, -np.inf) - m)
        sw = float(np.sum(w))
        if sw <= 0.0:
            raise EstimationError("QBE importance weights underflowed")
        wn = w / sw
        theta_t = wn @ draws
        if stage == 0:
            spread = ((draws - theta_t) * wn[:, None]).T @ (draws - theta_t)
            mean = theta_t
            # Inflate and blend with the pilot shape so a degenerate pilot
            # cannot collapse the main proposal.
            cov = spread * 1.3**2 + 0.1 * cov
    # Self-normalized IS standard error per coordinate, max over coordinates.
    dev = draws - theta_t
    var = np.einsum("m,mk->k", wn**2, dev**2)
    err = float(np.sqrt(np.max(var)))
    log_norm = np.log(sw / draws.shape[0]) + m
    return theta_t, log_norm, err


# ---------------------------------------------------------------------------
# Confidence regions.


@dataclass
class ConfidenceRegion:
    level: float
    intervals: np.ndarray  # (p, 2)
    ellipsoid_center: np.ndarray
    ellipsoid_matrix: np.ndarray  # n * Gamma_n(theta_hat)
    ellipsoid_radius_sq: float


def confidence_region(result: QmleResult, level: float, n: int | None = None) -> ConfidenceRegion:
    """Per-coordinate Wald intervals and the observed-information ellipsoid."""
    info = result.observed_info
    eigs = np.linalg.eigvalsh(0.5 * (info + info.T))
    if np.min(eigs) <= 0:
        raise EstimationError("observed information not positive definite")
    p = result.theta_hat.size
    z = stats.norm.ppf(0.5 * (1.0 + level)) if level > 0 else 0.0
    half = z * result.stderr
    intervals = np.stack([result.theta_hat - half, result.theta_hat + half], axis=1)
    radius = stats.chi2.ppf(level, df=p) if level > 0 else 0.0
    return ConfidenceRegion(
        level=level,
        intervals=intervals,
        ellipsoid_center=result.theta_hat.copy(),
        ellipsoid_matrix=info,
        ellipsoid_radius_sq=float(radius),
    )
