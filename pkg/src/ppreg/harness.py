"""Monte Carlo study engine: simulate, estimate, compare against the limit law.

The central claim under test is that sqrt(n) (theta_hat - theta*) converges,
in law and in moments, to a centered Gaussian with covariance Gamma^{-1},
where Gamma is the limit information matrix computed by the asymptotics
layer.  The engine also probes the polynomial large-deviation tail of the
likelihood-ratio random field.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy
from scipy import stats

from . import estimate, likelihood, simulate as sim
from .asymptotics import (
    AsymptoticsError,
    LimitIntensity,
    gamma_matrix,
    limit_intensity_exp_analytic,
    limit_intensity_theta,
    limit_intensity_volterra,
)
from .model import ExponentialKernel, ModelSpec, ZeroKernel, model_to_json

__all__ = [
    "McConfig",
    "McNResult",
    "McSummary",
    "HarnessError",
    "mc_study",
    "pldi_probe",
    "PldiTable",
    "gaussian_norm_moments",
    "anderson_darling_normal",
    "wilson_interval",
    "limit_information",
    "export",
    "import_summary",
]


class HarnessError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Configuration.


@dataclass(frozen=True)
class McConfig:
    theta_star: tuple
    n_values: tuple
    replicates: int = 500
    estimators: tuple = ("qmle", "qbe")
    seed: int = 0
    moment_orders: tuple = (1, 2, 4)
    out_dir: str | None = None
    sim_method: str = "thinning"
    qbe_method: str = "auto"
    qbe_draws: int = 2000
    qmle_starts: int = 4
    ci_level: float = 0.95
    max_failure_rate: float = 0.2
    model_file: str | None = None

    def __post_init__(self):
        if self.replicates < 2:
            raise HarnessError("need at least 2 replicates")
        nv = tuple(int(n) for n in self.n_values)
        if any(b <= a for a, b in zip(nv, nv[1:])):
            raise HarnessError("n_values must be strictly increasing")
        object.__setattr__(self, "n_values", nv)
        object.__setattr__(self, "theta_star", tuple(float(x) for x in self.theta_star))
        bad = set(self.estimators) - {"qmle", "qbe"}
        if bad:
            raise HarnessError(f"unknown estimators {sorted(bad)}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def config_hash(model: ModelSpec, config: McConfig) -> str:
    doc = {"model": json.loads(model_to_json(model)), "config": config.to_dict()}
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# Limit quantities.


def limit_information(model: ModelSpec, theta_star, npoints: int = 2049):
    """(Gamma, lim_star) from the appropriate limit-intensity route."""
    theta_star = np.asarray(theta_star, dtype=float)
    if isinstance(model.kernel, ExponentialKernel):
        lim = limit_intensity_exp_analytic(model, theta_star, npoints=npoints)
    elif isinstance(model.kernel, ZeroKernel):
        grid = np.linspace(model.horizon.t_hat0, model.horizon.t1, npoints)
        gamma, _ = model.split_theta(theta_star)
        values = model.baseline.value(grid, gamma)
        dvalues = np.zeros((grid.size, model.d, model.p))
        dvalues[:, :, : model.baseline.n_params] = model.baseline.coeff_matrix(grid)
        lim = LimitIntensity(grid, values, dvalues, "analytic", theta_star)
    else:
        base = limit_intensity_volterra(model, theta_star, npoints=min(npoints, 4097))
        lim = limit_intensity_theta(model, theta_star, base)
    G = gamma_matrix(lim, model.horizon.t0)
    if G.min_eigenvalue <= 0:
        raise HarnessError(f"limit information not positive definite ({G.min_eigenvalue:.3g})")
    return G.gamma, lim


def gaussian_norm_moments(
    Sigma: np.ndarray, orders, n_mc: int = 1_000_000, seed: int = 12345
) -> dict:
    """E |Z|^k for Z ~ N(0, Sigma); exact for k in {2, 4} and for k=1 in 1D."""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    p = Sigma.shape[0]
    out = {}
    mc_orders = []
    for k in orders:
        if k == 2:
            out[k] = float(np.trace(Sigma))
        elif k == 4:
            tr = float(np.trace(Sigma))
            out[k] = tr * tr + 2.0 * float(np.trace(Sigma @ Sigma))
        elif k == 1 and p == 1:
            out[k] = math.sqrt(2.0 * Sigma[0, 0] / math.pi)
        else:
            mc_orders.append(k)
    if mc_orders:
        rng = np.random.default_rng(seed)
        L = np.linalg.cholesky(Sigma)
        norms = np.linalg.norm(rng.standard_normal((n_mc, p)) @ L.T, axis=1)
        for k in mc_orders:
            out[k] = float(np.mean(norms**k))
    return out


# ---------------------------------------------------------------------------
# Anderson-Darling against the standard normal (fully specified null).


def _adinf(z: float) -> float:
    """Limit CDF of the Anderson-Darling statistic (Marsaglia approximation)."""
    if z <= 0:
        return 0.0
    if z < 2.0:
        return (
            math.exp(-1.2337141 / z)
            / math.sqrt(z)
            * (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
        )
    return math.exp(
        -math.exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z)
    )


def anderson_darling_normal(x) -> tuple:
    """(A2, p_value) for x against N(0, 1), fully specified."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    if n < 8:
        raise HarnessError("Anderson-Darling needs at least 8 observations")
    u = stats.norm.cdf(x)
    eps = 1e-15
    u = np.clip(u, eps, 1.0 - eps)
    i = np.arange(1, n + 1)
    A2 = -n - np.mean((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1])))
    return float(A2), float(1.0 - _adinf(float(A2)))


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple:
    if n == 0:
        return (0.0, 1.0)
    z = stats.norm.ppf(0.5 + level / 2.0)
    ph = k / n
    denom = 1.0 + z * z / n
    center = (ph + z * z / (2 * n)) / denom
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


# ---------------------------------------------------------------------------
# Study results.


@dataclass
class McNResult:
    n: int
    n_ok: int
    n_failed: int
    bias: list  # mean of theta_hat - theta*
    cov: list  # empirical covariance of sqrt(n)(theta_hat - theta*)
    frob_gap: float  # |cov - Gamma^{-1}|_F / |Gamma^{-1}|_F
    obs_info_gap_median: float  # median |Gamma_n(theta_hat) - Gamma|_F / |Gamma|_F
    ad_stats: list
    ad_pvalues: list
    moments_qmle: dict  # k -> E|sqrt(n)(theta_hat - theta*)|^k
    moments_qbe: dict
    ci_coverage: list
    failure_messages: list = field(default_factory=list)


@dataclass
class McSummary:
    config: dict
    config_hash: str
    gamma: list
    gamma_inv: list
    limit_moments: dict
    per_n: list
    versions: dict = field(default_factory=dict)

    def result_for(self, n: int) -> McNResult:
        for r in self.per_n:
            if r.n == n:
                return r
        raise KeyError(n)


def _versions() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def mc_study(model: ModelSpec, config: McConfig) -> McSummary:
    """Simulate, estimate, and compare sqrt(n)-scaled errors to the limit law.

    Deterministic given (model, config): replicate r at scale index i uses the
    seed stream (config.seed, i, r).  Failed replicates are excluded from the
    statistics but counted; a failure rate above config.max_failure_rate at
    any n aborts the study.
    """
    theta_star = np.asarray(config.theta_star, dtype=float)
    Gamma, _ = limit_information(model, theta_star)
    Gamma_inv = np.linalg.inv(Gamma)
    w, V = np.linalg.eigh(Gamma)
    Gamma_half = V @ np.diag(np.sqrt(w)) @ V.T
    limit_moments = gaussian_norm_moments(Gamma_inv, config.moment_orders)
    p = model.p

    per_n = []
    for i, n in enumerate(config.n_values):
        model_n = dataclasses.replace(model, n=int(n))
        errs = []
        errs_qbe = []
        covers = []
        info_gaps = []
        failures = []
        for r in range(config.replicates):
            try:
                path = sim.simulate(
                    model_n,
                    theta_star,
                    sim.SimOptions(seed=(config.seed, i, r), method=config.sim_method),
                )
                res = estimate.qmle(
                    model_n,
                    path,
                    estimate.QmleOptions(n_starts=config.qmle_starts, seed=r),
                )
                if not res.converged:
                    raise estimate.EstimationError("optimizer did not converge")
                errs.append(math.sqrt(n) * (res.theta_hat - theta_star))
                info_gaps.append(
                    np.linalg.norm(res.observed_info - Gamma) / np.linalg.norm(Gamma)
                )
                z = stats.norm.ppf(0.5 + config.ci_level / 2.0)
                covers.append(
                    np.abs(res.theta_hat - theta_star) <= z * res.stderr
                )
                if "qbe" in config.estimators:
                    qres = estimate.qbe(
                        model_n,
                        path,
                        opts=estimate.QbeOptions(
                            method=config.qbe_method,
                            n_draws=config.qbe_draws,
                            seed=r,
                            qmle_result=res,
                        ),
                    )
                    errs_qbe.append(math.sqrt(n) * (qres.theta_tilde - theta_star))
            except Exception as exc:  # noqa: BLE001 - failures are data here
                failures.append(f"n={n} rep={r}: {type(exc).__name__}: {exc}")
        n_failed = len(failures)
        n_ok = config.replicates - n_failed
        if n_failed > config.max_failure_rate * config.replicates:
            raise HarnessError(
                f"failure rate {n_failed}/{config.replicates} at n={n}; "
                + "; ".join(failures[:5])
            )
        E = np.array(errs)
        cov = np.cov(E, rowvar=False).reshape(p, p)
        bias = E.mean(axis=0) / math.sqrt(n)
        std = E @ Gamma_half.T
        ad = [anderson_darling_normal(std[:, j]) for j in range(p)]
        moments_qmle = {
            int(k): float(np.mean(np.linalg.norm(E, axis=1) ** k))
            for k in config.moment_orders
        }
        if errs_qbe:
            Eq = np.array(errs_qbe)
            moments_qbe = {
                int(k): float(np.mean(np.linalg.norm(Eq, axis=1) ** k))
                for k in config.moment_orders
            }
        else:
            moments_qbe = {}
        per_n.append(
            McNResult(
                n=int(n),
                n_ok=n_ok,
                n_failed=n_failed,
                bias=bias.tolist(),
                cov=cov.tolist(),
                frob_gap=float(
                    np.linalg.norm(cov - Gamma_inv) / np.linalg.norm(Gamma_inv)
                ),
                obs_info_gap_median=float(np.median(info_gaps)),
                ad_stats=[a[0] for a in ad],
                ad_pvalues=[a[1] for a in ad],
                moments_qmle=moments_qmle,
                moments_qbe=moments_qbe,
                ci_coverage=np.array(covers).mean(axis=0).tolist(),
                failure_messages=failures,
            )
        )
    return McSummary(
        config=config.to_dict(),
        config_hash=config_hash(model, config),
        gamma=Gamma.tolist(),
        gamma_inv=Gamma_inv.tolist(),
        limit_moments={int(k): v for k, v in limit_moments.items()},
        per_n=per_n,
        versions=_versions(),
    )


# ---------------------------------------------------------------------------
# Polynomial large-deviation probe.


@dataclass
class PldiTable:
    r_values: list
    counts: list  # exceedances of sup Z >= e^{-r} per r
    replicates: int
    probabilities: list
    wilson_lower: list
    wilson_upper: list
    coarse_grid_flags: int  # replicates where refinement beat the grid by > 1e-3 in log

    def monotone_up_to_intervals(self) -> bool:
        """Nonincreasing in r allowing for Wilson interval overlap."""
        for a, b in zip(range(len(self.r_values) - 1), range(1, len(self.r_values))):
            if self.wilson_lower[b] > self.wilson_upper[a]:
                return False
        return True


def pldi_probe(
    model: ModelSpec,
    theta_star,
    n: int,
    r_values,
    replicates: int,
    seed: int = 0,
    points_per_axis: int = 61,
    sim_method: str = "thinning",
) -> PldiTable:
    """Empirical tail of sup over |u| >= r of the likelihood-ratio field Z_n.

    The sup runs over the dense theta-grid image of U_n = sqrt(n)(box -
    theta*), with a local refinement pass around the running maximizer; a
    coarse-grid counter records replicates where refinement moved the log-sup
    by more than 1e-3.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    model_n = dataclasses.replace(model, n=int(n))
    box = model.param_space
    p = box.dim
    if p > 3:
        raise HarnessError("dense-grid sup limited to p <= 3")
    axes = [
        np.linspace(box.lower[k], box.upper[k], points_per_axis) for k in range(p)
    ]
    thetas = np.stack(
        [m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1
    )
    # theta* itself pins the r = 0 boundary case: |u| >= 0 includes u = 0
    # where log Z = 0, so the tail probability at r = 0 is exactly 1.
    thetas = np.vstack([thetas, theta_star])
    sqrt_n = math.sqrt(n)
    unorm = np.linalg.norm(sqrt_n * (thetas - theta_star), axis=1)
    r_values = [float(r) for r in r_values]
    masks = [unorm >= r for r in r_values]
    step = np.array([ax[1] - ax[0] if ax.size > 1 else 0.0 for ax in axes])

    counts = [0 for _ in r_values]
    coarse_flags = 0
    for rep in range(replicates):
        path = sim.simulate(
            model_n, theta_star, sim.SimOptions(seed=(seed, rep), method=sim_method)
        )
        l_star = likelihood.quasi_loglik(model_n, theta_star, path)
        logz = likelihood.loglik_many(model_n, thetas, path) - l_star
        # Refinement around the grid argmax over the outermost mask.
        wide = masks[0] if r_values[0] <= min(r_values) else unorm >= min(r_values)
        k_best = int(np.argmax(np.where(wide, logz, -np.inf)))
        local_axes = [
            np.linspace(
                max(box.lower[j], thetas[k_best, j] - step[j] / 2),
                min(box.upper[j], thetas[k_best, j] + step[j] / 2),
                5,
            )
            for j in range(p)
        ]
        local = np.stack(
            [m.ravel() for m in np.meshgrid(*local_axes, indexing="ij")], axis=1
        )
        logz_local = likelihood.loglik_many(model_n, local, path) - l_star
        if np.max(logz_local) > logz[k_best] + 1e-3:
            coarse_flags += 1
        local_norm = np.linalg.norm(sqrt_n * (local - theta_star), axis=1)
        for j, r in enumerate(r_values):
            sup = -np.inf
            if np.any(masks[j]):
                sup = float(np.max(logz[masks[j]]))
            lm = local_norm >= r
            if np.any(lm):
                sup = max(sup, float(np.max(logz_local[lm])))
            if sup >= -r:
                counts[j] += 1
    probs = [c / replicates for c in counts]
    wl, wu = [], []
    for c in counts:
        lo, hi = wilson_interval(c, replicates)
        wl.append(lo)
        wu.append(hi)
    return PldiTable(
        r_values=r_values,
        counts=counts,
        replicates=replicates,
        probabilities=probs,
        wilson_lower=wl,
        wilson_upper=wu,
        coarse_grid_flags=coarse_flags,
    )


# ---------------------------------------------------------------------------
# Export / import.


def _summary_to_doc(summary: McSummary) -> dict:
    doc = dataclasses.asdict(summary)
    for r in doc["per_n"]:
        r["moments_qmle"] = {str(k): v for k, v in r["moments_qmle"].items()}
        r["moments_qbe"] = {str(k): v for k, v in r["moments_qbe"].items()}
    doc["limit_moments"] = {str(k): v for k, v in doc["limit_moments"].items()}
    return doc


def export(summary: McSummary, out_dir: str) -> list:
    """Write summary.json, long-format stats CSV, and a manifest; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    sp = os.path.join(out_dir, "summary.json")
    with open(sp, "w") as f:
        json.dump(_summary_to_doc(summary), f, indent=2)
    paths.append(sp)

    cp = os.path.join(out_dir, "statistics.csv")
    with open(cp, "w") as f:
        f.write("n,statistic,value\n")
        for r in summary.per_n:
            f.write(f"{r.n},frob_gap,{r.frob_gap:.17g}\n")
            f.write(f"{r.n},obs_info_gap_median,{r.obs_info_gap_median:.17g}\n")
            f.write(f"{r.n},n_failed,{r.n_failed}\n")
            for j, (b, c, pv) in enumerate(zip(r.bias, r.ci_coverage, r.ad_pvalues)):
                f.write(f"{r.n},bias_{j},{b:.17g}\n")
                f.write(f"{r.n},ci_coverage_{j},{c:.17g}\n")
                f.write(f"{r.n},ad_pvalue_{j},{pv:.17g}\n")
            for k, v in r.moments_qmle.items():
                f.write(f"{r.n},moment_qmle_{k},{v:.17g}\n")
            for k, v in r.moments_qbe.items():
                f.write(f"{r.n},moment_qbe_{k},{v:.17g}\n")
    paths.append(cp)

    mp = os.path.join(out_dir, "manifest.json")
    with open(mp, "w") as f:
        json.dump(
            {
                "config_hash": summary.config_hash,
                "seed": summary.config.get("seed"),
                "versions": summary.versions,
                "files": [os.path.basename(x) for x in paths],
            },
            f,
            indent=2,
        )
    paths.append(mp)
    return paths


def import_summary(out_dir: str) -> McSummary:
    with open(os.path.join(out_dir, "summary.json")) as f:
        doc = json.load(f)
    per_n = []
    for r in doc["per_n"]:
        r = dict(r)
        r["moments_qmle"] = {int(k): v for k, v in r["moments_qmle"].items()}
        r["moments_qbe"] = {int(k): v for k, v in r["moments_qbe"].items()}
        per_n.append(McNResult(**r))
    return McSummary(
        config=doc["config"],
        config_hash=doc["config_hash"],
        gamma=doc["gamma"],
        gamma_inv=doc["gamma_inv"],
        limit_moments={int(k): v for k, v in doc["limit_moments"].items()},
        per_n=per_n,
        versions=doc.get("versions", {}),
    )
