"""Large-n limit quantities: limit intensity, information matrix, identifiability.

The limit intensity solves the linear Volterra equation

    lambda_inf(t, theta*) = g(t, theta*) + int_{t_hat0}^t K(t, s, theta*) lambda_inf(s, theta*) ds

in the self-exciting case, and at a general theta is the explicit integral of
lambda_inf(., theta*) against K(., ., theta).  For exponential kernels both
admit closed forms through the operator G(M)_t = e^{tM} int e^{-sM} g*_s ds.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy import integrate, linalg, signal

from .model import (
    ExponentialKernel,
    ModelSpec,
    PowerLawExpKernel,
    TabulatedKernel,
    ZeroKernel,
)

__all__ = [
    "LimitIntensity",
    "GammaMatrix",
    "IdentifiabilityReport",
    "AsymptoticsError",
    "limit_intensity_volterra",
    "limit_intensity_exp_analytic",
    "limit_intensity_theta",
    "g_operator",
    "poly_coeffs_c",
    "gamma_matrix",
    "check_identifiability_M",
    "y_limit",
    "y_limit_and_chi0",
]

_COND_MAX = 1e12


class AsymptoticsError(RuntimeError):
    pass


@dataclass
class LimitIntensity:
    grid: np.ndarray  # uniform grid on [t_hat0, t1]
    values: np.ndarray  # (nt, d)
    dvalues: np.ndarray | None  # (nt, d, p) or None
    provenance: str  # "analytic" | "volterra"
    theta: np.ndarray


@dataclass
class GammaMatrix:
    gamma: np.ndarray
    min_eigenvalue: float


def _grid(model: ModelSpec, npoints: int) -> np.ndarray:
    h = model.horizon
    return np.linspace(h.t_hat0, h.t1, npoints)


def _poly_coeffs(model: ModelSpec, gamma) -> np.ndarray | None:
    """Baseline coefficients a_l (powers of t), shape (deg+1, d), or None."""
    maps = model.baseline.poly_coeff_maps()
    if maps is None:
        return None
    return np.einsum("lij,j->li", maps, np.asarray(gamma, dtype=float))


def _poly_eval(coeffs: np.ndarray, t: np.ndarray) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((t.size, coeffs.shape[1]))
    for ell in range(coeffs.shape[0]):
        out += np.outer(t**ell, coeffs[ell])
    return out


def _invertible(M: np.ndarray) -> bool:
    M = np.atleast_2d(M)
    try:
        return np.linalg.cond(M) < _COND_MAX
    except np.linalg.LinAlgError:
        return False


# ---------------------------------------------------------------------------
# Polynomial coefficients c_l(M) of the integrating-factor representation.


def poly_coeffs_c(M, poly_coeffs: np.ndarray, t_hat0: float) -> list:
    """Vectors c_l with d/ds [ sum_l (s-t_hat0)^l e^{-(s-t_hat0)M} c_l ] = e^{-(s-t_hat0)M} g*_s.

    poly_coeffs holds g* in powers of t, shape (deg+1, d).  Solved by the
    top-down triangular recursion  (l+1) c_{l+1} - M c_l = b_l  with b_l the
    coefficients of g* in powers of (s - t_hat0); requires M invertible.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not _invertible(M):
        raise AsymptoticsError("poly_coeffs_c requires an invertible matrix")
    deg = poly_coeffs.shape[0] - 1
    d = poly_coeffs.shape[1]
    # Shift to powers of tau = s - t_hat0.
    b = np.zeros_like(poly_coeffs)
    for k in range(deg + 1):
        for ell in range(k, deg + 1):
            b[k] += comb(ell, k) * t_hat0 ** (ell - k) * poly_coeffs[ell]
    Minv = np.linalg.inv(M)
    c = [np.zeros(d) for _ in range(deg + 2)]
    for ell in range(deg, -1, -1):
        c[ell] = Minv @ ((ell + 1) * c[ell + 1] - b[ell])
    c = c[: deg + 1]
    # Consistency identity: g*(t_hat0) = c_1 - M c_0.
    g0 = b[0]
    c1 = c[1] if deg >= 1 else np.zeros(d)
    resid = np.max(np.abs(c1 - M @ c[0] - g0))
    scale = 1.0 + np.max(np.abs(g0))
    if resid > 1e-10 * scale:
        raise AsymptoticsError(f"c_l recursion inconsistent: residual {resid:.3g}")
    return c


# ---------------------------------------------------------------------------
# G operator.


def _expm_grid(M: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """e^{(t - grid[0]) M} for every grid point; shape (nt, d, d)."""
    d = M.shape[0]
    h = grid[1] - grid[0]
    Eh = linalg.expm(h * M)
    out = np.empty((grid.size, d, d))
    out[0] = np.eye(d)
    for i in range(1, grid.size):
        out[i] = out[i - 1] @ Eh
    return out


def g_operator(M, baseline, gamma, grid: np.ndarray) -> np.ndarray:
    """G(M)_t = e^{tM} int_{t_hat0}^t e^{-sM} g*(s) ds on the grid; shape (nt, d).

    Closed form via the c_l recursion for polynomial baselines and invertible
    M; fourth-order Runge-Kutta integration of G' = M G + g* otherwise.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    d = baseline.d
    gamma = np.asarray(gamma, dtype=float)
    poly = None
    maps = baseline.poly_coeff_maps()
    if maps is not None:
        poly = np.einsum("lij,j->li", maps, gamma)
    if poly is not None and _invertible(M):
        c = poly_coeffs_c(M, poly, float(grid[0]))
        tau = grid - grid[0]
        E = _expm_grid(M, grid)
        G = np.zeros((grid.size, d))
        for ell, cl in enumerate(c):
            G += np.outer(tau**ell, cl)
        G -= np.einsum("tij,j->ti", E, c[0])
        return G
    # RK4 on G' = M G + g*(t).
    G = np.zeros((grid.size, d))
    hstep = grid[1] - grid[0]

    def rhs(t, y):
        return M @ y + baseline.value(t, gamma)

    y = np.zeros(d)
    for i in range(1, grid.size):
        t = grid[i - 1]
        k1 = rhs(t, y)
        k2 = rhs(t + hstep / 2, y + hstep / 2 * k1)
        k3 = rhs(t + hstep / 2, y + hstep / 2 * k2)
        k4 = rhs(t + hstep, y + hstep * k3)
        y = y + hstep / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        G[i] = y
    return G


def _g_operator_db(b: float, baseline, gamma, grid: np.ndarray) -> np.ndarray:
    """d/db G(-bI)_t = -int (t-s) e^{-b(t-s)} g*(s) ds via convolution quadrature."""
    gvals = baseline.value(grid, gamma)  # (nt, d)
    tau = grid - grid[0]
    ker = -tau * np.exp(-b * tau)
    return _conv_quad(ker, gvals, grid[1] - grid[0])


def _conv_quad(ker: np.ndarray, vals: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid int_0^t ker(t-s) vals(s) ds on a uniform grid; shape like vals."""
    nt, d = vals.shape
    out = np.empty((nt, d))
    for a in range(d):
        full = signal.fftconvolve(ker, vals[:, a])[:nt]
        full -= 0.5 * (ker * vals[0, a] + ker[0] * vals[:, a])
        out[:, a] = h * full
    return out


# ---------------------------------------------------------------------------
# Volterra fixed point at theta*.


def _exp_parts(model: ModelSpec, theta):
    gamma, kpar = model.split_theta(np.asarray(theta, dtype=float))
    b, A = model.kernel.split(kpar)
    return gamma, b, A


def _kernel_lag_values(model: ModelSpec, kpar, tau: np.ndarray) -> np.ndarray:
    """K on a lag grid for difference kernels; shape (nt, d, d0)."""
    if isinstance(model.kernel, ZeroKernel):
        return np.zeros((tau.size, model.d, model.d0))
    return model.kernel.matrix(tau, kpar)


def limit_intensity_volterra(
    model: ModelSpec,
    theta_star,
    h: float | None = None,
    npoints: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    refine: int = 4,
) -> LimitIntensity:
    """Solve lambda = g + int K lambda ds by trapezoid-discretized Picard iteration.

    The iteration runs on an internally refined grid (factor `refine`) and the
    result is subsampled back, so the discretization error at the requested
    step h is that of step h / refine.
    """
    if model.covariate.variant != "self_exciting":
        raise AsymptoticsError("the Volterra fixed point assumes a self-exciting covariate")
    hz = model.horizon
    if npoints is None:
        if h is None:
            npoints = 4097
        else:
            npoints = int(round((hz.t1 - hz.t_hat0) / h)) + 1
    if refine > 1 and not isinstance(model.kernel, TabulatedKernel):
        fine = limit_intensity_volterra(
            model, theta_star, npoints=(npoints - 1) * refine + 1,
            tol=tol, max_iter=max_iter, refine=1,
        )
        return LimitIntensity(
            grid=fine.grid[::refine], values=fine.values[::refine],
            dvalues=None, provenance="volterra", theta=fine.theta,
        )
    grid = _grid(model, npoints)
    hstep = grid[1] - grid[0]
    theta_star = np.asarray(theta_star, dtype=float)
    gamma, kpar = model.split_theta(theta_star)
    gvals = model.baseline.value(grid, gamma)  # (nt, d)

    tab = isinstance(model.kernel, TabulatedKernel)
    if tab:
        if grid.size > 1025:
            raise AsymptoticsError("tabulated-kernel Volterra limited to <= 1025 grid points")
        Kfull = np.empty((grid.size, grid.size, model.d, model.d))
        for i, t in enumerate(grid):
            Kfull[i] = model.kernel.full(float(t), grid).reshape(grid.size, model.d, model.d)
    else:
        tau = grid - grid[0]
        Klag = _kernel_lag_values(model, kpar, tau)  # (nt, d, d)

    lam = gvals.copy()
    for _ in range(max_iter):
        if tab:
            integ = np.empty_like(lam)
            for i in range(grid.size):
                prod = np.einsum("sij,sj->si", Kfull[i, : i + 1], lam[: i + 1])
                integ[i] = np.trapezoid(prod, dx=hstep, axis=0) if i > 0 else 0.0
        else:
            integ = np.zeros_like(lam)
            for a in range(model.d):
                for bcol in range(model.d):
                    ker = Klag[:, a, bcol]
                    integ[:, a] += _conv_quad(ker, lam[:, bcol : bcol + 1], hstep)[:, 0]
        new = gvals + integ
        delta = float(np.max(np.abs(new - lam)))
        lam = new
        if delta <= tol:
            break
    else:
        raise AsymptoticsError(
            f"Volterra iteration did not converge (last change {delta:.3g})"
        )
    return LimitIntensity(grid=grid, values=lam, dvalues=None, provenance="volterra",
                          theta=theta_star)


# ---------------------------------------------------------------------------
# Analytic limit intensity for exponential kernels.


def limit_intensity_exp_analytic(
    model: ModelSpec, theta_star, npoints: int = 4097
) -> LimitIntensity:
    """lambda_inf(t, theta*) = g*(t) + A* G(C*)_t, with derivatives at theta*.

    d(gamma): baseline coefficient rows; d(b): G(-b*I) - G(C*);
    d(A_{a,b}): row a picks coordinate b of G(C*).
    """
    if not isinstance(model.kernel, ExponentialKernel):
        raise AsymptoticsError("analytic limit intensity needs an exponential kernel")
    theta_star = np.asarray(theta_star, dtype=float)
    gamma, b, A = _exp_parts(model, theta_star)
    d = model.d
    C = A - b * np.eye(d)
    grid = _grid(model, npoints)
    gvals = model.baseline.value(grid, gamma)
    GC = g_operator(C, model.baseline, gamma, grid)  # (nt, d)
    values = gvals + GC @ A.T

    Gb = g_operator(-b * np.eye(d), model.baseline, gamma, grid)
    pg = model.baseline.n_params
    p = model.p
    dvalues = np.zeros((grid.size, d, p))
    Bm = model.baseline.coeff_matrix(grid)  # (nt, d, pg)
    dvalues[:, :, :pg] = Bm
    dvalues[:, :, pg] = Gb - GC
    for a in range(d):
        dvalues[:, a, pg + 1 + a * d : pg + 1 + (a + 1) * d] = GC
    return LimitIntensity(grid=grid, values=values, dvalues=dvalues,
                          provenance="analytic", theta=theta_star)


def limit_intensity_theta(
    model: ModelSpec, theta, lim_star: LimitIntensity
) -> LimitIntensity:
    """lambda_inf(t, theta) = g(t, gamma) + int K(t, s, theta) lambda_inf(s, theta*) ds.

    Exponential kernels use the closed-form representation through G(-bI) and
    G(C*) when bI + C* is invertible; otherwise (and for other kernels) a
    direct convolution quadrature of lim_star is used.
    """
    theta = np.asarray(theta, dtype=float)
    grid = lim_star.grid
    hstep = grid[1] - grid[0]
    gamma_s, kpar_s = model.split_theta(lim_star.theta)
    gamma, kpar = model.split_theta(theta)
    pg = model.baseline.n_params
    p = model.p
    d = model.d
    gvals = model.baseline.value(grid, gamma)
    Bm = model.baseline.coeff_matrix(grid)

    if isinstance(model.kernel, ExponentialKernel):
        b_s, A_s = model.kernel.split(kpar_s)
        b, A = model.kernel.split(kpar)
        C_s = A_s - b_s * np.eye(d)
        BC = b * np.eye(d) + C_s
        if _invertible(BC):
            BCinv = np.linalg.inv(BC)
            Gb = g_operator(-b * np.eye(d), model.baseline, gamma_s, grid)  # (nt, d)
            GC = g_operator(C_s, model.baseline, gamma_s, grid)
            v = (b - b_s) * (Gb @ BCinv.T) + (GC @ (BCinv @ A_s).T)  # (nt, d)
            values = gvals + v @ A.T
            dvalues = np.zeros((grid.size, d, p))
            dvalues[:, :, :pg] = Bm
            for a in range(d):
                dvalues[:, a, pg + 1 + a * d : pg + 1 + (a + 1) * d] = v
            # b-derivative: product rule through (b - b_s), (bI + C_s)^{-1}, G(-bI).
            dGb = _g_operator_db(b, model.baseline, gamma_s, grid)
            term1 = Gb @ BCinv.T
            term2 = (b - b_s) * (
                dGb @ BCinv.T - Gb @ (BCinv @ BCinv).T
            )
            term3 = -(GC @ (BCinv @ BCinv @ A_s).T)
            dvalues[:, :, pg] = (term1 + term2 + term3) @ A.T
            return LimitIntensity(grid=grid, values=values, dvalues=dvalues,
                                  provenance="analytic", theta=theta)

    # Quadrature fallback: convolution against the precomputed lim_star values.
    tau = grid - grid[0]
    lam_s = lim_star.values
    if isinstance(model.kernel, ZeroKernel):
        values = gvals
        dvalues = np.zeros((grid.size, d, p))
        dvalues[:, :, :pg] = Bm
        return LimitIntensity(grid, values, dvalues, "analytic", theta)
    if isinstance(model.kernel, TabulatedKernel):
        raise AsymptoticsError("limit_intensity_theta needs a difference kernel")
    Klag = model.kernel.matrix(tau, kpar)  # (nt, d, d0)
    kcontrib = np.zeros((grid.size, d))
    for a in range(d):
        for bcol in range(model.d0):
            kcontrib[:, a] += _conv_quad(
                Klag[:, a, bcol], lam_s[:, bcol : bcol + 1], hstep
            )[:, 0]
    values = gvals + kcontrib
    dvalues = np.zeros((grid.size, d, p))
    dvalues[:, :, :pg] = Bm
    if isinstance(model.kernel, ExponentialKernel):
        b, A = model.kernel.split(kpar)
        e = np.exp(-b * tau)
        S0 = np.zeros((grid.size, model.d0))
        S1 = np.zeros((grid.size, model.d0))
        for bcol in range(model.d0):
            S0[:, bcol] = _conv_quad(e, lam_s[:, bcol : bcol + 1], hstep)[:, 0]
            S1[:, bcol] = _conv_quad(tau * e, lam_s[:, bcol : bcol + 1], hstep)[:, 0]
        dvalues[:, :, pg] = -(S1 @ A.T)
        for a in range(d):
            dvalues[:, a, pg + 1 + a * model.d0 : pg + 1 + (a + 1) * model.d0] = S0
    elif isinstance(model.kernel, PowerLawExpKernel):
        gsc = model.kernel.scalar_d1(tau, kpar)  # (nt, 3)
        W = model.kernel.weight()
        lam_sum = np.zeros((grid.size, d))
        for a in range(d):
            for bcol in range(model.d0):
                lam_sum[:, a] += W[a, bcol] * lam_s[:, bcol]
        for r in range(3):
            for a in range(d):
                dvalues[:, a, pg + r] = _conv_quad(
                    gsc[:, r], lam_sum[:, a : a + 1], hstep
                )[:, 0]
    return LimitIntensity(grid, values, dvalues, "volterra", theta)


# ---------------------------------------------------------------------------
# Window integration helpers (grids start at t_hat0; integrals run from t0).


def _window_integral(grid: np.ndarray, vals: np.ndarray, t0: float) -> np.ndarray:
    """Simpson integral of vals over [t0, grid[-1]] along axis 0."""
    i0 = int(np.searchsorted(grid, t0, side="left"))
    main = integrate.simpson(vals[i0:], x=grid[i0:], axis=0) if grid.size - i0 >= 2 else 0.0
    if i0 > 0 and grid[i0] > t0:
        # linear sliver between t0 and the first grid point >= t0
        w = grid[i0] - t0
        frac = (t0 - grid[i0 - 1]) / (grid[i0] - grid[i0 - 1])
        v0 = vals[i0 - 1] + frac * (vals[i0] - vals[i0 - 1])
        main = main + 0.5 * w * (v0 + vals[i0])
    return main


# ---------------------------------------------------------------------------
# Information matrix.


def gamma_matrix(lim: LimitIntensity, t0: float) -> GammaMatrix:
    """Gamma = sum_alpha int (d lambda^alpha)^x2 / lambda^alpha (t, theta*) dt."""
    if lim.dvalues is None:
        raise AsymptoticsError("gamma_matrix needs a limit intensity with derivatives")
    lam = lim.values
    if np.any(lam[lim.grid >= t0] <= 0):
        bad = np.argwhere(lam <= 0)
        i, a = bad[0]
        raise AsymptoticsError(
            f"degenerate model: lambda_inf zero at t={lim.grid[i]:.6g}, component {a}"
        )
    nt, d, p = lim.dvalues.shape
    integrand = np.einsum("tai,taj->tij", lim.dvalues, lim.dvalues / lam[:, :, None])
    G = _window_integral(lim.grid, integrand, t0)
    G = 0.5 * (G + G.T)
    return GammaMatrix(gamma=G, min_eigenvalue=float(np.min(np.linalg.eigvalsh(G))))


# ---------------------------------------------------------------------------
# Limit field Y and the nondegeneracy index chi0.


def y_limit(model: ModelSpec, lim_star: LimitIntensity, theta) -> float:
    """Y(theta) = -sum_alpha int [l(th) - l(*) - log(l(th)/l(*)) l(*)] dt (<= 0)."""
    lim = limit_intensity_theta(model, theta, lim_star)
    return _y_from_values(model, lim_star, lim.values)


def _y_from_values(model: ModelSpec, lim_star: LimitIntensity, values: np.ndarray) -> float:
    lam_s = lim_star.values
    t0 = model.horizon.t0
    win = lim_star.grid >= t0
    if np.any((values[win] <= 0) & (lam_s[win] > 0)):
        raise AsymptoticsError("degenerate model: zero-intensity sets differ across theta")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lam_s > 0, values / np.where(lam_s > 0, lam_s, 1.0), 1.0)
        integrand = values - lam_s - np.log(ratio) * lam_s
    total = _window_integral(lim_star.grid, integrand.sum(axis=1), t0)
    return -float(total)


@dataclass
class Chi0Result:
    chi0: float
    argmin: np.ndarray
    y_values: np.ndarray
    theta_grid: np.ndarray


def y_limit_and_chi0(
    model: ModelSpec,
    theta_star,
    lim_star: LimitIntensity | None = None,
    points_per_axis: int = 41,
    refine: bool = True,
) -> Chi0Result:
    """Dense-grid estimate of chi0 = inf over theta != theta* of -Y(theta)/|theta-theta*|^2."""
    theta_star = np.asarray(theta_star, dtype=float)
    if lim_star is None:
        if isinstance(model.kernel, ExponentialKernel):
            lim_star = limit_intensity_exp_analytic(model, theta_star, npoints=1025)
        else:
            lim_star = limit_intensity_volterra(model, theta_star, npoints=1025)
    box = model.param_space
    axes = [np.linspace(box.lower[k], box.upper[k], points_per_axis) for k in range(box.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    thetas = np.stack([m.ravel() for m in mesh], axis=1)

    def eval_ratio(ths):
        ys = np.empty(ths.shape[0])
        ratios = np.full(ths.shape[0], np.inf)
        for i, th in enumerate(ths):
            ys[i] = y_limit(model, lim_star, th)
            dist2 = float(np.sum((th - theta_star) ** 2))
            if dist2 > 1e-16:
                ratios[i] = -ys[i] / dist2
        return ys, ratios

    ys, ratios = eval_ratio(thetas)
    k = int(np.argmin(ratios))
    chi0 = float(ratios[k])
    argmin = thetas[k].copy()
    if refine:
        span = np.array([ax[1] - ax[0] if ax.size > 1 else 0.0 for ax in axes])
        sub_axes = [
            np.linspace(
                max(box.lower[j], argmin[j] - span[j]),
                min(box.upper[j], argmin[j] + span[j]),
                9,
            )
            for j in range(box.dim)
        ]
        sub = np.stack([m.ravel() for m in np.meshgrid(*sub_axes, indexing="ij")], axis=1)
        _, sub_r = eval_ratio(sub)
        j = int(np.argmin(sub_r))
        if sub_r[j] < chi0:
            chi0 = float(sub_r[j])
            argmin = sub[j].copy()
    return Chi0Result(chi0=chi0, argmin=argmin, y_values=ys, theta_grid=thetas)


# ---------------------------------------------------------------------------
# Identifiability condition for the two-dimensional exponential-kernel model.


@dataclass
class ConditionResult:
    name: str
    passed: bool
    witness: object = None
    detail: str = ""


@dataclass
class IdentifiabilityReport:
    conditions: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self):
        return "\n".join(
            f"({c.name}) {'pass' if c.passed else 'FAIL'}: {c.detail}"
            for c in self.conditions
        )


def check_identifiability_M(
    model: ModelSpec, theta_star, n_grid: int = 41
) -> IdentifiabilityReport:
    """Numerical screening of the seven-part identifiability condition.

    Applies to the two-dimensional exponential-kernel model with a polynomial
    baseline.  Structural quantities (determinants, the c_0 vectors, the
    eigenvector test) are evaluated along the b-range of the box with the
    kernel matrix fixed at its true value.
    """
    if model.d != 2 or not isinstance(model.kernel, ExponentialKernel):
        raise AsymptoticsError("identifiability check targets the 2D exponential model")
    poly_maps = model.baseline.poly_coeff_maps()
    if poly_maps is None:
        raise AsymptoticsError("identifiability check needs a polynomial-type baseline")
    theta_star = np.asarray(theta_star, dtype=float)
    gamma_s, b_s, A_s = _exp_parts(model, theta_star)
    d = model.d
    C_s = A_s - b_s * np.eye(d)
    pg = model.baseline.n_params
    box = model.param_space
    h = model.horizon
    b_grid = np.linspace(box.lower[pg], box.upper[pg], n_grid)
    if not np.any(np.isclose(b_grid, b_s)):
        b_grid = np.sort(np.append(b_grid, b_s))
    poly_s = _poly_coeffs(model, gamma_s)
    conds = []

    # (i) b bounded away from zero on the box.
    min_abs_b = float(np.min(np.abs(b_grid)))
    conds.append(
        ConditionResult("i", min_abs_b > 1e-12, min_abs_b, f"min |b| = {min_abs_b:.6g}")
    )

    # (ii) C* and bI + C* invertible over the b-range.
    det_C = float(np.linalg.det(C_s))
    dets = np.array([np.linalg.det(b * np.eye(d) + C_s) for b in b_grid])
    worst = float(np.min(np.abs(dets)))
    wit_b = float(b_grid[int(np.argmin(np.abs(dets)))])
    ok = abs(det_C) > 1e-12 and worst > 1e-12
    conds.append(
        ConditionResult(
            "ii",
            ok,
            {"det_C": det_C, "min_abs_det_bC": worst, "witness_b": wit_b},
            f"det C* = {det_C:.6g}, min |det(bI+C*)| = {worst:.6g} at b = {wit_b:.6g}",
        )
    )

    # (iii) c_0(-bI) != 0 over the b-range.
    norms = []
    for b in b_grid:
        if abs(b) < 1e-12:
            norms.append(0.0)
            continue
        c = poly_coeffs_c(-b * np.eye(d), poly_s, h.t_hat0)
        norms.append(float(np.linalg.norm(c[0])))
    min_norm = float(np.min(norms))
    conds.append(
        ConditionResult("iii", min_norm > 1e-12, min_norm, f"min |c0(-bI)| = {min_norm:.6g}")
    )

    # (iv) c_0(C*) is not an eigenvector of C*: normalized cross term.
    if _invertible(C_s):
        c0 = poly_coeffs_c(C_s, poly_s, h.t_hat0)[0]
        v = C_s @ c0
        cross = abs(c0[0] * v[1] - c0[1] * v[0])
        denom = np.linalg.norm(c0) * np.linalg.norm(v)
        val = cross / denom if denom > 0 else 0.0
        conds.append(
            ConditionResult("iv", val > 1e-8, val, f"normalized cross term = {val:.6g}")
        )
    else:
        conds.append(ConditionResult("iv", False, None, "C* singular; test undefined"))

    # (v) injectivity of the coefficient map gamma -> (a_l): rank of the linear map.
    flat = poly_maps.reshape(-1, pg)
    rank = int(np.linalg.matrix_rank(flat, tol=1e-10))
    conds.append(
        ConditionResult("v", rank == pg, rank, f"coefficient-map rank {rank} of {pg}")
    )

    # (vi) inf g > 0 over the window and box probes.
    tgrid = np.linspace(h.t0, h.t1, 257)
    rng = np.random.default_rng(1)
    probes = [gamma_s, box.lower[:pg], box.upper[:pg]] + [
        box.sample(rng)[:pg] for _ in range(32)
    ]
    inf_g = min(float(np.min(model.baseline.value(tgrid, gg))) for gg in probes)
    conds.append(ConditionResult("vi", inf_g > 0, inf_g, f"inf g = {inf_g:.6g}"))

    # (vii) no direction x has d_gamma g(t) . x = 0 for every t: the Gram
    # matrix of the baseline gradients accumulated over the window is PD.
    B = model.baseline.coeff_matrix(tgrid)  # (nt, d, pg)
    gram = np.einsum("tai,taj->ij", B, B) / tgrid.size
    mineig = float(np.min(np.linalg.eigvalsh(gram)))
    conds.append(
        ConditionResult(
            "vii",
            mineig > 1e-10,
            mineig,
            f"baseline-gradient Gram min eigenvalue {mineig:.6g} over the window",
        )
    )
    return IdentifiabilityReport(conditions=conds)
