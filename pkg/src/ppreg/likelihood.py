"""Quasi log-likelihood, score, Hessian and the local random-field quantities.

The objective is

    l_n(theta) = sum_alpha [ sum_{events t of alpha} log lambda^alpha(t-, theta)
                             - int_{t0}^{t1} n lambda^alpha(t, theta) dt ].

For exponential kernels everything is evaluated in O(total events) through
cumulative sums of exponentially weighted jump contributions; other kernels
fall back to a direct double-sum evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    DomainError,
    ExponentialKernel,
    ModelSpec,
    PowerLawExpKernel,
    TabulatedKernel,
    ZeroKernel,
)
from .simulate import PointPath, _exp_kernel_integral

__all__ = [
    "LikelihoodEval",
    "RandomFieldPoint",
    "loglik_eval",
    "quasi_loglik",
    "score",
    "hessian",
    "gamma_n",
    "loglik_many",
    "random_field_Z",
    "delta_n",
    "lamn_residual",
    "y_field",
]

_TINY = 1e-300


@dataclass
class LikelihoodEval:
    value: float
    gradient: np.ndarray | None
    hessian: np.ndarray | None
    feasible: bool


@dataclass
class RandomFieldPoint:
    u: np.ndarray
    z: float
    log_z: float


def _check_theta(model: ModelSpec, theta) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    if not model.param_space.contains(th, closed=True, tol=1e-12):
        raise DomainError("theta outside the closed parameter box")
    return th


# ---------------------------------------------------------------------------
# Exponential / zero kernel fast path.


def _eval_exp(model: ModelSpec, theta, path: PointPath, order: int) -> LikelihoodEval:
    gamma, kpar = model.split_theta(theta)
    pg = model.baseline.n_params
    p = model.p
    h = model.horizon
    n = model.n
    d = model.d
    zero = isinstance(model.kernel, ZeroKernel)
    if zero:
        b, A = 0.0, np.zeros((d, model.d0))
    else:
        b, A = model.kernel.split(kpar)

    s_j, dx = path.covariate_arrays()
    J = s_j.size

    value = 0.0
    grad = np.zeros(p) if order >= 1 else None
    hess = np.zeros((p, p)) if order >= 2 else None
    feasible = True

    # Prefix sums of exponentially weighted jumps (left limits via side="left").
    if J and not zero:
        ebs = np.exp(b * s_j)
        W0 = np.vstack([np.zeros(model.d0), np.cumsum(ebs[:, None] * dx, axis=0)])
        W1 = np.vstack([np.zeros(model.d0), np.cumsum((s_j * ebs)[:, None] * dx, axis=0)])
        W2 = np.vstack([np.zeros(model.d0), np.cumsum((s_j**2 * ebs)[:, None] * dx, axis=0)])

    for alpha in range(d):
        ev = path.events[alpha]
        E = ev.size
        if E == 0:
            continue
        Bm = model.baseline.coeff_matrix(ev)  # (E, d, pg)
        Brow = Bm[:, alpha, :]  # (E, pg)
        lam = Brow @ gamma
        if J and not zero:
            idx = np.searchsorted(s_j, ev, side="left")
            emt = np.exp(-b * ev)
            S0 = emt[:, None] * W0[idx]  # (E, d0)
            lam = lam + S0 @ A[alpha]
        if np.any(lam <= _TINY):
            return LikelihoodEval(-np.inf, None, None, False)
        value += float(np.sum(np.log(lam)))
        if order >= 1:
            D = np.zeros((E, p))
            D[:, :pg] = Brow
            if J and not zero:
                S1 = ev[:, None] * S0 - emt[:, None] * W1[idx]
                D[:, pg] = -(S1 @ A[alpha])
                D[:, pg + 1 + alpha * model.d0 : pg + 1 + (alpha + 1) * model.d0] = S0
            grad += D.T @ (1.0 / lam)
            if order >= 2:
                Dn = D / lam[:, None]
                hess -= Dn.T @ Dn
                if J and not zero:
                    S2 = (
                        ev[:, None] ** 2 * S0
                        - 2.0 * (ev * emt)[:, None] * W1[idx]
                        + emt[:, None] * W2[idx]
                    )
                    hess[pg, pg] += float(np.sum((S2 @ A[alpha]) / lam))
                    cross = -(S1 / lam[:, None]).sum(axis=0)  # (d0,)
                    sl = slice(pg + 1 + alpha * model.d0, pg + 1 + (alpha + 1) * model.d0)
                    hess[pg, sl] += cross
                    hess[sl, pg] += cross

    # Integral term: n * [ int g + sum_j I_j(b) * 1' A dX_j ].
    BI = model.baseline.coeff_matrix_integral(h.t0, h.t1)  # (d, pg)
    bi_cols = BI.sum(axis=0)  # (pg,)
    value -= n * float(bi_cols @ gamma)
    if order >= 1:
        grad[:pg] -= n * bi_cols

    if J and not zero:
        a_j = np.maximum(s_j, h.t0) - s_j
        c_j = h.t1 - s_j
        I0 = _exp_kernel_integral(b, a_j, c_j)
        R0 = I0 @ dx  # (d0,)
        value -= n * float(np.sum(A @ R0))
        if order >= 1:
            ea = np.exp(-b * a_j)
            ec = np.exp(-b * c_j)
            if abs(b) < 1e-6:
                I1 = -0.5 * (c_j**2 - a_j**2) + (b / 3.0) * (c_j**3 - a_j**3)
                I2 = (c_j**3 - a_j**3) / 3.0 - 0.25 * b * (c_j**4 - a_j**4)
            else:
                f1 = -a_j * ea + c_j * ec
                I1 = f1 / b - I0 / b
                f2 = a_j**2 * ea - c_j**2 * ec
                I2 = f2 / b - 2.0 * I1 / b
            R1 = I1 @ dx
            grad[pg] -= n * float(np.sum(A @ R1))
            for alpha in range(d):
                sl = slice(pg + 1 + alpha * model.d0, pg + 1 + (alpha + 1) * model.d0)
                grad[sl] -= n * R0
            if order >= 2:
                R2 = I2 @ dx
                hess[pg, pg] -= n * float(np.sum(A @ R2))
                for alpha in range(d):
                    sl = slice(pg + 1 + alpha * model.d0, pg + 1 + (alpha + 1) * model.d0)
                    hess[pg, sl] -= n * R1
                    hess[sl, pg] -= n * R1

    if order >= 2:
        hess = 0.5 * (hess + hess.T)
    return LikelihoodEval(value, grad, hess, feasible)


# ---------------------------------------------------------------------------
# Generic kernels: direct sums, Gauss-Legendre for the kernel time integral.

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _plaw_integral_terms(kernel: PowerLawExpKernel, kpar, a, c):
    """int_a^c scalar-shape(u) du and its gradient wrt (c, th1, th2), per jump."""
    mid = 0.5 * (a + c)
    half = 0.5 * (c - a)
    u = mid[:, None] + half[:, None] * _GL_NODES[None, :]  # (J, 64)
    w = half[:, None] * _GL_WEIGHTS[None, :]
    k = kernel.scalar(u, kpar)
    g = kernel.scalar_d1(u, kpar)  # (J, 64, 3)
    I0 = np.sum(w * k, axis=1)
    G = np.einsum("jq,jqr->jr", w, g)
    return I0, G


def _eval_generic(model: ModelSpec, theta, path: PointPath, order: int) -> LikelihoodEval:
    gamma, kpar = model.split_theta(theta)
    pg = model.baseline.n_params
    pk = model.kernel.n_params
    p = model.p
    h = model.horizon
    n = model.n
    d = model.d
    plaw = isinstance(model.kernel, PowerLawExpKernel)
    tab = isinstance(model.kernel, TabulatedKernel)

    s_j, dx = path.covariate_arrays()

    value = 0.0
    grad = np.zeros(p) if order >= 1 else None

    for alpha in range(d):
        for t in path.events[alpha]:
            Brow = model.baseline.coeff_matrix(float(t))[alpha]
            lam = float(Brow @ gamma)
            dk = np.zeros(pk)
            mask = s_j < t
            if np.any(mask):
                if tab:
                    K = model.kernel.full(float(t), s_j[mask])
                    lam += float(np.einsum("mj,mj->", K[:, alpha, :], dx[mask]))
                else:
                    lags = t - s_j[mask]
                    K = model.kernel.matrix(lags, kpar)
                    lam += float(np.einsum("mj,mj->", K[:, alpha, :], dx[mask]))
                    if plaw and order >= 1:
                        gsc = model.kernel.scalar_d1(lags, kpar)  # (m, 3)
                        wrow = model.kernel.weight()[alpha]  # (d0,)
                        dk = gsc.T @ (dx[mask] @ wrow)
            if lam <= _TINY:
                return LikelihoodEval(-np.inf, None, None, False)
            value += np.log(lam)
            if order >= 1:
                grad[:pg] += Brow / lam
                grad[pg:] += dk / lam

    BI = model.baseline.coeff_matrix_integral(h.t0, h.t1)
    bi_cols = BI.sum(axis=0)
    value -= n * float(bi_cols @ gamma)
    if order >= 1:
        grad[:pg] -= n * bi_cols

    if s_j.size:
        a_j = np.maximum(s_j, h.t0)
        if plaw:
            I0, G = _plaw_integral_terms(model.kernel, kpar, a_j - s_j, h.t1 - s_j)
            wsum = model.kernel.weight().sum(axis=0)  # (d0,)
            coef = dx @ wsum  # (J,)
            value -= n * float(I0 @ coef)
            if order >= 1:
                grad[pg:] -= n * (G.T @ coef)
        elif tab:
            from scipy import integrate as _int

            for sj, dxj in zip(s_j, dx):
                lo = max(sj, h.t0)
                for a in range(d):

                    def f(u, sj=sj, dxj=dxj, a=a):
                        return float(model.kernel.full(u, np.array([sj]))[0][a] @ dxj)

                    val, _ = _int.quad(f, lo, h.t1, epsabs=1e-10, limit=200)
                    value -= n * val

    hess = None
    if order >= 2:
        # Analytic first derivatives + central finite differences for the Hessian.
        if tab:
            raise DomainError("hessian unavailable for tabulated kernels")
        scale = np.maximum(np.abs(theta), 1.0)
        step = 1e-4 * scale
        hess = np.zeros((p, p))
        for k in range(p):
            tp = np.array(theta, dtype=float)
            tm = tp.copy()
            tp[k] += step[k]
            tm[k] -= step[k]
            gp = _eval_generic(model, tp, path, 1).gradient
            gm = _eval_generic(model, tm, path, 1).gradient
            hess[k] = (gp - gm) / (2.0 * step[k])
        hess = 0.5 * (hess + hess.T)
    return LikelihoodEval(value, grad, hess, True)


# ---------------------------------------------------------------------------
# Public API.


def loglik_eval(model: ModelSpec, theta, path: PointPath, order: int = 2) -> LikelihoodEval:
    th = _check_theta(model, theta)
    if isinstance(model.kernel, (ExponentialKernel, ZeroKernel)):
        return _eval_exp(model, th, path, order)
    return _eval_generic(model, th, path, order)


def quasi_loglik(model: ModelSpec, theta, path: PointPath) -> float:
    return loglik_eval(model, theta, path, order=0).value


def score(model: ModelSpec, theta, path: PointPath) -> np.ndarray:
    ev = loglik_eval(model, theta, path, order=1)
    if not ev.feasible:
        raise DomainError("score undefined: zero intensity at an event")
    return ev.gradient


def hessian(model: ModelSpec, theta, path: PointPath) -> np.ndarray:
    ev = loglik_eval(model, theta, path, order=2)
    if not ev.feasible:
        raise DomainError("hessian undefined: zero intensity at an event")
    return ev.hessian


def gamma_n(model: ModelSpec, theta, path: PointPath) -> np.ndarray:
    """Normalized observed information -hessian / n."""
    return -hessian(model, theta, path) / model.n


def loglik_many(model: ModelSpec, thetas, path: PointPath, chunk: int = 256) -> np.ndarray:
    """Vectorized l_n over a batch of parameter points; -inf where infeasible.

    Fast for zero/exponential kernels; falls back to a loop otherwise.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    m = thetas.shape[0]
    if not isinstance(model.kernel, (ExponentialKernel, ZeroKernel)):
        return np.array([loglik_eval(model, th, path, 0).value for th in thetas])

    pg = model.baseline.n_params
    h = model.horizon
    n = model.n
    d = model.d
    d0 = model.d0
    zero = isinstance(model.kernel, ZeroKernel)
    s_j, dx = path.covariate_arrays()
    J = s_j.size

    # Precompute per-component event data.
    ev_data = []
    for alpha in range(d):
        ev = path.events[alpha]
        Brow = model.baseline.coeff_matrix(ev)[:, alpha, :] if ev.size else np.zeros((0, pg))
        idx = np.searchsorted(s_j, ev, side="left") if J else np.zeros(ev.size, dtype=int)
        ev_data.append((ev, Brow, idx))
    BI_cols = model.baseline.coeff_matrix_integral(h.t0, h.t1).sum(axis=0)
    a_j = np.maximum(s_j, h.t0) - s_j if J else None
    c_j = h.t1 - s_j if J else None

    out = np.empty(m)
    for lo in range(0, m, chunk):
        block = thetas[lo : lo + chunk]
        mb = block.shape[0]
        gam = block[:, :pg]
        vals = -n * (gam @ BI_cols)
        if zero:
            bs = np.zeros(mb)
            As = np.zeros((mb, d, d0))
        else:
            bs = block[:, pg]
            As = block[:, pg + 1 :].reshape(mb, d, d0)
        if J and not zero:
            ebs = np.exp(bs[:, None] * s_j[None, :])  # (mb, J)
            W0 = np.concatenate(
                [np.zeros((mb, 1, d0)), np.cumsum(ebs[:, :, None] * dx[None, :, :], axis=1)],
                axis=1,
            )  # (mb, J+1, d0)
            I0 = np.where(
                np.abs(bs[:, None]) < 1e-8,
                (c_j - a_j)[None, :] - 0.5 * bs[:, None] * (c_j**2 - a_j**2)[None, :],
                (np.exp(-bs[:, None] * a_j[None, :]) - np.exp(-bs[:, None] * c_j[None, :]))
                / np.where(np.abs(bs[:, None]) < 1e-8, 1.0, bs[:, None]),
            )  # (mb, J)
            R0 = I0 @ dx  # (mb, d0)
            vals -= n * np.einsum("mij,mj->m", As, R0)
        bad = np.zeros(mb, dtype=bool)
        for alpha in range(d):
            ev, Brow, idx = ev_data[alpha]
            if ev.size == 0:
                continue
            lam = gam @ Brow.T  # (mb, E)
            if J and not zero:
                emt = np.exp(-bs[:, None] * ev[None, :])  # (mb, E)
                S0 = emt[:, :, None] * W0[:, idx, :]  # (mb, E, d0)
                lam = lam + np.einsum("meb,mb->me", S0, As[:, alpha, :])
            lam_bad = np.any(lam <= _TINY, axis=1)
            bad |= lam_bad
            safe = np.where(lam > _TINY, lam, 1.0)
            vals += np.sum(np.log(safe), axis=1)
        vals[bad] = -np.inf
        out[lo : lo + chunk] = vals
    return out


# ---------------------------------------------------------------------------
# Random-field quantities.


def random_field_Z(model: ModelSpec, theta_star, u, path: PointPath) -> RandomFieldPoint:
    """Likelihood-ratio field at local parameter u: exp(l_n(theta_u) - l_n(theta*))."""
    theta_star = np.asarray(theta_star, dtype=float)
    u = np.asarray(u, dtype=float)
    theta_u = theta_star + u / np.sqrt(model.n)
    if not model.param_space.contains(theta_u, closed=True, tol=1e-12):
        raise DomainError("u outside the local parameter set")
    log_z = quasi_loglik(model, theta_u, path) - quasi_loglik(model, theta_star, path)
    return RandomFieldPoint(u=u, z=float(np.exp(log_z)), log_z=float(log_z))


def delta_n(model: ModelSpec, theta_star, path: PointPath, check: bool = False) -> np.ndarray:
    """Normalized score n^{-1/2} d/dtheta l_n(theta*).

    With check=True the same vector is recomputed through the compensated-
    integral form (event sum minus a quadrature of n * d(lambda)/d(theta))
    and the two are asserted to agree.
    """
    sc = score(model, theta_star, path)
    dn = sc / np.sqrt(model.n)
    if check:
        grid = np.linspace(model.horizon.t0, model.horizon.t1, 4097)
        ev_part = np.zeros(model.p)
        for alpha in range(model.d):
            for t in path.events[alpha]:
                lam, dlam = _lambda_with_grad(model, theta_star, float(t), path)
                ev_part += dlam[alpha] / lam[alpha]
        integ = np.zeros(model.p)
        vals = np.zeros((grid.size, model.p))
        for i, t in enumerate(grid):
            _, dlam = _lambda_with_grad(model, theta_star, float(t), path)
            vals[i] = dlam.sum(axis=0)
        integ = np.trapezoid(vals, grid, axis=0)
        alt = (ev_part - model.n * integ) / np.sqrt(model.n)
        if not np.allclose(alt, dn, rtol=1e-4, atol=1e-4 * (1 + np.abs(dn).max())):
            raise AssertionError(f"score identity violated: {dn} vs {alt}")
    return dn


def _lambda_with_grad(model: ModelSpec, theta, t: float, path: PointPath):
    """(lambda(t), d lambda / d theta) with left limits; shapes (d,), (d, p)."""
    gamma, kpar = model.split_theta(np.asarray(theta, dtype=float))
    pg = model.baseline.n_params
    B = model.baseline.coeff_matrix(t)  # (d, pg)
    lam = B @ gamma
    dlam = np.zeros((model.d, model.p))
    dlam[:, :pg] = B
    s_j, dx = path.covariate_arrays()
    mask = s_j < t
    if np.any(mask) and not isinstance(model.kernel, ZeroKernel):
        if isinstance(model.kernel, ExponentialKernel):
            b, A = model.kernel.split(kpar)
            e = np.exp(-b * (t - s_j[mask]))
            S0 = e @ dx[mask]
            S1 = (e * (t - s_j[mask])) @ dx[mask]
            lam = lam + A @ S0
            dlam[:, pg] = -(A @ S1)
            for alpha in range(model.d):
                dlam[alpha, pg + 1 + alpha * model.d0 : pg + 1 + (alpha + 1) * model.d0] = S0
        elif isinstance(model.kernel, PowerLawExpKernel):
            lags = t - s_j[mask]
            K = model.kernel.matrix(lags, kpar)
            lam = lam + np.einsum("mij,mj->i", K, dx[mask])
            gsc = model.kernel.scalar_d1(lags, kpar)  # (m, 3)
            W = model.kernel.weight()
            for r in range(3):
                dlam[:, pg + r] += W @ (gsc[:, r] @ dx[mask])
        else:
            raise DomainError("gradient unavailable for tabulated kernels")
    return lam, dlam


def lamn_residual(model: ModelSpec, theta_star, u, path: PointPath, gamma_mat) -> float:
    """LAMN remainder r_n(u) = log Z_n(u) - Delta_n.u + (1/2) u' Gamma u."""
    u = np.asarray(u, dtype=float)
    z = random_field_Z(model, theta_star, u, path)
    dn = delta_n(model, theta_star, path)
    G = np.asarray(gamma_mat, dtype=float)
    return float(z.log_z - dn @ u + 0.5 * u @ G @ u)


def y_field(model: ModelSpec, path: PointPath, theta, theta_star) -> float:
    """Y_n(theta) = (l_n(theta) - l_n(theta*)) / n; -inf if theta infeasible."""
    l1 = quasi_loglik(model, theta, path)
    l0 = quasi_loglik(model, theta_star, path)
    return float((l1 - l0) / model.n)
