"""Declarative model objects: horizon, parameter box, baseline, kernel, covariate.

A model describes a d-dimensional counting process N whose intensity is
n * lambda(t, theta) with

    lambda(t, theta) = g(t, gamma) + sum_{s_j < t} K(t - s_j, theta_K) dX_{s_j},

g a deterministic baseline, K a nonnegative matrix kernel and X a
nondecreasing d0-dimensional covariate path (X = N/n in the self-exciting
case).  The parameter vector is theta = (gamma, theta_K).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TimeHorizon",
    "ParamSpace",
    "Baseline",
    "ConstantBaseline",
    "PolynomialBaseline",
    "CenteredQuadraticBaseline",
    "PathScaledBaseline",
    "Kernel",
    "ZeroKernel",
    "ExponentialKernel",
    "PowerLawExpKernel",
    "TabulatedKernel",
    "CovariateSpec",
    "ModelSpec",
    "ModelDefinitionError",
    "DomainError",
    "intensity_at",
    "validate_model",
    "model_to_json",
    "model_from_json",
]


class ModelDefinitionError(ValueError):
    """Raised for inconsistent shapes or invalid model definitions."""


class DomainError(ValueError):
    """Raised when an evaluation point lies outside the model's domain."""


@dataclass(frozen=True)
class TimeHorizon:
    """Observation window (t0, t1] with covariate history starting at t_hat0."""

    t_hat0: float
    t0: float
    t1: float

    def __post_init__(self):
        if not (self.t_hat0 <= self.t0 < self.t1):
            raise ModelDefinitionError(
                f"need t_hat0 <= t0 < t1, got ({self.t_hat0}, {self.t0}, {self.t1})"
            )

    @property
    def length(self) -> float:
        return self.t1 - self.t0


@dataclass(frozen=True)
class ParamSpace:
    """Bounded open box in R^p used as the parameter space."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ModelDefinitionError("lower/upper must be 1-d arrays of equal length")
        if not np.all(lo < hi):
            raise ModelDefinitionError("parameter box needs lower < upper coordinatewise")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, theta, closed: bool = True, tol: float = 0.0) -> bool:
        th = np.asarray(theta, dtype=float)
        if th.shape != self.lower.shape:
            return False
        if closed:
            return bool(np.all(th >= self.lower - tol) and np.all(th <= self.upper + tol))
        return bool(np.all(th > self.lower) and np.all(th < self.upper))

    def clip(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def sample(self, rng: np.random.Generator, m: int | None = None) -> np.ndarray:
        size = (self.dim,) if m is None else (m, self.dim)
        return self.lower + (self.upper - self.lower) * rng.random(size)


# ---------------------------------------------------------------------------
# Baselines: all built-in families are linear in their coefficient vector
# gamma, i.e. g(t, gamma) = B(t) @ gamma with B(t) of shape (d, n_params).


class Baseline:
    variant = "abstract"

    d: int
    n_params: int

    def coeff_matrix(self, t) -> np.ndarray:
        """B(t); shape (d, n_params) for scalar t, (nt, d, n_params) for arrays."""
        raise NotImplementedError

    def coeff_matrix_integral(self, a: float, b: float) -> np.ndarray:
        """Integral of B over [a, b]; shape (d, n_params)."""
        raise NotImplementedError

    # Polynomial representation \sum_l a_l t^l, used by the asymptotics layer.
    def poly_coeff_maps(self) -> np.ndarray | None:
        """Array P of shape (deg+1, d, n_params) with a_l = P[l] @ gamma, or None."""
        return None

    def value(self, t, gamma) -> np.ndarray:
        return self.coeff_matrix(t) @ np.asarray(gamma, dtype=float)

    def d1(self, t, gamma) -> np.ndarray:
        return self.coeff_matrix(t)

    def integral(self, a: float, b: float, gamma) -> np.ndarray:
        return self.coeff_matrix_integral(a, b) @ np.asarray(gamma, dtype=float)

    def integral_d1(self, a: float, b: float, gamma) -> np.ndarray:
        return self.coeff_matrix_integral(a, b)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantBaseline(Baseline):
    """g(t, gamma) = gamma, gamma in R_+^d."""

    d: int
    variant = "constant"

    @property
    def n_params(self) -> int:
        return self.d

    def coeff_matrix(self, t):
        eye = np.eye(self.d)
        if np.ndim(t) == 0:
            return eye
        return np.broadcast_to(eye, (np.size(t), self.d, self.d)).copy()

    def coeff_matrix_integral(self, a, b):
        return (b - a) * np.eye(self.d)

    def poly_coeff_maps(self):
        return np.eye(self.d)[None, :, :]

    def to_dict(self):
        return {"variant": "constant", "d": self.d}


@dataclass(frozen=True)
class PolynomialBaseline(Baseline):
    """g(t, gamma) = sum_l a_l t^l with free coefficients a_l in R^d.

    Layout: gamma = (a_0, a_1, ..., a_deg) concatenated, each block of size d.
    """

    d: int
    degree: int
    variant = "polynomial"

    @property
    def n_params(self) -> int:
        return self.d * (self.degree + 1)

    def coeff_matrix(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        nt = tt.size
        B = np.zeros((nt, self.d, self.n_params))
        for ell in range(self.degree + 1):
            pw = tt**ell
            for a in range(self.d):
                B[:, a, ell * self.d + a] = pw
        return B[0] if scalar else B

    def coeff_matrix_integral(self, a, b):
        B = np.zeros((self.d, self.n_params))
        for ell in range(self.degree + 1):
            val = (b ** (ell + 1) - a ** (ell + 1)) / (ell + 1)
            for al in range(self.d):
                B[al, ell * self.d + al] = val
        return B

    def poly_coeff_maps(self):
        P = np.zeros((self.degree + 1, self.d, self.n_params))
        for ell in range(self.degree + 1):
            for a in range(self.d):
                P[ell, a, ell * self.d + a] = 1.0
        return P

    def to_dict(self):
        return {"variant": "polynomial", "d": self.d, "degree": self.degree}


@dataclass(frozen=True)
class CenteredQuadraticBaseline(Baseline):
    """g(t, gamma) = gamma1 * (t - center)^2 + gamma2 with gamma1, gamma2 in (0,inf)^d.

    Layout: gamma = (gamma1, gamma2), center = midpoint of the observation window.
    """

    d: int
    center: float
    variant = "centered_quadratic"

    @property
    def n_params(self) -> int:
        return 2 * self.d

    def coeff_matrix(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        B = np.zeros((tt.size, self.d, 2 * self.d))
        q = (tt - self.center) ** 2
        for a in range(self.d):
            B[:, a, a] = q
            B[:, a, self.d + a] = 1.0
        return B[0] if scalar else B

    def coeff_matrix_integral(self, a, b):
        B = np.zeros((self.d, 2 * self.d))
        q = ((b - self.center) ** 3 - (a - self.center) ** 3) / 3.0
        for al in range(self.d):
            B[al, al] = q
            B[al, self.d + al] = b - a
        return B

    def poly_coeff_maps(self):
        # (t - c)^2 = t^2 - 2c t + c^2
        c = self.center
        P = np.zeros((3, self.d, 2 * self.d))
        for a in range(self.d):
            P[0, a, a] = c * c
            P[0, a, self.d + a] = 1.0
            P[1, a, a] = -2.0 * c
            P[2, a, a] = 1.0
        return P

    def to_dict(self):
        return {"variant": "centered_quadratic", "d": self.d, "center": self.center}


class PathScaledBaseline(Baseline):
    """g^a(t, gamma) = gamma_a * f_a(t) for a given piecewise-constant path f.

    Used by the order-book layer where the baseline of a cancellation
    component is proportional to the standing queue size.  f is right-
    continuous: f(t) = values[i] on [times[i], times[i+1]).
    """

    variant = "path_scaled"

    def __init__(self, times: np.ndarray, values: np.ndarray):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or values.shape[0] != times.size:
            raise ModelDefinitionError("path baseline needs times (nt,), values (nt, d)")
        if np.any(np.diff(times) <= 0):
            raise ModelDefinitionError("path baseline times must be strictly increasing")
        self.times = times
        self.values = values
        self.d = values.shape[1]

    @property
    def n_params(self) -> int:
        return self.d

    def path_value(self, t):
        """f(t-): value of the last segment starting strictly before t."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="left") - 1
        idx = np.clip(idx, 0, self.times.size - 1)
        return self.values[idx]

    def coeff_matrix(self, t):
        f = self.path_value(t)
        if np.ndim(t) == 0:
            B = np.zeros((self.d, self.d))
            np.fill_diagonal(B, f)
            return B
        nt = np.size(t)
        B = np.zeros((nt, self.d, self.d))
        for a in range(self.d):
            B[:, a, a] = f[:, a]
        return B

    def coeff_matrix_integral(self, a, b):
        ts = self.times
        knots = np.concatenate(([a], ts[(ts > a) & (ts < b)], [b]))
        B = np.zeros((self.d, self.d))
        for lo, hi in zip(knots[:-1], knots[1:]):
            f = self.path_value(0.5 * (lo + hi))
            for al in range(self.d):
                B[al, al] += f[al] * (hi - lo)
        return B

    def to_dict(self):
        return {
            "variant": "path_scaled",
            "times": self.times.tolist(),
            "values": self.values.tolist(),
        }


# ---------------------------------------------------------------------------
# Kernels.


class Kernel:
    variant = "abstract"

    d: int
    d0: int
    n_params: int

    def matrix(self, dt, kpar) -> np.ndarray:
        """K at lags dt >= 0; shape (d, d0) for scalar dt, (nt, d, d0) for arrays."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroKernel(Kernel):
    d: int
    d0: int
    variant = "zero"
    n_params = 0

    def matrix(self, dt, kpar):
        if np.ndim(dt) == 0:
            return np.zeros((self.d, self.d0))
        return np.zeros((np.size(dt), self.d, self.d0))

    def to_dict(self):
        return {"variant": "zero", "d": self.d, "d0": self.d0}


@dataclass(frozen=True)
class ExponentialKernel(Kernel):
    """K(dt) = A * exp(-b * dt); parameters (b, A) with b > 0 and A >= 0 entrywise.

    Layout: kpar = [b, A_00, A_01, ..., A_{d-1,d0-1}] (A row-major).
    """

    d: int
    d0: int
    variant = "exponential"

    @property
    def n_params(self) -> int:
        return 1 + self.d * self.d0

    def split(self, kpar):
        kpar = np.asarray(kpar, dtype=float)
        return float(kpar[0]), kpar[1:].reshape(self.d, self.d0)

    def matrix(self, dt, kpar):
        b, A = self.split(kpar)
        e = np.exp(-b * np.asarray(dt, dtype=float))
        if np.ndim(dt) == 0:
            return A * e
        return e[:, None, None] * A[None, :, :]

    def to_dict(self):
        return {"variant": "exponential", "d": self.d, "d0": self.d0}


@dataclass(frozen=True)
class PowerLawExpKernel(Kernel):
    """K(dt) = c * dt^th2 * exp(-th1 * dt) * J with a fixed nonnegative shape J.

    Layout: kpar = [c, th1, th2].
    """

    d: int
    d0: int
    shape: tuple = None  # fixed (d, d0) weight matrix; default all-ones
    variant = "power_law_exp"
    n_params = 3

    def weight(self) -> np.ndarray:
        if self.shape is None:
            return np.ones((self.d, self.d0))
        return np.asarray(self.shape, dtype=float)

    def scalar(self, dt, kpar):
        c, th1, th2 = (float(x) for x in kpar)
        dt = np.asarray(dt, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = c * np.where(dt > 0, dt, 1.0) ** th2 * np.exp(-th1 * dt)
        return np.where(dt > 0, out, c * (0.0 ** th2 if th2 > 0 else 1.0))

    def scalar_d1(self, dt, kpar):
        """Gradient of the scalar shape wrt (c, th1, th2); shape (..., 3)."""
        c, th1, th2 = (float(x) for x in kpar)
        dt = np.asarray(dt, dtype=float)
        k = self.scalar(dt, kpar)
        safe = np.where(dt > 0, dt, 1.0)
        g = np.empty(dt.shape + (3,))
        g[..., 0] = k / c
        g[..., 1] = -dt * k
        g[..., 2] = np.where(dt > 0, np.log(safe) * k, 0.0)
        return g

    def matrix(self, dt, kpar):
        k = self.scalar(dt, kpar)
        J = self.weight()
        if np.ndim(dt) == 0:
            return float(k) * J
        return k[:, None, None] * J[None, :, :]

    def to_dict(self):
        d = {"variant": "power_law_exp", "d": self.d, "d0": self.d0}
        if self.shape is not None:
            d["shape"] = np.asarray(self.shape).tolist()
        return d


class TabulatedKernel(Kernel):
    """Parameter-free kernel given by a callable (t, s) -> (d, d0) matrix."""

    variant = "tabulated"
    n_params = 0

    def __init__(self, d: int, d0: int, func: Callable[[float, float], np.ndarray]):
        self.d = d
        self.d0 = d0
        self.func = func

    def full(self, t, s):
        """K(t, s) with s possibly an array; shape (ns, d, d0)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty((s.size, self.d, self.d0))
        for i, si in enumerate(s):
            out[i] = np.asarray(self.func(t, si), dtype=float).reshape(self.d, self.d0)
        return out

    def matrix(self, dt, kpar):
        raise ModelDefinitionError("tabulated kernels are not difference kernels; use full(t, s)")

    def to_dict(self):
        return {"variant": "tabulated", "d": self.d, "d0": self.d0}


# ---------------------------------------------------------------------------
# Covariate.


@dataclass(frozen=True)
class CovariateSpec:
    """Source of the regressor path X.

    variant: "self_exciting" (X = N/n, d0 = d), "external" (a given
    nondecreasing jump path), or "mixed" (self-exciting dims followed by
    external dims).
    """

    variant: str
    external_times: np.ndarray | None = None
    external_jumps: np.ndarray | None = None  # (nt, d0_ext) nonnegative increments

    def __post_init__(self):
        if self.variant not in ("self_exciting", "external", "mixed"):
            raise ModelDefinitionError(f"unknown covariate variant {self.variant!r}")
        if self.variant in ("external", "mixed"):
            t = np.asarray(self.external_times, dtype=float)
            j = np.asarray(self.external_jumps, dtype=float)
            if j.ndim == 1:
                j = j[:, None]
            if t.ndim != 1 or j.shape[0] != t.size:
                raise ModelDefinitionError("external covariate needs times (nt,), jumps (nt, d0)")
            if np.any(j < 0):
                raise ModelDefinitionError("covariate increments must be nonnegative")
            object.__setattr__(self, "external_times", t)
            object.__setattr__(self, "external_jumps", j)

    def d0(self, d: int) -> int:
        if self.variant == "self_exciting":
            return d
        if self.variant == "external":
            return self.external_jumps.shape[1]
        return d + self.external_jumps.shape[1]

    def to_dict(self):
        out = {"variant": self.variant}
        if self.variant in ("external", "mixed"):
            out["times"] = self.external_times.tolist()
            out["jumps"] = self.external_jumps.tolist()
        return out


# ---------------------------------------------------------------------------
# ModelSpec.


@dataclass(frozen=True)
class ModelSpec:
    d: int
    horizon: TimeHorizon
    baseline: Baseline
    kernel: Kernel
    covariate: CovariateSpec
    n: int
    param_space: ParamSpace

    def __post_init__(self):
        if self.n < 1:
            raise ModelDefinitionError("scale n must be a positive integer")
        if self.baseline.d != self.d:
            raise ModelDefinitionError(
                f"baseline dimension {self.baseline.d} != model d {self.d}"
            )
        if self.kernel.d != self.d:
            raise ModelDefinitionError(f"kernel row count {self.kernel.d} != model d {self.d}")
        d0 = self.covariate.d0(self.d)
        if self.kernel.d0 != d0:
            raise ModelDefinitionError(
                f"kernel column count {self.kernel.d0} != covariate dimension {d0}"
            )
        p = self.baseline.n_params + self.kernel.n_params
        if self.param_space.dim != p:
            raise ModelDefinitionError(
                f"param box dimension {self.param_space.dim} != model parameter count {p}"
            )

    @property
    def d0(self) -> int:
        return self.covariate.d0(self.d)

    @property
    def p(self) -> int:
        return self.param_space.dim

    @property
    def n_baseline_params(self) -> int:
        return self.baseline.n_params

    def split_theta(self, theta):
        th = np.asarray(theta, dtype=float)
        pg = self.baseline.n_params
        return th[:pg], th[pg:]


# ---------------------------------------------------------------------------
# Intensity evaluation.


def _kernel_contrib(model: ModelSpec, kpar, t: float, times, jumps) -> np.ndarray:
    """sum over jumps strictly before t of K(t, s_j) dX_j; shape (d,)."""
    mask = times < t
    if not np.any(mask):
        return np.zeros(model.d)
    ts = times[mask]
    dx = jumps[mask]
    if isinstance(model.kernel, TabulatedKernel):
        K = model.kernel.full(t, ts)  # (m, d, d0)
    else:
        K = model.kernel.matrix(t - ts, kpar)  # (m, d, d0)
    return np.einsum("mij,mj->i", K, dx)


def intensity_at(model: ModelSpec, theta, t: float, path) -> np.ndarray:
    """lambda(t, theta) in per-unit-n scale against a realized history.

    Left limits: a covariate jump exactly at t does not contribute.
    """
    th = np.asarray(theta, dtype=float)
    if not model.param_space.contains(th, closed=True):
        raise DomainError("theta outside the closed parameter box")
    h = model.horizon
    if not (h.t0 <= t <= h.t1):
        raise DomainError(f"t={t} outside the observation window [{h.t0}, {h.t1}]")
    gamma, kpar = model.split_theta(th)
    lam = model.baseline.value(t, gamma).astype(float)
    times, jumps = path.covariate_arrays()
    lam = lam + _kernel_contrib(model, kpar, t, times, jumps)
    return lam


# ---------------------------------------------------------------------------
# Validation.


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    witness: tuple | None = None


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = f" [{c.detail}]" if c.detail else ""
            lines.append(f"{status}: {c.name}{extra}")
        return "\n".join(lines)


def validate_model(
    model: ModelSpec,
    grid_points: int = 512,
    require_positive_baseline: bool = False,
) -> ValidationReport:
    """Numerical screening of the model's structural assumptions.

    Checks baseline nonnegativity on a (t, theta) grid over the closed box
    corners plus the center, kernel nonnegativity at sampled lags and
    parameters, and shape consistency.  Report-only; never raises.
    """
    rep = ValidationReport()
    h = model.horizon
    tgrid = np.linspace(h.t0, h.t1, grid_points)
    pg = model.baseline.n_params

    # Parameter probes: box corners are exact extremes for coefficientwise
    # monotone families like the ones shipped here; add center + random interior.
    box = model.param_space
    rng = np.random.default_rng(0)
    probes = [box.center] + [box.sample(rng) for _ in range(16)]
    ncorner = min(2**box.dim, 64)
    for i in range(ncorner):
        bits = [(i >> k) & 1 for k in range(box.dim)]
        probes.append(np.where(np.array(bits, bool), box.upper, box.lower))

    worst = None
    worst_val = np.inf
    for th in probes:
        gamma = np.asarray(th, dtype=float)[:pg]
        gvals = model.baseline.value(tgrid, gamma)  # (nt, d)
        m = float(np.min(gvals))
        if m < worst_val:
            worst_val = m
            idx = np.unravel_index(np.argmin(gvals), gvals.shape)
            worst = (float(tgrid[idx[0]]), tuple(np.round(th, 6)))
    ok = worst_val >= (0.0 if not require_positive_baseline else 1e-12)
    rep.checks.append(
        CheckResult(
            "baseline nonnegativity",
            bool(ok),
            f"min g = {worst_val:.6g}",
            None if ok else worst,
        )
    )

    # Kernel nonnegativity at sampled lags.
    if not isinstance(model.kernel, (ZeroKernel, TabulatedKernel)):
        lags = np.linspace(1e-6, h.t1 - h.t_hat0, 64)
        kmin = np.inf
        kwit = None
        for th in probes:
            kpar = np.asarray(th, dtype=float)[pg:]
            K = model.kernel.matrix(lags, kpar)
            m = float(np.min(K))
            if m < kmin:
                kmin = m
                kwit = (float(lags[np.argmin(np.min(K, axis=(1, 2)))]), tuple(np.round(th, 6)))
        ok = kmin >= 0.0
        rep.checks.append(
            CheckResult("kernel nonnegativity", bool(ok), f"min K = {kmin:.6g}", None if ok else kwit)
        )
    else:
        rep.checks.append(CheckResult("kernel nonnegativity", True, "structurally nonnegative"))

    # Shape consistency is enforced at construction; record it.
    rep.checks.append(
        CheckResult(
            "shape consistency",
            True,
            f"d={model.d}, d0={model.d0}, p={model.p}",
        )
    )
    return rep


# ---------------------------------------------------------------------------
# JSON serialization.  Field names follow the documented file schema exactly.


def model_to_json(model: ModelSpec) -> str:
    doc = {
        "d": model.d,
        "horizon": {
            "t_hat0": model.horizon.t_hat0,
            "t0": model.horizon.t0,
            "t1": model.horizon.t1,
        },
        "n": model.n,
        "baseline": model.baseline.to_dict(),
        "kernel": model.kernel.to_dict(),
        "covariate": model.covariate.to_dict(),
        "param_space": {
            "lower": model.param_space.lower.tolist(),
            "upper": model.param_space.upper.tolist(),
        },
    }
    return json.dumps(doc, indent=2)


def _baseline_from_dict(doc: dict, horizon: TimeHorizon) -> Baseline:
    v = doc["variant"]
    if v == "constant":
        return ConstantBaseline(d=doc["d"])
    if v == "polynomial":
        return PolynomialBaseline(d=doc["d"], degree=doc["degree"])
    if v == "centered_quadratic":
        center = doc.get("center", 0.5 * (horizon.t0 + horizon.t1))
        return CenteredQuadraticBaseline(d=doc["d"], center=center)
    if v == "path_scaled":
        return PathScaledBaseline(np.asarray(doc["times"]), np.asarray(doc["values"]))
    raise ModelDefinitionError(f"unknown baseline variant {v!r}")


def _kernel_from_dict(doc: dict) -> Kernel:
    v = doc["variant"]
    if v == "zero":
        return ZeroKernel(d=doc["d"], d0=doc["d0"])
    if v == "exponential":
        return ExponentialKernel(d=doc["d"], d0=doc["d0"])
    if v == "power_law_exp":
        shape = doc.get("shape")
        return PowerLawExpKernel(
            d=doc["d"], d0=doc["d0"], shape=tuple(map(tuple, shape)) if shape else None
        )
    raise ModelDefinitionError(f"unknown kernel variant {v!r}")


def _covariate_from_dict(doc: dict) -> CovariateSpec:
    v = doc["variant"]
    if v == "self_exciting":
        return CovariateSpec("self_exciting")
    return CovariateSpec(
        v,
        external_times=np.asarray(doc["times"], dtype=float),
        external_jumps=np.asarray(doc["jumps"], dtype=float),
    )


def model_from_json(text: str) -> ModelSpec:
    doc = json.loads(text)
    horizon = TimeHorizon(**doc["horizon"])
    return ModelSpec(
        d=doc["d"],
        horizon=horizon,
        baseline=_baseline_from_dict(doc["baseline"], horizon),
        kernel=_kernel_from_dict(doc["kernel"]),
        covariate=_covariate_from_dict(doc["covariate"]),
        n=doc["n"],
        param_space=ParamSpace(
            lower=np.asarray(doc["param_space"]["lower"], dtype=float),
            upper=np.asarray(doc["param_space"]["upper"], dtype=float),
        ),
    )
