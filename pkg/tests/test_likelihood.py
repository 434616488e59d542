import numpy as np
import pytest
from scipy import integrate

from ppreg.model import (
    CenteredQuadraticBaseline,
    ConstantBaseline,
    CovariateSpec,
    DomainError,
    ExponentialKernel,
    ModelSpec,
    ParamSpace,
    PolynomialBaseline,
    PowerLawExpKernel,
    TimeHorizon,
    ZeroKernel,
    intensity_at,
)
from ppreg.likelihood import (
    delta_n,
    gamma_n,
    hessian,
    lamn_residual,
    loglik_eval,
    loglik_many,
    quasi_loglik,
    random_field_Z,
    score,
    y_field,
)
from ppreg.simulate import PointPath, SimOptions, simulate


def brute_force_loglik(model, theta, path):
    """Direct evaluation: event sum of log lambda(t-) minus the quadrature of
    n lambda over the window, per component."""
    theta = np.asarray(theta, dtype=float)
    h = model.horizon
    total = 0.0
    times, comps = path.merged_events()
    for t, a in zip(times, comps):
        lam = intensity_at(model, theta, float(t), path)
        total += np.log(lam[a])
    brk = times[(times > h.t0) & (times < h.t1)]
    for a in range(model.d):
        integral, _ = integrate.quad(
            lambda s: model.n * intensity_at(model, theta, s, path)[a],
            h.t0,
            h.t1,
            limit=800,
            points=brk,
        )
        total -= integral
    return total


def hawkes_model(n=60, t1=1.0, baseline=None, kernel=None):
    baseline = baseline or ConstantBaseline(d=1)
    kernel = kernel or ExponentialKernel(d=1, d0=1)
    p = baseline.n_params + kernel.n_params
    return ModelSpec(
        d=1,
        horizon=TimeHorizon(0.0, 0.0, t1),
        baseline=baseline,
        kernel=kernel,
        covariate=CovariateSpec("self_exciting"),
        n=n,
        param_space=ParamSpace(np.full(p, 0.05), np.full(p, 6.0)),
    )


def hawkes_model_2d(n=40):
    baseline = ConstantBaseline(d=2)
    kernel = ExponentialKernel(d=2, d0=2)
    p = baseline.n_params + kernel.n_params
    return ModelSpec(
        d=2,
        horizon=TimeHorizon(0.0, 0.0, 1.0),
        baseline=baseline,
        kernel=kernel,
        covariate=CovariateSpec("self_exciting"),
        n=n,
        param_space=ParamSpace(np.full(p, 0.05), np.full(p, 6.0)),
    )


class TestValueAgainstBruteForce:
    def test_exponential_1d(self):
        m = hawkes_model()
        th = np.array([1.0, 2.0, 1.0])
        p = simulate(m, th, SimOptions(seed=4))
        for probe in ([1.0, 2.0, 1.0], [0.7, 1.1, 0.4], [2.0, 3.5, 2.5]):
            assert np.isclose(
                quasi_loglik(m, probe, p), brute_force_loglik(m, probe, p), rtol=1e-8
            )

    def test_exponential_2d(self):
        m = hawkes_model_2d()
        th = np.array([1.0, 0.8, 2.0, 0.5, 0.2, 0.1, 0.6])
        p = simulate(m, th, SimOptions(seed=5))
        assert np.isclose(
            quasi_loglik(m, th, p), brute_force_loglik(m, th, p), rtol=1e-8
        )
        probe = np.array([0.6, 1.2, 1.5, 0.3, 0.4, 0.25, 0.45])
        assert np.isclose(
            quasi_loglik(m, probe, p), brute_force_loglik(m, probe, p), rtol=1e-8
        )

    def test_polynomial_baseline(self):
        m = hawkes_model(baseline=PolynomialBaseline(d=1, degree=2))
        th = np.array([1.0, 0.5, 0.3, 2.0, 1.0])
        p = simulate(m, th, SimOptions(seed=6))
        assert np.isclose(
            quasi_loglik(m, th, p), brute_force_loglik(m, th, p), rtol=1e-8
        )

    def test_power_law_kernel(self):
        m = hawkes_model(kernel=PowerLawExpKernel(d=1, d0=1))
        th = np.array([1.0, 1.0, 2.0, 0.5])
        p = simulate(m, th, SimOptions(seed=7))
        assert np.isclose(
            quasi_loglik(m, th, p), brute_force_loglik(m, th, p), rtol=1e-6
        )

    def test_zero_kernel_closed_form(self):
        m = hawkes_model(kernel=ZeroKernel(d=1, d0=1))
        mu = np.array([1.5])
        p = simulate(m, mu, SimOptions(seed=8))
        N = p.total_events
        expect = N * np.log(1.5) - 60 * 1.5
        assert np.isclose(quasi_loglik(m, mu, p), expect)

    def test_infeasible_theta(self):
        # A polynomial baseline that dips negative before an event makes the
        # log-intensity undefined: the evaluation must flag infeasibility.
        m = hawkes_model(
            baseline=PolynomialBaseline(d=1, degree=1), kernel=ZeroKernel(d=1, d0=1)
        )
        m = ModelSpec(
            d=1, horizon=m.horizon, baseline=m.baseline, kernel=m.kernel,
            covariate=m.covariate, n=m.n,
            param_space=ParamSpace(np.array([0.05, -6.0]), np.array([6.0, 6.0])),
        )
        p = PointPath.from_events(m, [np.array([0.9])])
        ev = loglik_eval(m, np.array([1.0, -5.0]), p)
        assert not ev.feasible
        assert ev.value == -np.inf


class TestDerivatives:
    def test_score_and_hessian_fd(self):
        rng = np.random.default_rng(0)
        m = hawkes_model()
        th0 = np.array([1.0, 2.0, 1.0])
        p = simulate(m, th0, SimOptions(seed=9))
        for _ in range(5):
            th = rng.uniform(0.3, 3.0, 3)
            ev = loglik_eval(m, th, p)
            h = 1e-5
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                fd = (quasi_loglik(m, th + e, p) - quasi_loglik(m, th - e, p)) / (2 * h)
                assert np.isclose(ev.gradient[j], fd, rtol=1e-5, atol=1e-6)
                fd_row = (score(m, th + e, p) - score(m, th - e, p)) / (2 * h)
                assert np.allclose(ev.hessian[j], fd_row, rtol=1e-4, atol=1e-4)

    def test_power_law_score_fd(self):
        m = hawkes_model(kernel=PowerLawExpKernel(d=1, d0=1))
        th = np.array([1.0, 1.0, 2.0, 0.5])
        p = simulate(m, th, SimOptions(seed=10))
        g = score(m, th, p)
        h = 1e-5
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd = (quasi_loglik(m, th + e, p) - quasi_loglik(m, th - e, p)) / (2 * h)
            assert np.isclose(g[j], fd, rtol=1e-4, atol=1e-5)

    def test_gamma_n_sign(self):
        m = hawkes_model()
        th = np.array([1.0, 2.0, 1.0])
        p = simulate(m, th, SimOptions(seed=11))
        G = gamma_n(m, th, p)
        assert np.allclose(G, -hessian(m, th, p) / m.n)


class TestBatchEvaluation:
    def test_matches_loop(self):
        m = hawkes_model()
        th0 = np.array([1.0, 2.0, 1.0])
        p = simulate(m, th0, SimOptions(seed=12))
        rng = np.random.default_rng(1)
        thetas = rng.uniform(0.2, 3.0, (25, 3))
        batch = loglik_many(m, thetas, p)
        loop = np.array([quasi_loglik(m, th, p) for th in thetas])
        assert np.allclose(batch, loop, rtol=1e-10)

    def test_zero_kernel_batch(self):
        m = hawkes_model(kernel=ZeroKernel(d=1, d0=1))
        p = simulate(m, np.array([1.0]), SimOptions(seed=13))
        thetas = np.linspace(0.2, 3.0, 17)[:, None]
        batch = loglik_many(m, thetas, p)
        loop = np.array([quasi_loglik(m, th, p) for th in thetas])
        assert np.allclose(batch, loop)


class TestRandomField:
    def poisson(self, n=100):
        return hawkes_model(n=n, kernel=ZeroKernel(d=1, d0=1))

    def test_poisson_log_z_closed_form(self):
        # For the Poisson submodel, log Z_n(u) = N log(1 + u/(sqrt(n) mu*))
        # - sqrt(n) u T; with n=100, mu*=0.1, T=1, N=12, u=10:
        # 12 log 2 - 10.
        m = ModelSpec(
            d=1, horizon=TimeHorizon(0.0, 0.0, 1.0), baseline=ConstantBaseline(d=1),
            kernel=ZeroKernel(d=1, d0=1), covariate=CovariateSpec("self_exciting"),
            n=100, param_space=ParamSpace(np.array([0.001]), np.array([5.0])),
        )
        ev = np.sort(np.random.default_rng(3).uniform(0.01, 0.99, 12))
        p = PointPath.from_events(m, [ev])
        z = random_field_Z(m, np.array([0.1]), np.array([1.0]), p)
        assert np.isclose(z.log_z, 12 * np.log(2.0) - 10.0)
        assert np.isclose(z.z, np.exp(12 * np.log(2.0) - 10.0))

    def test_outside_box_raises(self):
        m = self.poisson()
        p = simulate(m, np.array([1.0]), SimOptions(seed=14))
        with pytest.raises(DomainError):
            random_field_Z(m, np.array([1.0]), np.array([1000.0]), p)

    def test_delta_n_poisson(self):
        # Delta_n = (N - n mu* T) / (sqrt(n) mu*); N=12, n=100, mu*=0.1 -> 2.
        m = ModelSpec(
            d=1, horizon=TimeHorizon(0.0, 0.0, 1.0), baseline=ConstantBaseline(d=1),
            kernel=ZeroKernel(d=1, d0=1), covariate=CovariateSpec("self_exciting"),
            n=100, param_space=ParamSpace(np.array([0.001]), np.array([5.0])),
        )
        ev = np.sort(np.random.default_rng(4).uniform(0.01, 0.99, 12))
        p = PointPath.from_events(m, [ev])
        assert np.isclose(delta_n(m, np.array([0.1]), p, check=True)[0], 2.0)

    def test_lamn_residual_definition(self):
        # r_n(u) = log Z_n(u) - Delta_n u + 0.5 u' G u, by direct assembly.
        m = hawkes_model()
        th = np.array([1.0, 2.0, 1.0])
        p = simulate(m, th, SimOptions(seed=15))
        u = np.array([0.5, -0.3, 0.2])
        G = gamma_n(m, th, p)
        r = lamn_residual(m, th, u, p, G)
        z = random_field_Z(m, th, u, p)
        expect = z.log_z - delta_n(m, th, p) @ u + 0.5 * u @ G @ u
        assert np.isclose(r, expect)

    def test_y_field_identity(self):
        m = hawkes_model()
        th = np.array([1.0, 2.0, 1.0])
        p = simulate(m, th, SimOptions(seed=16))
        probe = np.array([0.8, 1.5, 0.7])
        expect = (quasi_loglik(m, probe, p) - quasi_loglik(m, th, p)) / m.n
        assert np.isclose(y_field(m, p, probe, th), expect)
        assert y_field(m, p, th, th) == 0.0
