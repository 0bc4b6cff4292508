import numpy as np
import pytest

import qhdkit as qk
from qhdkit.objectives import Objective


def quad_1d():
    return Objective(dim=1,
                     eval_fn=lambda x: 0.5 * np.atleast_2d(x)[:, 0] ** 2,
                     grad_fn=lambda x: np.atleast_2d(x),
                     minimizer=np.zeros(1), f_min=0.0)


def test_nagd_quadratic_rate():
    # unconstrained run: the minimizer sits on the box corner, so projection
    # would pin iterates to exactly zero loss and leave nothing to fit
    f = quad_1d()
    trace = qk.nagd_run(f, np.array([1.0]), 0.01, 2000, project=False)
    k = np.arange(100, 2001)
    vals = trace.values[100:]
    pos = vals > 1e-300
    assert pos.sum() > 1000
    slope = np.polyfit(np.log(k[pos]), np.log(vals[pos]), 1)[0]
    assert slope <= -2.0 + 0.3


def test_nagd_zero_gradient_fixed_point():
    f = Objective(dim=2,
                  eval_fn=lambda x: np.ones(len(np.atleast_2d(x))),
                  grad_fn=lambda x: np.zeros_like(np.atleast_2d(x)))
    x0 = np.array([0.3, 0.6])
    trace = qk.nagd_run(f, x0, 0.1, 50)
    assert np.all(trace.points == x0)


def test_nagd_first_step_is_plain_gradient_descent():
    f = quad_1d()
    s = 0.05
    trace = qk.nagd_run(f, np.array([0.8]), s, 1)
    # momentum weight (k-1)/(k+2) vanishes at k = 1
    assert trace.points[1, 0] == pytest.approx(0.8 - s * 0.8)


def test_nagd_effective_times():
    f = quad_1d()
    trace = qk.nagd_run(f, np.array([0.5]), 0.01, 10)
    assert np.allclose(trace.effective_times, 0.01 * np.arange(11))


def test_nagd_strongly_convex_long_run():
    f = qk.get_objective("sum_squares")
    # rescaled curvature eigenvalues are 40 and 80, so s = 0.01 < 1/L
    trace = qk.nagd_run(f, np.array([0.9, 0.2]), 0.01, 10_000)
    assert trace.values[-1] <= 1e-4


def test_sgd_zero_noise_equals_gradient_descent():
    f = quad_1d()
    x0 = np.array([0.7])
    a = qk.sgd_run(f, x0, 0.01, 200, noise_sigma=0.0, seed=1)
    b = qk.sgd_run(f, x0, 0.01, 200, noise_sigma=0.0, seed=99)
    assert np.array_equal(a.points, b.points)
    x = x0.copy()
    for _ in range(3):
        x = np.clip(x - 0.01 * f.grad(x), 0.0, 1.0)
    assert np.array_equal(a.points[3], x)


def test_sgd_determinism_per_seed():
    f = qk.get_objective("levy")
    x0 = np.array([0.2, 0.8])
    a = qk.sgd_run(f, x0, 1e-3, 500, noise_sigma=1.0, seed=42)
    b = qk.sgd_run(f, x0, 1e-3, 500, noise_sigma=1.0, seed=42)
    assert np.array_equal(a.points, b.points)
    c = qk.sgd_run(f, x0, 1e-3, 500, noise_sigma=1.0, seed=43)
    assert not np.array_equal(a.points, c.points)


def test_projection_keeps_iterates_in_box():
    f = qk.get_objective("levy")
    rng = np.random.default_rng(0)
    for seed in range(3):
        x0 = rng.uniform(0, 1, 2)
        tr = qk.sgd_run(f, x0, 1e-2, 300, noise_sigma=1.0, seed=seed)
        assert tr.points.min() >= 0.0 and tr.points.max() <= 1.0
        tn = qk.nagd_run(f, x0, 1e-2, 300)
        assert tn.points.min() >= 0.0 and tn.points.max() <= 1.0


def test_sgd_levy_ensemble_reaches_minimum():
    f = qk.get_objective("levy")
    rng = np.random.default_rng(3)
    traces = [qk.sgd_run(f, rng.uniform(0, 1, 2), 1e-3, 2000,
                         noise_sigma=1.0, seed=100 + i) for i in range(40)]
    frac, loss = qk.ensemble_stats(traces, f.minimizer, 0.1)
    assert frac[-1] > 0.0
    assert loss[0] > loss[-1]


def test_ensemble_stats_examples():
    f = quad_1d()

    def still(x0):
        pts = np.tile(np.asarray(x0, dtype=float), (5, 1))
        return qk.IterateTrace(pts, np.arange(5.0), np.asarray(f(pts)))

    x_star = np.array([0.5])
    all_in = [still([0.5]), still([0.5])]
    frac, _ = qk.ensemble_stats(all_in, x_star, 0.1)
    assert np.all(frac == 1.0)

    half = [still([0.5]), still([0.9])]
    frac, loss = qk.ensemble_stats(half, x_star, 0.1)
    assert np.all(frac == 0.5)
    assert np.allclose(loss, 0.5 * (f(np.array([0.5])) + f(np.array([0.9]))))


def test_ensemble_stats_errors():
    with pytest.raises(ValueError):
        qk.ensemble_stats([], np.zeros(1), 0.1)


def test_invalid_stepsizes():
    f = quad_1d()
    with pytest.raises(ValueError):
        qk.nagd_run(f, np.zeros(1), 0.0, 5)
    with pytest.raises(ValueError):
        qk.sgd_run(f, np.zeros(1), -0.1, 5)
    with pytest.raises(ValueError):
        qk.sgd_run(f, np.zeros(1), 0.1, 5, noise_sigma=-1.0)
