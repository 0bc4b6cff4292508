import numpy as np
import pytest
from scipy.integrate import solve_ivp

import qhdkit as qk
from qhdkit.dynamics import Radix2Problem, _flip_apply, kinetic_eigenvalues
from qhdkit.errors import ScheduleValidationError, StabilityError
from qhdkit.objectives import Objective


def test_nesterov_nonconvex_coefficients():
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=0.001)
    assert sched.kinetic_coeff(1.0) == pytest.approx(2.0 / 1.001)
    assert sched.potential_coeff(1.0) == pytest.approx(2.0)


def test_linear_qaa_schedule():
    sched = qk.make_schedule("linear_qaa", horizon=10.0)
    assert sched.anneal_fraction(0.0) == 0.0
    assert sched.anneal_fraction(5.0) == pytest.approx(0.5)
    assert sched.anneal_fraction(10.0) == 1.0


def test_custom_piecewise_knots():
    knots = [(0.0, 0.0), (400.0, 0.3), (640.0, 0.6), (800.0, 1.0)]
    sched = qk.make_schedule("custom_piecewise", knots=knots)
    assert sched.anneal_fraction(400.0) == pytest.approx(0.3)
    assert sched.anneal_fraction(520.0) == pytest.approx(0.45)
    with pytest.raises(ValueError):
        qk.make_schedule("custom_piecewise",
                         knots=[(0.0, 0.0), (1.0, 0.5), (1.0, 1.0)])
    with pytest.raises(ValueError):
        qk.make_schedule("custom_piecewise",
                         knots=[(0.0, 0.1), (1.0, 1.0)])


def test_ideal_scaling_accepts_nesterov_three_param():
    sched = qk.make_schedule("nesterov_three_param")
    assert sched.kinetic_coeff(2.0) == pytest.approx((2.0 / 2.0) / 4.0)
    assert sched.potential_coeff(2.0) == pytest.approx((2.0 / 2.0) * 16.0)


def test_ideal_scaling_rejects_fast_beta():
    # beta = 3 gamma = 6 log t has beta' = 6/t > exp(alpha) = 2/t
    with pytest.raises(ScheduleValidationError):
        qk.make_schedule("three_param_raw",
                         alpha=lambda t: np.log(2.0 / t),
                         beta=lambda t: 6.0 * np.log(t),
                         gamma=lambda t: 2.0 * np.log(t))


def test_ideal_scaling_rejects_wrong_gamma():
    with pytest.raises(ScheduleValidationError):
        qk.make_schedule("three_param_raw",
                         alpha=lambda t: np.log(2.0 / t),
                         beta=lambda t: 2.0 * np.log(t),
                         gamma=lambda t: 3.0 * np.log(t))


def test_kinetic_eigenvalues_layout():
    mesh = qk.Mesh(1, 8, qk.PERIODIC)
    eigs = kinetic_eigenvalues(mesh)
    k = np.array([0, 1, 2, 3, -4, -3, -2, -1], dtype=float)
    assert np.allclose(eigs, 0.5 * (2 * np.pi * k) ** 2)


def test_qhd_free_evolution_preserves_uniform_density():
    mesh = qk.Mesh(2, 16, qk.PERIODIC)
    zero = Objective(dim=2,
                     eval_fn=lambda x: np.zeros(len(np.atleast_2d(x))))
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=1e-3)
    traj = qk.qhd_evolve(mesh, zero, sched, 1.0, 1e-2)
    final = traj.final_state
    assert np.max(np.abs(final.density() - 1.0 / mesh.size)) < 1e-10


def test_qhd_rejects_dirichlet_mesh():
    mesh = qk.Mesh(1, 8, qk.DIRICHLET)
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=1e-3)
    with pytest.raises(ValueError):
        qk.qhd_evolve(mesh, qk.get_objective("levy"), sched, 1.0, 1e-2)


def test_qhd_norm_preservation():
    mesh = qk.Mesh(2, 32, qk.PERIODIC)
    f = qk.get_objective("levy")
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=1e-3)
    traj = qk.qhd_evolve(mesh, f, sched, 10.0, 1e-3)
    drift = np.abs(traj.observables["norm"] - 1.0)
    assert drift.max() <= 1e-8  # 10^4 exact phase multiplications


def test_qhd_snapshot_grid_validation():
    mesh = qk.Mesh(1, 8, qk.PERIODIC)
    f = qk.get_objective("levy", rescaled=False)
    f1 = Objective(dim=1, eval_fn=lambda x: np.atleast_2d(x)[:, 0] ** 2)
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=1e-3)
    with pytest.raises(ValueError):
        qk.qhd_evolve(mesh, f1, sched, 1.0, 1e-2, snapshot_times=[0.555])


def test_quadratic_closed_form_rate():
    # width dynamics of the damped quadratic evolution admit an independent
    # Riccati oracle: y' = -2i (t^3 y^2 - t^{-3}), sigma^2 = 1/(2 Re(1/y)),
    # E[f] = sigma^2 / 2 for f = x^2/2
    L, N, t0, T, dt = 16.0, 512, 1.0, 6.0, 1e-3

    def fx(pts):
        x = L * (pts[:, 0] - 0.5)
        return 0.5 * x ** 2

    f = Objective(dim=1, eval_fn=fx, minimizer=np.array([0.5]), f_min=0.0)
    mesh = qk.Mesh(1, N, qk.PERIODIC)
    sched = qk.make_schedule("raw", kinetic=lambda t: (2.0 / t ** 3) / L ** 2,
                             potential=lambda t: 2.0 * t ** 3)
    psi0 = qk.gaussian_state(mesh, [0.5], 1.0 / L ** 2)
    traj = qk.qhd_evolve(mesh, f, sched, T, dt, psi0=psi0, t0=t0,
                         observable_stride=20)

    def rhs(t, yv):
        y = yv[0] + 1j * yv[1]
        dy = -2j * (t ** 3 * y ** 2 - t ** -3)
        return [dy.real, dy.imag]

    sol = solve_ivp(rhs, (t0, T), [2.0, 0.0], rtol=1e-11, atol=1e-13,
                    dense_output=True)
    ts = traj.times
    yy = sol.sol(ts)
    y = yy[0] + 1j * yy[1]
    ef_oracle = (1.0 / (2.0 * np.real(1.0 / y))) / 2.0
    rel = np.abs(traj.observables["Ef"] - ef_oracle) / ef_oracle
    assert np.median(rel) < 0.05


def test_radix2_problem_examples():
    f1 = Objective(dim=1, eval_fn=lambda x: np.atleast_2d(x)[:, 0])
    prob = qk.radix2_problem(f1, 1)
    assert np.allclose(prob.diag, [0.0, 0.5])
    assert prob.decode("0") == pytest.approx(0.0)
    assert prob.decode("1") == pytest.approx(0.5)

    levy = qk.get_objective("levy")
    prob7 = qk.radix2_problem(levy, 7)
    assert prob7.diag.size == 2 ** 14
    # first variable owns the most significant block
    idx = (3 << 7) | 5
    assert np.allclose(prob7.points[idx], [3 / 128, 5 / 128])
    assert prob7.diag[idx] == pytest.approx(levy(np.array([3 / 128, 5 / 128])))


def test_radix2_encoding_creates_spurious_minima():
    # a convex parabola picks up extra hypercube-local minima under the
    # binary-fraction encoding
    f = Objective(dim=1,
                  eval_fn=lambda x: (np.atleast_2d(x)[:, 0] - 0.51) ** 2)
    prob = qk.radix2_problem(f, 4)
    n_local = 0
    for b in range(16):
        neighbors = [b ^ (1 << q) for q in range(4)]
        if all(prob.diag[b] < prob.diag[m] for m in neighbors):
            n_local += 1
    assert n_local >= 2


def test_qaa_zero_diagonal_stays_uniform():
    diag = np.zeros(2 ** 6)
    sched = qk.make_schedule("linear_qaa", horizon=2.0)
    traj = qk.qaa_evolve(diag, sched, 2.0, 1e-3)
    psi = traj.final_state
    dens = np.abs(psi) ** 2
    assert np.max(np.abs(dens - 1.0 / dens.size)) < 1e-8


def test_qaa_two_level_adiabatic_limit():
    # n = 1, H1 = diag(0, 1): slow linear anneal concentrates on bit 0;
    # cross-checked against a dense integration oracle
    diag = np.array([0.0, 1.0])
    T = 50.0
    sched = qk.make_schedule("linear_qaa", horizon=T)
    traj = qk.qaa_evolve(diag, sched, T, 1e-3)
    psi = traj.final_state
    p0 = abs(psi[0]) ** 2
    assert p0 > 0.95

    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    h1 = np.diag(diag)

    def rhs(t, yv):
        psi_c = yv[:2] + 1j * yv[2:]
        g = t / T
        h = -(1 - g) * sx + g * h1
        dpsi = -1j * (h @ psi_c)
        return np.concatenate([dpsi.real, dpsi.imag])

    y0 = np.concatenate([np.full(2, 1 / np.sqrt(2)), np.zeros(2)])
    sol = solve_ivp(rhs, (0, T), y0, rtol=1e-10, atol=1e-12)
    psi_oracle = sol.y[:2, -1] + 1j * sol.y[2:, -1]
    assert abs(p0 - abs(psi_oracle[0]) ** 2) < 1e-4


def test_qaa_leapfrog_reversibility():
    f = qk.get_objective("levy")
    prob = qk.radix2_problem(f, 3)
    n = 6
    shape = (2,) * n
    diag_nd = prob.diag.reshape(shape)
    T, dt = 1.0, 1e-3
    g = lambda t: t / T

    def h_apply(v, t):
        return -(1 - g(t)) * _flip_apply(v) + g(t) * diag_nd * v

    rng = np.random.default_rng(0)
    R0 = rng.standard_normal(shape)
    R0 /= np.linalg.norm(R0)
    I0 = -0.5 * dt * h_apply(R0, 0.0)
    R, I = R0.copy(), I0.copy()
    n_steps = int(T / dt)
    for k in range(n_steps):
        R = R + dt * h_apply(I, (k + 0.5) * dt)
        I = I - dt * h_apply(R, (k + 1) * dt)
    # reverse: negate the step and walk the time grid backwards
    for k in range(n_steps - 1, -1, -1):
        I = I + dt * h_apply(R, (k + 1) * dt)
        R = R - dt * h_apply(I, (k + 0.5) * dt)
    assert np.max(np.abs(R - R0)) < 1e-8
    assert np.max(np.abs(I - I0)) < 1e-8


def test_qaa_stability_error_on_large_dt():
    diag = np.linspace(0.0, 5.0, 2 ** 4)
    sched = qk.make_schedule("linear_qaa", horizon=1.0)
    with pytest.raises(StabilityError):
        qk.qaa_evolve(diag, sched, 1.0, 0.5)


def test_dilate_identity():
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=1e-3)
    d = qk.dilate_schedule(sched, lambda t: t, lambda t: 1.0)
    for t in (0.5, 1.0, 3.0):
        assert d.kinetic_coeff(t) == pytest.approx(sched.kinetic_coeff(t))
        assert d.potential_coeff(t) == pytest.approx(sched.potential_coeff(t))


def test_dilate_coefficient_doubling():
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=1e-3)
    d = qk.dilate_schedule(sched, lambda t: 2.0 * t, lambda t: 2.0)
    for t in (0.25, 1.0, 2.0):
        assert d.kinetic_coeff(t) == pytest.approx(
            2.0 * sched.kinetic_coeff(2.0 * t))
        assert d.potential_coeff(t) == pytest.approx(
            2.0 * sched.potential_coeff(2.0 * t))


def test_dilate_three_param_preserves_ideal_scaling():
    sched = qk.make_schedule("nesterov_three_param")
    d = qk.dilate_schedule(sched, lambda t: 2.0 * t, lambda t: 2.0,
                           sample_times=np.linspace(0.5, 5.0, 20))
    assert d.kind == "three_param"
    for t in (0.5, 1.0, 2.0):
        assert d.kinetic_coeff(t) == pytest.approx(
            2.0 * sched.kinetic_coeff(2.0 * t))


def test_dilate_rejects_decreasing_tau():
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=1e-3)
    with pytest.raises(ValueError):
        qk.dilate_schedule(sched, lambda t: -t, lambda t: -1.0)


def test_dilated_run_matches_original_density():
    mesh = qk.Mesh(1, 64, qk.PERIODIC)
    f = Objective(dim=1,
                  eval_fn=lambda x: (np.atleast_2d(x)[:, 0] - 0.3) ** 2,
                  minimizer=np.array([0.3]), f_min=0.0)
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=1e-3)
    T, dt = 4.0, 1e-3
    base = qk.qhd_evolve(mesh, f, sched, T, dt)
    dil = qk.dilate_schedule(sched, lambda t: 2.0 * t, lambda t: 2.0)
    half = qk.qhd_evolve(mesh, f, dil, T / 2.0, dt / 2.0)
    diff = np.max(np.abs(base.final_state.density()
                         - half.final_state.density()))
    assert diff < 1e-6


def test_nonuniform_dilation_within_integrator_tolerance():
    # tau(t) = t^2 / T maps [t0, T] onto itself nonlinearly; per-step grids
    # no longer coincide, so agreement is at the integrator's accuracy level
    mesh = qk.Mesh(1, 64, qk.PERIODIC)
    f = Objective(dim=1,
                  eval_fn=lambda x: (np.atleast_2d(x)[:, 0] - 0.5) ** 2,
                  minimizer=np.array([0.5]), f_min=0.0)
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=1e-3)
    T, t0 = 4.0, 1.0
    base = qk.qhd_evolve(mesh, f, sched, T, 2e-4, t0=t0)
    tau = lambda t: t ** 2 / T
    tau_dot = lambda t: 2.0 * t / T
    dil = qk.dilate_schedule(sched, tau, tau_dot)
    mapped = qk.qhd_evolve(mesh, f, dil, T, 2e-4, t0=np.sqrt(t0 * T))
    diff = np.max(np.abs(base.final_state.density()
                         - mapped.final_state.density()))
    assert diff < 1e-3


def test_trajectory_snapshot_lookup():
    mesh = qk.Mesh(1, 16, qk.PERIODIC)
    f = Objective(dim=1, eval_fn=lambda x: np.atleast_2d(x)[:, 0] ** 2)
    sched = qk.make_schedule("nesterov_nonconvex", stepsize=1e-3)
    traj = qk.qhd_evolve(mesh, f, sched, 1.0, 1e-2, snapshot_times=[0.5, 1.0])
    assert traj.snapshot_at(0.5).mesh == mesh
    with pytest.raises(KeyError):
        traj.snapshot_at(0.77)
