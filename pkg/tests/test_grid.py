import numpy as np
import pytest

from miniapps.errors import ConfigError
from miniapps.grid import (GridField, VorticityConfig, advance_vorticity,
                           apply_boundary_conditions, compute_velocity,
                           init_fields, jacobi_sweep, run_vorticity,
                           solve_poisson, split_counts, subdomain_for,
                           taylor_green_omega, taylor_green_psi, taylor_green_u,
                           taylor_green_v)
from miniapps.portability import SequentialBackend, make_backend
from miniapps.transport import CartTopology, single_rank_comm, spawn_ranks

SEQ = SequentialBackend()


def field_from(padded):
    padded = np.asarray(padded, dtype=float)
    f = GridField(padded.shape[0] - 2, padded.shape[1] - 2)
    f.array[:] = padded
    return f


def jacobi_oracle(psi, omega, hx, hy):
    """Independent per-cell sweep used to check the row-vectorized kernel."""
    nx, ny = psi.shape[0] - 2, psi.shape[1] - 2
    out = psi.copy()
    change = 0.0
    for i in range(1, nx + 1):
        for j in range(1, ny + 1):
            val = ((psi[i + 1, j] + psi[i - 1, j]) * hy * hy
                   + (psi[i, j + 1] + psi[i, j - 1]) * hx * hx
                   + omega[i, j] * hx * hx * hy * hy) / (2 * (hx * hx + hy * hy))
            change = max(change, abs(val - psi[i, j]))
            out[i, j] = val
    return out, change


# -- jacobi sweep -------------------------------------------------------------


def test_sweep_preserves_constant_field():
    psi = field_from(np.full((5, 6), 3.25))
    omega = field_from(np.zeros((5, 6)))
    out, change = jacobi_sweep(psi, omega, 0.1, 0.2, SEQ)
    assert change == 0.0
    assert np.array_equal(out.interior, psi.interior)


def test_sweep_uniform_spacing_is_five_point_average():
    rng = np.random.default_rng(5)
    pad = rng.normal(size=(6, 7))
    psi = field_from(pad)
    omega = field_from(np.zeros((6, 7)))
    out, _ = jacobi_sweep(psi, omega, 0.5, 0.5, SEQ)
    for i in range(1, 5):
        for j in range(1, 6):
            avg = (pad[i + 1, j] + pad[i - 1, j] + pad[i, j + 1] + pad[i, j - 1]) / 4.0
            assert out.array[i, j] == pytest.approx(avg, abs=1e-15)


def test_sweep_matches_hand_computed_oracle():
    rng = np.random.default_rng(17)
    pad_psi = rng.uniform(-1.0, 1.0, (5, 5))
    pad_omega = rng.uniform(-1.0, 1.0, (5, 5))
    hx, hy = 0.25, 0.125
    out, change = jacobi_sweep(field_from(pad_psi), field_from(pad_omega), hx, hy, SEQ)
    expected, expected_change = jacobi_oracle(pad_psi, pad_omega, hx, hy)
    assert np.max(np.abs(out.array[1:-1, 1:-1] - expected[1:-1, 1:-1])) < 1e-15
    assert change == pytest.approx(expected_change, abs=1e-15)


def test_sweep_monotone_change_on_model_problem():
    rng = np.random.default_rng(2)
    psi = GridField(8, 8)
    psi.interior[:] = rng.normal(size=(8, 8))
    omega = GridField(8, 8)
    scratch = psi.copy()
    changes = []
    for _ in range(40):
        _, change = jacobi_sweep(psi, omega, 0.1, 0.1, SEQ, scratch)
        psi.swap(scratch)
        changes.append(change)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(changes, changes[1:]))


# -- poisson solve ------------------------------------------------------------


def test_poisson_trivial_problem_converges_immediately():
    comm = single_rank_comm("grid")
    cfg = VorticityConfig(nx=8, ny=8, steps=0, tol=1e-4)
    psi, omega = GridField(8, 8), GridField(8, 8)
    iters, converged = solve_poisson(comm, psi, omega, cfg, SEQ)
    assert iters == 1 and converged
    assert np.array_equal(psi.interior, np.zeros((8, 8)))


def _manufactured_error(n, tol):
    comm = single_rank_comm("grid")
    cfg = VorticityConfig(nx=n, ny=n, steps=0, tol=tol)
    psi, omega = GridField(n, n), GridField(n, n)
    x = np.arange(n + 2) * cfg.hx
    y = np.arange(n + 2) * cfg.hy
    xx, yy = np.meshgrid(x, y, indexing="ij")
    omega.array[:] = 2 * np.pi ** 2 * np.sin(np.pi * xx) * np.sin(np.pi * yy)
    iters, converged = solve_poisson(comm, psi, omega, cfg, SEQ)
    assert converged and iters < cfg.max_jacobi_iters
    exact = np.sin(np.pi * xx) * np.sin(np.pi * yy)
    return cfg, psi, omega, np.max(np.abs(psi.interior - exact[1:-1, 1:-1]))


def test_poisson_matches_manufactured_solution():
    cfg, psi, omega, err = _manufactured_error(15, 1e-10)
    assert err < 4e-3  # discretization-level error for h = 1/16


def test_poisson_fixed_point_satisfies_discrete_equation():
    cfg, psi, omega, _ = _manufactured_error(15, 1e-10)
    hx2, hy2 = cfg.hx ** 2, cfg.hy ** 2
    a = psi.array
    lap = ((a[2:, 1:-1] - 2 * a[1:-1, 1:-1] + a[:-2, 1:-1]) / hx2
           + (a[1:-1, 2:] - 2 * a[1:-1, 1:-1] + a[1:-1, :-2]) / hy2)
    residual = np.max(np.abs(lap + omega.array[1:-1, 1:-1]))
    stencil_scale = 2 * (hx2 + hy2) / (hx2 * hy2)
    assert residual <= cfg.tol * stencil_scale


def test_poisson_nonconvergence_is_flagged_not_fatal():
    comm = single_rank_comm("grid")
    cfg = VorticityConfig(nx=8, ny=8, steps=0, tol=1e-14, max_jacobi_iters=3)
    psi, omega = GridField(8, 8), GridField(8, 8)
    omega.interior[:] = 1.0
    iters, converged = solve_poisson(comm, psi, omega, cfg, SEQ)
    assert iters == 3 and not converged


# -- velocity recovery ----------------------------------------------------------


def _coordinate_fields(n, hx, hy):
    x = np.arange(n + 2) * hx
    y = np.arange(n + 2) * hy
    return np.meshgrid(x, y, indexing="ij")


def test_velocity_from_linear_psi_in_y():
    xx, yy = _coordinate_fields(6, 0.1, 0.1)
    psi, u, v = field_from(yy), GridField(6, 6), GridField(6, 6)
    compute_velocity(psi, u, v, 0.1, 0.1, SEQ)
    assert np.allclose(u.interior, 1.0, atol=1e-13)
    assert np.allclose(v.interior, 0.0, atol=1e-13)


def test_velocity_from_linear_psi_in_x():
    xx, yy = _coordinate_fields(6, 0.1, 0.1)
    psi, u, v = field_from(xx), GridField(6, 6), GridField(6, 6)
    compute_velocity(psi, u, v, 0.1, 0.1, SEQ)
    assert np.allclose(u.interior, 0.0, atol=1e-13)
    assert np.allclose(v.interior, -1.0, atol=1e-13)


def test_velocity_second_order_on_smooth_field():
    def max_err(n):
        cfg = VorticityConfig(nx=n, ny=n, steps=0)
        xx, yy = _coordinate_fields(n, cfg.hx, cfg.hy)
        psi = field_from(np.sin(np.pi * xx) * np.sin(np.pi * yy))
        u, v = GridField(n, n), GridField(n, n)
        compute_velocity(psi, u, v, cfg.hx, cfg.hy, SEQ)
        exact = np.pi * np.sin(np.pi * xx) * np.cos(np.pi * yy)
        return np.max(np.abs(u.interior - exact[1:-1, 1:-1]))

    ratio = max_err(15) / max_err(31)
    assert 3.5 < ratio < 4.5


# -- vorticity transport ---------------------------------------------------------


def test_advance_keeps_uniform_vorticity():
    cfg = VorticityConfig(nx=4, ny=4, steps=1, dt=0.3, nu=2.0)
    omega = field_from(np.full((6, 6), 1.5))
    rng = np.random.default_rng(0)
    u = field_from(rng.normal(size=(6, 6)))
    v = field_from(rng.normal(size=(6, 6)))
    out = advance_vorticity(omega, u, v, cfg, SEQ)
    assert np.allclose(out.interior, 1.5, atol=1e-14)


def test_advance_zero_dt_is_identity():
    cfg = VorticityConfig(nx=4, ny=4, steps=1, dt=1.0)
    object.__setattr__(cfg, "dt", 0.0)  # dt = 0 is rejected at config level
    rng = np.random.default_rng(1)
    omega = field_from(rng.normal(size=(6, 6)))
    u = field_from(rng.normal(size=(6, 6)))
    v = field_from(rng.normal(size=(6, 6)))
    out = advance_vorticity(omega, u, v, cfg, SEQ)
    assert np.array_equal(out.interior, omega.interior)


def test_advance_diffuses_single_spike():
    # Pure diffusion of a unit spike on a 5x5 interior, one hand-checked step.
    h, dt, nu = 0.5, 0.01, 1.0
    cfg = VorticityConfig(nx=5, ny=5, steps=1, dt=dt, nu=nu, hx=h, hy=h)
    omega = GridField(5, 5)
    omega.array[3, 3] = 1.0
    u, v = GridField(5, 5), GridField(5, 5)
    out = advance_vorticity(omega, u, v, cfg, SEQ)
    center = 1.0 + dt * nu * (-4.0 / (h * h))
    side = dt * nu / (h * h)
    assert out.array[3, 3] == pytest.approx(center, abs=1e-15)
    for i, j in ((2, 3), (4, 3), (3, 2), (3, 4)):
        assert out.array[i, j] == pytest.approx(side, abs=1e-15)
    assert out.array[2, 2] == 0.0  # diagonal untouched by the 5-point stencil


# -- boundary conditions ----------------------------------------------------------


def test_cavity_wall_vorticity_without_lid_motion():
    cfg = VorticityConfig(nx=4, ny=4, steps=1, lid_speed=0.0)
    topo = CartTopology.grid(1)
    sub = subdomain_for(topo, 0, 4, 4)
    rng = np.random.default_rng(9)
    psi = field_from(rng.normal(size=(6, 6)))
    omega, u, v = GridField(4, 4), GridField(4, 4), GridField(4, 4)
    apply_boundary_conditions(psi, omega, u, v, sub, cfg)
    a = psi.array
    assert np.all(a[0, :] == 0.0) and np.all(a[:, 0] == 0.0)
    for j in range(1, 5):
        assert omega.array[0, j] == pytest.approx(
            2 * (a[0, j] - a[1, j]) / cfg.hx ** 2)
        assert omega.array[5, j] == pytest.approx(
            2 * (a[5, j] - a[4, j]) / cfg.hx ** 2)
    assert np.all(u.array[:, 5] == 0.0)  # lid at rest


def test_cavity_lid_velocity_and_thom_term():
    cfg = VorticityConfig(nx=4, ny=4, steps=1, lid_speed=2.0)
    sub = subdomain_for(CartTopology.grid(1), 0, 4, 4)
    psi, omega, u, v = (GridField(4, 4) for _ in range(4))
    apply_boundary_conditions(psi, omega, u, v, sub, cfg)
    assert np.all(u.array[1:5, 5] == 2.0)
    assert np.all(v.array[1:5, 5] == 0.0)
    assert np.allclose(omega.array[1:5, 5], -2.0 * 2.0 / cfg.hy)


def test_boundary_conditions_leave_interior_alone():
    cfg = VorticityConfig(nx=4, ny=4, steps=1)
    sub = subdomain_for(CartTopology.grid(1), 0, 4, 4)
    rng = np.random.default_rng(3)
    fields = [field_from(rng.normal(size=(6, 6))) for _ in range(4)]
    before = [f.interior.copy() for f in fields]
    apply_boundary_conditions(*fields, sub, cfg, t=0.2)
    for f, snap in zip(fields, before):
        assert np.array_equal(f.interior, snap)


def test_taylor_green_boundaries_track_analytic_solution():
    cfg = VorticityConfig(nx=5, ny=5, steps=1, scenario="taylor-green", nu=0.02)
    sub = subdomain_for(CartTopology.grid(1), 0, 5, 5)
    psi, omega, u, v = init_fields(cfg, sub)
    t = 0.37
    apply_boundary_conditions(psi, omega, u, v, sub, cfg, t=t)
    y = np.arange(7) * cfg.hy
    assert np.allclose(u.array[0, :], taylor_green_u(0.0, y, t, cfg.nu), atol=1e-15)
    assert np.allclose(u.array[6, :], taylor_green_u(1.0, y, t, cfg.nu), atol=1e-15)
    assert np.allclose(psi.array[:, 0], 0.0, atol=1e-15)
    assert np.allclose(omega.array[:, 6], 0.0, atol=1e-12)


def test_taylor_green_initial_state_is_analytic():
    cfg = VorticityConfig(nx=6, ny=6, steps=1, scenario="taylor-green")
    sub = subdomain_for(CartTopology.grid(1), 0, 6, 6)
    psi, omega, u, v = init_fields(cfg, sub)
    xx, yy = _coordinate_fields(6, cfg.hx, cfg.hy)
    assert np.allclose(psi.array, taylor_green_psi(xx, yy, 0.0, cfg.nu), atol=1e-15)
    assert np.allclose(omega.array, taylor_green_omega(xx, yy, 0.0, cfg.nu), atol=1e-13)
    assert np.allclose(v.array, taylor_green_v(xx, yy, 0.0, cfg.nu), atol=1e-14)


# -- full runs -----------------------------------------------------------------


def _run_and_gather(cfg, ranks, backend_kind="sequential", workers=4):
    def prog(comm):
        r = run_vorticity(cfg, comm, make_backend(backend_kind, workers))
        return (r.subdomain, r.psi.interior.copy(), r.omega.interior.copy(),
                r.jacobi_iterations, r.dt)

    out = spawn_ranks(ranks, "grid", prog)
    psi = np.zeros((cfg.nx, cfg.ny))
    omega = np.zeros((cfg.nx, cfg.ny))
    for sub, p, o, _, _ in out:
        psi[sub.i0:sub.i0 + sub.nx, sub.j0:sub.j0 + sub.ny] = p
        omega[sub.i0:sub.i0 + sub.nx, sub.j0:sub.j0 + sub.ny] = o
    return psi, omega, out


def test_zero_steps_returns_initial_fields_untimed():
    from miniapps.timing import KernelTimers

    cfg = VorticityConfig(nx=5, ny=5, steps=0, scenario="taylor-green")
    comm = single_rank_comm("grid")
    timers = KernelTimers(("jacobi_kernel", "halo_psi", "other_ops"))
    result = run_vorticity(cfg, comm, SEQ, timers)
    sub = subdomain_for(comm.topology, 0, 5, 5)
    expected = init_fields(cfg, sub)[0]
    assert np.array_equal(result.psi.array, expected.array)
    assert all(v == 0.0 for v in timers.totals.values())
    assert result.jacobi_iterations == []


def test_taylor_green_second_order_in_space():
    def tg_error(n):
        cfg = VorticityConfig(nx=n, ny=n, steps=10, dt=2e-4, nu=0.01, tol=1e-9,
                              scenario="taylor-green")
        psi, omega, out = _run_and_gather(cfg, 1)
        x = np.arange(1, n + 1) * cfg.hx
        y = np.arange(1, n + 1) * cfg.hy
        xx, yy = np.meshgrid(x, y, indexing="ij")
        exact = taylor_green_omega(xx, yy, 10 * cfg.dt, cfg.nu)
        return np.max(np.abs(omega - exact))

    coarse, fine = tg_error(32), tg_error(64)
    assert fine < coarse
    assert 3.0 < coarse / fine < 5.0


def test_decomposition_invariance_small_cavity():
    cfg = VorticityConfig(nx=16, ny=16, steps=5, tol=1e-6)
    psi1, omega1, _ = _run_and_gather(cfg, 1)
    psi4, omega4, _ = _run_and_gather(cfg, 4)
    assert np.max(np.abs(psi1 - psi4)) <= 10 * cfg.tol
    assert np.max(np.abs(omega1 - omega4)) <= 10 * cfg.tol


def test_backend_equivalence_small_cavity():
    cfg = VorticityConfig(nx=12, ny=12, steps=4, tol=1e-6)
    psi_s, omega_s, _ = _run_and_gather(cfg, 1, "sequential")
    psi_p, omega_p, _ = _run_and_gather(cfg, 1, "parallel", workers=4)
    assert np.max(np.abs(psi_s - psi_p)) <= 1e-8
    assert np.max(np.abs(omega_s - omega_p)) <= 1e-8


def test_fixed_config_is_bitwise_deterministic():
    cfg = VorticityConfig(nx=10, ny=10, steps=3)
    psi_a, omega_a, _ = _run_and_gather(cfg, 4)
    psi_b, omega_b, _ = _run_and_gather(cfg, 4)
    assert np.array_equal(psi_a, psi_b)
    assert np.array_equal(omega_a, omega_b)


def test_cavity_flow_follows_the_lid():
    cfg = VorticityConfig(nx=12, ny=12, steps=20, tol=1e-6)

    def prog(comm):
        r = run_vorticity(cfg, comm, SEQ)
        return r.u.interior.copy()

    u = spawn_ranks(1, "grid", prog)[0]
    assert np.mean(u[:, -1]) > 0.0  # cells under the lid are dragged along


def test_auto_timestep_respects_stability_limits():
    cfg = VorticityConfig(nx=16, ny=16, steps=1, nu=0.05)
    _, _, out = _run_and_gather(cfg, 1)
    dt = out[0][4]
    h = min(cfg.hx, cfg.hy)
    assert dt <= 0.2 * h * h / (4 * cfg.nu) + 1e-15
    assert dt <= 0.2 * h / cfg.lid_speed + 1e-15


def test_subdomains_tile_the_global_grid():
    for ranks in (1, 2, 3, 4, 6):
        topo = CartTopology.grid(ranks)
        cells = np.zeros((7, 5), dtype=int)
        for r in range(ranks):
            sub = subdomain_for(topo, r, 7, 5)
            cells[sub.i0:sub.i0 + sub.nx, sub.j0:sub.j0 + sub.ny] += 1
        assert np.all(cells == 1)


def test_split_rejects_overdecomposition():
    with pytest.raises(ConfigError):
        split_counts(2, 3)


def test_config_validation():
    with pytest.raises(ConfigError):
        VorticityConfig(nx=2, ny=5, steps=1)
    with pytest.raises(ConfigError):
        VorticityConfig(nx=5, ny=5, steps=1, tol=0.0)
    with pytest.raises(ConfigError):
        VorticityConfig(nx=5, ny=5, steps=1, scenario="channel")
    with pytest.raises(ConfigError):
        VorticityConfig(nx=5, ny=5, steps=1, dt=-1e-3)
