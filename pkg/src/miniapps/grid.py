"""2-D vorticity / stream-function miniapp on rank-local subdomains.

Index convention: i is the x (row) index and j the y (column) index;
fields are stored row-major over a padded (nx+2, ny+2) buffer whose outer
ring holds Dirichlet boundary values on physical edges and halo copies of
neighbor interiors elsewhere.  The physical domain is the unit square with
h_x = 1/(NX+1), h_y = 1/(NY+1) unless spacings are given explicitly.

Each timestep: Jacobi-solve the Poisson equation laplacian(psi) = -omega,
recover velocities u = d(psi)/dy, v = -d(psi)/dx by central differences,
then advance omega with explicit forward Euler on
d(omega)/dt + u d(omega)/dx + v d(omega)/dy = nu laplacian(omega).
"""

from __future__ import annotations

import dataclasses
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .portability import Backend, Layout, View2D, parallel_for
from .timing import KernelTimers, timed
from .transport import CartTopology, Communicator

SCENARIOS = ("cavity", "taylor-green")


class GridField:
    """Interior nx x ny field plus a one-cell halo/boundary ring."""

    def __init__(self, nx: int, ny: int, view: View2D | None = None):
        if nx < 1 or ny < 1:
            raise ConfigError("grid field needs at least one interior cell per axis")
        self.nx = nx
        self.ny = ny
        if view is None:
            view = View2D(nx + 2, ny + 2, Layout.ROW_MAJOR)
        if (view.rows, view.cols) != (nx + 2, ny + 2):
            raise ConfigError("padded buffer does not match interior dimensions")
        self._view = view

    @property
    def array(self) -> np.ndarray:
        """Padded (nx+2, ny+2) view; interior is [1:nx+1, 1:ny+1]."""
        return self._view.array

    @property
    def interior(self) -> np.ndarray:
        return self.array[1:self.nx + 1, 1:self.ny + 1]

    def copy(self) -> "GridField":
        return GridField(self.nx, self.ny, self._view.copy())

    def swap(self, other: "GridField") -> None:
        """Exchange storage with another field of identical shape (O(1))."""
        assert (self.nx, self.ny) == (other.nx, other.ny)
        self._view, other._view = other._view, self._view


@dataclass(frozen=True)
class VorticityConfig:
    nx: int
    ny: int
    steps: int
    hx: float | None = None
    hy: float | None = None
    nu: float = 0.01
    dt: float | None = None
    tol: float = 1e-4
    max_jacobi_iters: int | None = None
    scenario: str = "cavity"
    lid_speed: float = 1.0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ConfigError("grid must be at least 3x3")
        if self.steps < 0:
            raise ConfigError("step count must be >= 0")
        if self.tol <= 0:
            raise ConfigError("tolerance must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.nu < 0:
            raise ConfigError("viscosity must be >= 0")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        if self.hx is None:
            object.__setattr__(self, "hx", 1.0 / (self.nx + 1))
        if self.hy is None:
            object.__setattr__(self, "hy", 1.0 / (self.ny + 1))
        if self.max_jacobi_iters is None:
            object.__setattr__(self, "max_jacobi_iters", 10 * self.nx * self.ny)
        if self.max_jacobi_iters < 1:
            raise ConfigError("iteration cap must be >= 1")


@dataclass(frozen=True)
class RankSubdomain:
    """One rank's tile of the global interior grid."""

    coords: tuple[int, int]
    nx: int
    ny: int
    i0: int
    j0: int
    at_ilo: bool
    at_ihi: bool
    at_jlo: bool
    at_jhi: bool


def split_counts(n: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous (offset, size) balanced split of n cells over parts ranks."""
    if parts > n:
        raise ConfigError(f"cannot split {n} cells over {parts} ranks")
    base, rem = divmod(n, parts)
    out = []
    offset = 0
    for p in range(parts):
        size = base + (1 if p < rem else 0)
        out.append((offset, size))
        offset += size
    return out


def subdomain_for(topology: CartTopology, rank: int, nx_global: int,
                  ny_global: int) -> RankSubdomain:
    ci, cj = topology.coords(rank)
    i0, nx = split_counts(nx_global, topology.dims[0])[ci]
    j0, ny = split_counts(ny_global, topology.dims[1])[cj]
    return RankSubdomain(
        coords=(ci, cj), nx=nx, ny=ny, i0=i0, j0=j0,
        at_ilo=ci == 0, at_ihi=ci == topology.dims[0] - 1,
        at_jlo=cj == 0, at_jhi=cj == topology.dims[1] - 1)


# -- kernels ---------------------------------------------------------------


def jacobi_sweep(psi: GridField, omega: GridField, hx: float, hy: float,
                 backend: Backend, out: GridField | None = None):
    """One Jacobi iteration for laplacian(psi) = -omega on the interior.

    psi halos must be current.  Writes the new iterate into out (allocated
    if omitted) and returns (out, max interior |delta|); the wall/halo ring
    of out is left untouched.
    """
    nx, ny = psi.nx, psi.ny
    if out is None:
        out = psi.copy()
    pa, oa, na = psi.array, omega.array, out.array
    hx2, hy2 = hx * hx, hy * hy
    denom = 2.0 * (hx2 + hy2)
    change = np.zeros(nx)

    def kernel(k: int) -> None:
        i = k + 1
        row = ((pa[i + 1, 1:ny + 1] + pa[i - 1, 1:ny + 1]) * hy2
               + (pa[i, 2:ny + 2] + pa[i, 0:ny]) * hx2
               + oa[i, 1:ny + 1] * (hx2 * hy2)) / denom
        change[k] = np.max(np.abs(row - pa[i, 1:ny + 1]))
        na[i, 1:ny + 1] = row

    parallel_for(backend, nx, kernel)
    return out, float(change.max())


def solve_poisson(comm: Communicator, psi: GridField, omega: GridField,
                  config: VorticityConfig, backend: Backend,
                  timers: KernelTimers | None = None) -> tuple[int, bool]:
    """Jacobi-iterate psi until the global max update drops below tol.

    Each iteration exchanges psi halos, sweeps, and max-reduces the local
    update norms.  Returns (iterations, converged); hitting the iteration
    cap is flagged, not fatal.  Sweep compute lands in the jacobi_kernel
    bucket, solver communication (halos and the convergence reduction) in
    halo_psi.
    """
    scratch = psi.copy()
    iterations = 0
    converged = False
    while iterations < config.max_jacobi_iters:
        with timed(timers, backend, "halo_psi"):
            comm.halo_exchange(psi)
        with timed(timers, backend, "jacobi_kernel"):
            _, change = jacobi_sweep(psi, omega, config.hx, config.hy, backend, scratch)
        psi.swap(scratch)
        with timed(timers, backend, "halo_psi"):
            global_change = comm.allreduce(change, "max")
        iterations += 1
        if global_change < config.tol:
            converged = True
            break
    return iterations, converged


def compute_velocity(psi: GridField, u: GridField, v: GridField, hx: float,
                     hy: float, backend: Backend) -> None:
    """Central-difference velocities u = d(psi)/dy, v = -d(psi)/dx (interior)."""
    nx, ny = psi.nx, psi.ny
    pa, ua, va = psi.array, u.array, v.array

    def kernel(k: int) -> None:
        i = k + 1
        ua[i, 1:ny + 1] = (pa[i, 2:ny + 2] - pa[i, 0:ny]) / (2.0 * hy)
        va[i, 1:ny + 1] = -(pa[i + 1, 1:ny + 1] - pa[i - 1, 1:ny + 1]) / (2.0 * hx)

    parallel_for(backend, nx, kernel)


def advance_vorticity(omega: GridField, u: GridField, v: GridField,
                      config: VorticityConfig, backend: Backend,
                      out: GridField | None = None) -> GridField:
    """Forward-Euler vorticity transport with 5-point diffusion and central advection.

    omega halos must be current; u and v hold interior velocities.  Returns
    the advanced field (interior written; ring untouched).
    """
    nx, ny = omega.nx, omega.ny
    if out is None:
        out = omega.copy()
    oa, ua, va, na = omega.array, u.array, v.array, out.array
    hx, hy, dt, nu = config.hx, config.hy, config.dt, config.nu

    def kernel(k: int) -> None:
        i = k + 1
        mid = oa[i, 1:ny + 1]
        lap = ((oa[i + 1, 1:ny + 1] - 2.0 * mid + oa[i - 1, 1:ny + 1]) / (hx * hx)
               + (oa[i, 2:ny + 2] - 2.0 * mid + oa[i, 0:ny]) / (hy * hy))
        ddx = (oa[i + 1, 1:ny + 1] - oa[i - 1, 1:ny + 1]) / (2.0 * hx)
        ddy = (oa[i, 2:ny + 2] - oa[i, 0:ny]) / (2.0 * hy)
        na[i, 1:ny + 1] = mid + dt * (nu * lap
                                      - ua[i, 1:ny + 1] * ddx
                                      - va[i, 1:ny + 1] * ddy)

    parallel_for(backend, nx, kernel)
    return out


# -- scenarios -------------------------------------------------------------


def taylor_green_psi(x, y, t: float, nu: float):
    return np.sin(np.pi * x) * np.sin(np.pi * y) * math.exp(-2.0 * np.pi ** 2 * nu * t)


def taylor_green_omega(x, y, t: float, nu: float):
    return 2.0 * np.pi ** 2 * taylor_green_psi(x, y, t, nu)


def taylor_green_u(x, y, t: float, nu: float):
    return (np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
            * math.exp(-2.0 * np.pi ** 2 * nu * t))


def taylor_green_v(x, y, t: float, nu: float):
    return (-np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
            * math.exp(-2.0 * np.pi ** 2 * nu * t))


def _pad_coords(sub: RankSubdomain, hx: float, hy: float):
    """Physical coordinates of the padded local grid (walls land on 0 and 1)."""
    x = (sub.i0 + np.arange(sub.nx + 2)) * hx
    y = (sub.j0 + np.arange(sub.ny + 2)) * hy
    return x, y


def apply_boundary_conditions(psi: GridField, omega: GridField, u: GridField,
                              v: GridField, sub: RankSubdomain,
                              config: VorticityConfig, t: float = 0.0) -> None:
    """Write scenario boundary values into the physical edges of the ring.

    Cavity: psi = 0 on all walls, no-slip except u = lid_speed on the y-high
    lid, and wall vorticity from the first-order Thom relation
    omega_wall = 2*(psi_wall - psi_adj)/h^2 - 2*U_wall/h.  Taylor-Green:
    Dirichlet psi, omega, u, v from the decaying-vortex solution at time t.
    Interior cells and interior-side halos are never touched.
    """
    if config.scenario == "cavity":
        _apply_cavity(psi, omega, u, v, sub, config)
    else:
        _apply_taylor_green(psi, omega, u, v, sub, config, t)


def _apply_cavity(psi, omega, u, v, sub, config):
    nx, ny = sub.nx, sub.ny
    hx, hy = config.hx, config.hy
    lid = config.lid_speed
    pa, oa, ua, va = psi.array, omega.array, u.array, v.array
    if sub.at_ilo:
        pa[0, :] = 0.0
        ua[0, :] = 0.0
        va[0, :] = 0.0
        oa[0, 1:ny + 1] = 2.0 * (pa[0, 1:ny + 1] - pa[1, 1:ny + 1]) / (hx * hx)
    if sub.at_ihi:
        pa[nx + 1, :] = 0.0
        ua[nx + 1, :] = 0.0
        va[nx + 1, :] = 0.0
        oa[nx + 1, 1:ny + 1] = 2.0 * (pa[nx + 1, 1:ny + 1] - pa[nx, 1:ny + 1]) / (hx * hx)
    if sub.at_jlo:
        pa[:, 0] = 0.0
        ua[:, 0] = 0.0
        va[:, 0] = 0.0
        oa[1:nx + 1, 0] = 2.0 * (pa[1:nx + 1, 0] - pa[1:nx + 1, 1]) / (hy * hy)
    if sub.at_jhi:
        pa[:, ny + 1] = 0.0
        ua[:, ny + 1] = lid
        va[:, ny + 1] = 0.0
        oa[1:nx + 1, ny + 1] = (2.0 * (pa[1:nx + 1, ny + 1] - pa[1:nx + 1, ny]) / (hy * hy)
                                - 2.0 * lid / hy)


def _apply_taylor_green(psi, omega, u, v, sub, config, t):
    nx, ny = sub.nx, sub.ny
    nu = config.nu
    x, y = _pad_coords(sub, config.hx, config.hy)
    strips = []
    if sub.at_ilo:
        strips.append((np.s_[0, :], x[0], y))
    if sub.at_ihi:
        strips.append((np.s_[nx + 1, :], x[nx + 1], y))
    if sub.at_jlo:
        strips.append((np.s_[:, 0], x, y[0]))
    if sub.at_jhi:
        strips.append((np.s_[:, ny + 1], x, y[ny + 1]))
    for sl, xs, ys in strips:
        psi.array[sl] = taylor_green_psi(xs, ys, t, nu)
        omega.array[sl] = taylor_green_omega(xs, ys, t, nu)
        u.array[sl] = taylor_green_u(xs, ys, t, nu)
        v.array[sl] = taylor_green_v(xs, ys, t, nu)


def init_fields(config: VorticityConfig, sub: RankSubdomain):
    """Scenario initial state: zero fields for the cavity, analytic t=0 for
    Taylor-Green (including the full padded ring)."""
    psi = GridField(sub.nx, sub.ny)
    omega = GridField(sub.nx, sub.ny)
    u = GridField(sub.nx, sub.ny)
    v = GridField(sub.nx, sub.ny)
    if config.scenario == "taylor-green":
        x, y = _pad_coords(sub, config.hx, config.hy)
        xx, yy = np.meshgrid(x, y, indexing="ij")
        psi.array[:] = taylor_green_psi(xx, yy, 0.0, config.nu)
        omega.array[:] = taylor_green_omega(xx, yy, 0.0, config.nu)
        u.array[:] = taylor_green_u(xx, yy, 0.0, config.nu)
        v.array[:] = taylor_green_v(xx, yy, 0.0, config.nu)
    apply_boundary_conditions(psi, omega, u, v, sub, config, t=0.0)
    return psi, omega, u, v


def stable_timestep(config: VorticityConfig, comm: Communicator, u: GridField,
                    v: GridField) -> float:
    """Explicit-Euler limit 0.2 * min(h^2/(4 nu), h / max|u|) at t = 0."""
    h = min(config.hx, config.hy)
    umax_local = max(float(np.max(np.abs(u.array))), float(np.max(np.abs(v.array))))
    umax = comm.allreduce(umax_local, "max")
    limit = math.inf
    if config.nu > 0:
        limit = h * h / (4.0 * config.nu)
    if umax > 0:
        limit = min(limit, h / umax)
    if not math.isfinite(limit):
        return 0.1 * h
    return 0.2 * limit


@dataclass
class VorticityResult:
    psi: GridField
    omega: GridField
    u: GridField
    v: GridField
    subdomain: RankSubdomain
    dt: float
    jacobi_iterations: list[tuple[int, bool]] = field(default_factory=list)
    loop_seconds: float = 0.0


def run_vorticity(config: VorticityConfig, comm: Communicator, backend: Backend,
                  timers: KernelTimers | None = None, vtk_dir=None) -> VorticityResult:
    """Run the miniapp on one rank; initialization is never timed.

    Per step: solve_poisson, exchange psi halos, recover velocities,
    exchange omega halos, advance omega, re-apply boundary conditions.
    """
    topo = comm.topology
    if topo.kind != "grid":
        raise ConfigError("vorticity miniapp requires a grid topology")
    sub = subdomain_for(topo, comm.rank, config.nx, config.ny)
    psi, omega, u, v = init_fields(config, sub)
    if config.dt is None:
        config = dataclasses.replace(config, dt=stable_timestep(config, comm, u, v))

    scratch = omega.copy()
    iterations: list[tuple[int, bool]] = []
    loop_start = _time.perf_counter()
    for step in range(config.steps):
        iterations.append(solve_poisson(comm, psi, omega, config, backend, timers))
        with timed(timers, backend, "halo_psi"):
            comm.halo_exchange(psi)
        with timed(timers, backend, "other_ops"):
            compute_velocity(psi, u, v, config.hx, config.hy, backend)
            comm.halo_exchange(omega)
            advance_vorticity(omega, u, v, config, backend, scratch)
            omega.swap(scratch)
            apply_boundary_conditions(psi, omega, u, v, sub, config,
                                      t=(step + 1) * config.dt)
    if vtk_dir is not None:
        from .vtkio import VtkDataset, write_vtk

        uv = np.stack([u.interior.reshape(-1, order="F"),
                       v.interior.reshape(-1, order="F"),
                       np.zeros(sub.nx * sub.ny)], axis=1)
        dataset = VtkDataset.structured_points(
            dims=(sub.nx, sub.ny), origin=((sub.i0 + 1) * config.hx, (sub.j0 + 1) * config.hy),
            spacing=(config.hx, config.hy),
            scalars=[("psi", psi.interior.reshape(-1, order="F")),
                     ("omega", omega.interior.reshape(-1, order="F"))],
            vectors=[("velocity", uv)])
        with timed(timers, backend, "other_ops"):
            write_vtk(dataset, "vorticity", comm.rank, config.steps, vtk_dir)
    loop_seconds = _time.perf_counter() - loop_start
    return VorticityResult(psi, omega, u, v, sub, config.dt, iterations, loop_seconds)
