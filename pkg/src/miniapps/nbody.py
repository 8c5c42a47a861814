"""All-pairs Lennard-Jones N-body miniapp.

Particles live in an N x 10 table (mass, position, velocity, force) owned
by one rank each.  Every step runs velocity-Verlet half-stepping with a
full force recomputation: one self-block pass plus size-1 ring shifts of a
traveling position block, so each rank accumulates contributions from all
N_p particles.  Pair evaluations are all-pairs with no cutoff; distances
are softened below r_min and positions wrap periodically into [0, L).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .portability import Backend, Layout, View2D, parallel_for, parallel_reduce
from .timing import KernelTimers, timed
from .transport import Communicator

# Table column map: one row per particle.
COL_MASS = 0
COLS_POS = slice(1, 4)
COLS_VEL = slice(4, 7)
COLS_FRC = slice(7, 10)


@dataclass(frozen=True)
class LJParams:
    """Lennard-Jones pair interaction, V(r) = 4*eps*((sig/r)^12 - (sig/r)^6).

    Distances below the softening floor r_min are clamped before the
    potential or force magnitude is evaluated.
    """

    epsilon: float = 1.0
    sigma: float = 1.0
    r_min: float | None = None

    def __post_init__(self):
        if self.r_min is None:
            object.__setattr__(self, "r_min", 0.01 * self.sigma)
        if self.epsilon <= 0 or self.sigma <= 0 or self.r_min <= 0:
            raise ConfigError("epsilon, sigma and r_min must be positive")


@dataclass(frozen=True)
class SimBox:
    """Cubic periodic box of side length per axis; positions wrap into [0, L)."""

    length: float

    def __post_init__(self):
        if self.length <= 0:
            raise ConfigError("box length must be positive")


class ParticleSet:
    """Rank-local block of the particle table (N x 10 doubles)."""

    def __init__(self, count: int, layout: Layout = Layout.ROW_MAJOR,
                 table: View2D | None = None):
        if table is None:
            table = View2D(count, 10, layout)
        if table.cols != 10 or table.rows != count:
            raise ConfigError("particle table must be count x 10")
        self.count = count
        self.table = table

    @property
    def masses(self) -> np.ndarray:
        return self.table.array[:, COL_MASS]

    @property
    def positions(self) -> np.ndarray:
        return self.table.array[:, COLS_POS]

    @property
    def velocities(self) -> np.ndarray:
        return self.table.array[:, COLS_VEL]

    @property
    def forces(self) -> np.ndarray:
        return self.table.array[:, COLS_FRC]


@dataclass(frozen=True)
class NBodyConfig:
    n_particles: int
    steps: int
    dt: float = 1e-3
    params: LJParams = field(default_factory=LJParams)
    box: SimBox | None = None
    compute_energy: bool = True
    seed: int = 12345
    layout: Layout = Layout.ROW_MAJOR
    temperature: float = 1.0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ConfigError("particle count must be >= 1")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.steps < 0:
            raise ConfigError("step count must be >= 0")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.box is None:
            object.__setattr__(self, "box", auto_box(self.n_particles, self.params.sigma))


def auto_box(n_particles: int, sigma: float) -> SimBox:
    """Box sized so a cubic lattice of n particles fits at spacing 1.25 * r_m."""
    cells = max(1, math.ceil(n_particles ** (1.0 / 3.0) - 1e-9))
    spacing = 1.25 * (2.0 ** (1.0 / 6.0)) * sigma
    return SimBox(cells * spacing)


@dataclass
class ForceCounters:
    """Instrumentation hook: pair evaluations performed by force passes."""

    pair_evals: int = 0


def lj_potential(r, params: LJParams):
    """Pair potential at separation r (scalar or array), clamped at r_min."""
    rc = np.maximum(r, params.r_min)
    sr6 = (params.sigma / rc) ** 6
    return 4.0 * params.epsilon * (sr6 * sr6 - sr6)


def lj_force(dr: np.ndarray, params: LJParams) -> np.ndarray:
    """Force on particle i given the displacement dr from i to j.

    Magnitude 24*eps*(2*sig^12/r^13 - sig^6/r^7) along the unit vector,
    repulsive (pushing i away from j) below the potential minimum.  The
    magnitude uses the clamped distance; the direction uses dr itself.
    A zero displacement has no defined direction and yields zero force.
    """
    dr = np.asarray(dr, dtype=np.float64)
    r = float(np.sqrt(np.dot(dr, dr)))
    if r == 0.0:
        return np.zeros(3)
    rc = max(r, params.r_min)
    sr6 = (params.sigma / rc) ** 6
    mag = 24.0 * params.epsilon * (2.0 * sr6 * sr6 - sr6) / rc
    return -mag * dr / r


def compute_forces_local(local: ParticleSet, visiting_pos: np.ndarray, self_block: bool,
                         params: LJParams, backend: Backend,
                         pe_scratch: np.ndarray | None = None,
                         counters: ForceCounters | None = None) -> None:
    """Accumulate forces on local particles from one visiting position block.

    When self_block is set the visiting block is the local block itself and
    the i == j pair is excluded.  With pe_scratch given, each ordered pair
    adds V(r)/2 to the local particle's slot so the global reduction counts
    every pair exactly once.
    """
    pos = local.positions
    frc = local.forces
    eps, sig, rmin = params.epsilon, params.sigma, params.r_min
    vis = np.asarray(visiting_pos, dtype=np.float64).reshape(-1, 3)

    def kernel(i: int) -> None:
        dx = vis - pos[i]
        r = np.sqrt(np.einsum("ij,ij->i", dx, dx))
        if self_block:
            r[i] = np.inf
        rc = np.maximum(r, rmin)
        sr6 = (sig / rc) ** 6
        sr12 = sr6 * sr6
        # Coincident distinct particles have no defined direction: skip them.
        inv_r = np.where(r > 0.0, 1.0 / np.where(r > 0.0, r, 1.0), 0.0)
        w = (24.0 * eps) * (2.0 * sr12 - sr6) / rc * inv_r
        frc[i] -= w @ dx
        if pe_scratch is not None:
            pe_scratch[i] += 2.0 * eps * float(np.sum(sr12 - sr6))

    parallel_for(backend, local.count, kernel)
    if counters is not None:
        counters.pair_evals += local.count * vis.shape[0] - (local.count if self_block else 0)


def ring_force_accumulation(comm: Communicator, local: ParticleSet, params: LJParams,
                            backend: Backend, timers: KernelTimers | None = None,
                            pe_scratch: np.ndarray | None = None,
                            counters: ForceCounters | None = None) -> float | None:
    """Full force recomputation: self pass plus size-1 ring-shifted passes.

    All ranks must hold equal-sized blocks.  Returns the rank-local
    potential-energy partial (via parallel_reduce) when pe_scratch is given.
    """
    local.forces[:] = 0.0
    if pe_scratch is not None:
        pe_scratch[:] = 0.0

    with timed(timers, backend, "force"):
        compute_forces_local(local, local.positions, True, params, backend,
                             pe_scratch, counters)

    traveling = local.positions.copy()
    for _ in range(comm.size - 1):
        with timed(timers, backend, "other_ops"):
            traveling = comm.ring_shift(traveling)
        with timed(timers, backend, "force"):
            compute_forces_local(local, traveling, False, params, backend,
                                 pe_scratch, counters)

    if pe_scratch is None:
        return None
    with timed(timers, backend, "reduction"):
        pe = parallel_reduce(backend, local.count, lambda i: pe_scratch[i],
                             lambda a, b: a + b, 0.0)
    return pe


def verlet_step(local: ParticleSet, config: NBodyConfig, comm: Communicator,
                backend: Backend, timers: KernelTimers | None = None,
                pe_scratch: np.ndarray | None = None,
                counters: ForceCounters | None = None) -> float | None:
    """One velocity-Verlet step: half kick, drift + wrap, new forces, half kick."""
    dt = config.dt
    length = config.box.length
    mass = local.masses
    pos = local.positions
    vel = local.velocities
    frc = local.forces

    def half_kick(i: int) -> None:
        vel[i] += frc[i] * (0.5 * dt / mass[i])

    def drift_wrap(i: int) -> None:
        pos[i] = np.mod(pos[i] + vel[i] * dt, length)

    with timed(timers, backend, "other_ops"):
        parallel_for(backend, local.count, half_kick)
        parallel_for(backend, local.count, drift_wrap)
    pe = ring_force_accumulation(comm, local, config.params, backend, timers,
                                 pe_scratch, counters)
    with timed(timers, backend, "other_ops"):
        parallel_for(backend, local.count, half_kick)
    return pe


def total_energy(comm: Communicator, local: ParticleSet, pe_partial: float | None,
                 backend: Backend, timers: KernelTimers | None = None) -> float:
    """Global kinetic plus potential energy, reduced across ranks."""
    mass = local.masses
    vel = local.velocities

    with timed(timers, backend, "reduction"):
        ke = parallel_reduce(backend, local.count,
                             lambda i: 0.5 * mass[i] * float(np.dot(vel[i], vel[i])),
                             lambda a, b: a + b, 0.0)
        energy = comm.allreduce(ke + (pe_partial or 0.0), "sum")
    return energy


def init_particles(config: NBodyConfig, comm: Communicator) -> ParticleSet:
    """Deterministic seeded initial state: jittered cubic lattice, thermal velocities.

    Every rank generates the same global arrays and keeps its contiguous
    block, so the global state is independent of the rank count.
    """
    n = config.n_particles
    if n % comm.size != 0:
        raise ConfigError(
            f"{n} particles not divisible by {comm.size} ranks (equal partitioning)")
    length = config.box.length
    cells = max(1, math.ceil(n ** (1.0 / 3.0) - 1e-9))
    spacing = length / cells
    r_lattice = (2.0 ** (1.0 / 6.0)) * config.params.sigma
    if spacing < r_lattice * (1.0 - 1e-12):
        raise ConfigError(
            f"box too small: lattice spacing {spacing:.4g} < {r_lattice:.4g}")

    rng = np.random.default_rng(config.seed)
    idx = np.arange(n)
    sites = np.stack([idx // (cells * cells), (idx // cells) % cells, idx % cells],
                     axis=1).astype(np.float64)
    pos = (sites + 0.5) * spacing + rng.uniform(-0.05 * spacing, 0.05 * spacing, (n, 3))
    vel = rng.normal(0.0, math.sqrt(config.temperature), (n, 3))

    n_local = n // comm.size
    lo = comm.rank * n_local
    local = ParticleSet(n_local, config.layout)
    local.masses[:] = 1.0
    local.positions[:] = pos[lo:lo + n_local]
    local.velocities[:] = vel[lo:lo + n_local]
    return local


@dataclass
class NBodyResult:
    particles: ParticleSet
    initial_energy: float | None
    energies: list[float]
    counters: ForceCounters
    loop_seconds: float


def run_nbody(config: NBodyConfig, comm: Communicator, backend: Backend,
              timers: KernelTimers | None = None,
              vtk_dir=None) -> NBodyResult:
    """Run the miniapp on one rank; initialization is never timed."""
    import time as _time

    counters = ForceCounters()
    local = init_particles(config, comm)
    pe_scratch = np.zeros(local.count) if config.compute_energy else None

    # Forces consistent with the initial positions, outside the timed loop.
    pe = ring_force_accumulation(comm, local, config.params, backend,
                                 pe_scratch=pe_scratch)
    initial_energy = (total_energy(comm, local, pe, backend)
                      if config.compute_energy else None)

    energies: list[float] = []
    loop_start = _time.perf_counter()
    for _ in range(config.steps):
        pe = verlet_step(local, config, comm, backend, timers, pe_scratch, counters)
        if config.compute_energy:
            energies.append(total_energy(comm, local, pe, backend, timers))
    if vtk_dir is not None:
        from .vtkio import VtkDataset, write_vtk

        dataset = VtkDataset.point_cloud(
            local.positions,
            scalars=[("mass", local.masses)],
            vectors=[("velocity", local.velocities)])
        with timed(timers, backend, "other_ops"):
            write_vtk(dataset, "nbody", comm.rank, config.steps, vtk_dir)
    loop_seconds = _time.perf_counter() - loop_start
    return NBodyResult(local, initial_energy, energies, counters, loop_seconds)
