"""Desk-scale scientific-computing miniapps on a portable execution layer.

Two miniapps (an all-pairs Lennard-Jones N-body simulation and a 2-D
vorticity / stream-function solver) run over parallel-for / parallel-reduce
backends and an in-process rank transport with ring- and halo-exchange
patterns, plus a kernel-timing benchmark harness with CSV and VTK output.
"""

from .bench import (BenchResult, CategorySummary, TimingRecord, read_raw_csv,
                    read_summary_csv, run_benchmark, summarize, write_raw_csv,
                    write_summary_csv)
from .errors import ConfigError
from .grid import (GridField, RankSubdomain, VorticityConfig, advance_vorticity,
                   apply_boundary_conditions, compute_velocity, jacobi_sweep,
                   run_vorticity, solve_poisson, subdomain_for)
from .nbody import (ForceCounters, LJParams, NBodyConfig, ParticleSet, SimBox,
                    compute_forces_local, init_particles, lj_force, lj_potential,
                    ring_force_accumulation, run_nbody, total_energy, verlet_step)
from .portability import (Backend, DataParallelBackend, Layout, SequentialBackend,
                          View2D, make_backend, parallel_for, parallel_reduce,
                          synchronize)
from .timing import KernelTimers
from .transport import (CartTopology, Communicator, TransportError, dims_create,
                        single_rank_comm, spawn_ranks)
from .vtkio import VtkDataset, write_vtk

__version__ = "0.1.0"
