"""In-process rank transport: Cartesian topologies and blocking message
exchange between worker threads.

Ranks are threads sharing a message fabric of FIFO mailboxes keyed by
(destination, source, tag).  Sends are buffered (never block), receives
block, so any cyclic sendrecv pattern is deadlock free.  Two topology
kinds are supported: a periodic 1-D ring and a non-periodic 2-D grid with
row-major rank-to-coordinate mapping.
"""

from __future__ import annotations

import math
import operator
import queue
import threading
import time
from dataclasses import dataclass

import numpy as np

DEFAULT_TIMEOUT = 120.0
_POLL = 0.05

# Fixed tag space.  Halo tags name the direction the *sender* pushed
# toward, so a rank receiving from its i-low neighbour matches TAG_HALO_IHI.
TAG_RING = 1
TAG_HALO_ILO = 10
TAG_HALO_IHI = 11
TAG_HALO_JLO = 12
TAG_HALO_JHI = 13
TAG_GATHER = 20
TAG_BCAST = 21


class TransportError(RuntimeError):
    """Message exchange failed (length mismatch, timeout, ...)."""


class TransportAborted(TransportError):
    """Another rank failed; blocked communication was torn down."""


@dataclass(frozen=True)
class Message:
    """One unit on the wire; payload length is agreed per tag by both ends."""

    source: int
    dest: int
    tag: int
    payload: np.ndarray


def dims_create(n: int, axes: int) -> tuple[int, ...]:
    """Balanced factorization of n ranks over 1 or 2 axes.

    For two axes the counts are as close to equal as possible, in
    non-increasing order (ties broken toward the first axis).
    """
    if n < 1:
        raise ValueError("rank count must be >= 1")
    if axes == 1:
        return (n,)
    if axes == 2:
        for d in range(math.isqrt(n), 0, -1):
            if n % d == 0:
                return (n // d, d)
    raise ValueError("axes must be 1 or 2")


@dataclass(frozen=True)
class CartTopology:
    """Rank layout on a Cartesian grid with neighbor lookup.

    kind "ring" is 1-D periodic; kind "grid" is 2-D non-periodic with
    absent neighbors on outward sides.
    """

    kind: str
    dims: tuple[int, ...]
    periodic: bool

    @classmethod
    def ring(cls, n: int) -> "CartTopology":
        return cls("ring", dims_create(n, 1), True)

    @classmethod
    def grid(cls, n: int) -> "CartTopology":
        return cls("grid", dims_create(n, 2), False)

    @property
    def size(self) -> int:
        return math.prod(self.dims)

    def coords(self, rank: int) -> tuple[int, ...]:
        if not 0 <= rank < self.size:
            raise ValueError(f"rank {rank} outside [0, {self.size})")
        out = []
        for extent in reversed(self.dims):
            out.append(rank % extent)
            rank //= extent
        return tuple(reversed(out))

    def rank_of(self, coords: tuple[int, ...]) -> int:
        rank = 0
        for c, extent in zip(coords, self.dims):
            if not 0 <= c < extent:
                raise ValueError(f"coordinate {coords} outside dims {self.dims}")
            rank = rank * extent + c
        return rank

    def neighbor(self, rank: int, axis: int, step: int) -> int | None:
        """Rank one step along axis, or None past a non-periodic edge."""
        c = list(self.coords(rank))
        c[axis] += step
        if self.periodic:
            c[axis] %= self.dims[axis]
        elif not 0 <= c[axis] < self.dims[axis]:
            return None
        return self.rank_of(tuple(c))


class _Fabric:
    """Shared mailbox registry plus the abort flag for one rank group."""

    def __init__(self, n: int, timeout: float):
        self.n = n
        self.timeout = timeout
        self._lock = threading.Lock()
        self._boxes: dict[tuple[int, int, int], queue.SimpleQueue] = {}  # of Message
        self._abort_exc: BaseException | None = None

    def mailbox(self, dst: int, src: int, tag: int) -> queue.SimpleQueue:
        key = (dst, src, tag)
        with self._lock:
            box = self._boxes.get(key)
            if box is None:
                box = self._boxes[key] = queue.SimpleQueue()
            return box

    def abort(self, exc: BaseException) -> None:
        with self._lock:
            if self._abort_exc is None:
                self._abort_exc = exc

    @property
    def aborted(self) -> BaseException | None:
        return self._abort_exc


class Communicator:
    """Rank-local handle to the topology and the message fabric.

    Communication calls are blocking and must be issued from the owning
    rank's thread only; distinct ranks may use the fabric concurrently.
    """

    def __init__(self, fabric: _Fabric, topology: CartTopology, rank: int):
        self._fabric = fabric
        self.topology = topology
        self.rank = rank

    @property
    def size(self) -> int:
        return self._fabric.n

    # -- point to point ----------------------------------------------------

    def send(self, dest: int, payload, tag: int) -> None:
        """Buffered send of a float64 vector; never blocks."""
        if self._fabric.aborted is not None:
            raise TransportAborted("rank group aborted") from self._fabric.aborted
        buf = np.array(payload, dtype=np.float64, copy=True).reshape(-1)
        message = Message(self.rank, dest, tag, buf)
        self._fabric.mailbox(dest, self.rank, tag).put(message)

    def recv(self, source: int, tag: int, expected_len: int | None = None) -> np.ndarray:
        """Blocking receive from (source, tag); FIFO per sender and tag."""
        box = self._fabric.mailbox(self.rank, source, tag)
        deadline = time.monotonic() + self._fabric.timeout
        while True:
            try:
                message = box.get(timeout=_POLL)
                break
            except queue.Empty:
                if self._fabric.aborted is not None:
                    raise TransportAborted("rank group aborted") from self._fabric.aborted
                if time.monotonic() > deadline:
                    raise TransportError(
                        f"recv timed out: rank {source} -> rank {self.rank}, tag {tag}")
        assert (message.source, message.dest, message.tag) == (source, self.rank, tag)
        buf = message.payload
        if expected_len is not None and buf.shape[0] != expected_len:
            raise TransportError(
                f"length mismatch: rank {source} -> rank {self.rank}, tag {tag}: "
                f"got {buf.shape[0]}, expected {expected_len}")
        return buf

    def sendrecv(self, send_to: int, send_buf, recv_from: int, recv_buf: np.ndarray,
                 tag: int) -> None:
        """Simultaneous exchange; safe in any cyclic pattern.

        recv_buf is filled in place with the partner's send_buf contents.
        """
        self.send(send_to, send_buf, tag)
        got = self.recv(recv_from, tag, expected_len=recv_buf.size)
        np.copyto(recv_buf, got.reshape(recv_buf.shape))

    # -- collective patterns -------------------------------------------------

    def ring_shift(self, buf: np.ndarray) -> np.ndarray:
        """One ring step: return the predecessor's buffer.

        All ranks must participate with equal-length buffers; applying the
        shift size() times is the identity.
        """
        if self.topology.kind != "ring":
            raise TransportError("ring_shift requires a ring topology")
        succ = self.topology.neighbor(self.rank, 0, +1)
        pred = self.topology.neighbor(self.rank, 0, -1)
        flat = np.asarray(buf, dtype=np.float64).reshape(-1)
        out = np.empty_like(flat)
        self.sendrecv(succ, flat, pred, out, TAG_RING)
        return out.reshape(np.shape(buf))

    def halo_exchange(self, field) -> None:
        """Swap width-1 halo strips with the four grid neighbors.

        field must expose nx, ny and a padded (nx+2, ny+2) array; strips on
        physical-domain edges are left untouched and corners are never
        exchanged (5-point stencils do not read them).
        """
        if self.topology.kind != "grid":
            raise TransportError("halo_exchange requires a grid topology")
        a = field.array
        nx, ny = field.nx, field.ny
        ilo = self.topology.neighbor(self.rank, 0, -1)
        ihi = self.topology.neighbor(self.rank, 0, +1)
        jlo = self.topology.neighbor(self.rank, 1, -1)
        jhi = self.topology.neighbor(self.rank, 1, +1)

        if ilo is not None:
            self.send(ilo, a[1, 1:ny + 1], TAG_HALO_ILO)
        if ihi is not None:
            self.send(ihi, a[nx, 1:ny + 1], TAG_HALO_IHI)
        if jlo is not None:
            self.send(jlo, a[1:nx + 1, 1], TAG_HALO_JLO)
        if jhi is not None:
            self.send(jhi, a[1:nx + 1, ny], TAG_HALO_JHI)

        if ilo is not None:
            a[0, 1:ny + 1] = self.recv(ilo, TAG_HALO_IHI, expected_len=ny)
        if ihi is not None:
            a[nx + 1, 1:ny + 1] = self.recv(ihi, TAG_HALO_ILO, expected_len=ny)
        if jlo is not None:
            a[1:nx + 1, 0] = self.recv(jlo, TAG_HALO_JHI, expected_len=nx)
        if jhi is not None:
            a[1:nx + 1, ny + 1] = self.recv(jhi, TAG_HALO_JLO, expected_len=nx)

    def allreduce(self, value: float, op: str = "sum") -> float:
        """Combine one scalar across all ranks; every rank gets the result.

        Rank 0 folds contributions in ascending rank order, so the
        reassociation is identical on every rank and across runs.
        """
        combine = {"sum": operator.add, "max": max, "min": min}[op]
        v = float(value)
        if self.size == 1:
            return v
        if self.rank == 0:
            acc = v
            for src in range(1, self.size):
                acc = combine(acc, float(self.recv(src, TAG_GATHER, 1)[0]))
            for dst in range(1, self.size):
                self.send(dst, [acc], TAG_BCAST)
            return acc
        self.send(0, [v], TAG_GATHER)
        return float(self.recv(0, TAG_BCAST, 1)[0])

    def barrier(self) -> None:
        self.allreduce(0.0, "max")


def single_rank_comm(kind: str = "ring", timeout: float = DEFAULT_TIMEOUT) -> Communicator:
    """A 1-rank communicator usable inline, without spawning threads."""
    topo = CartTopology.ring(1) if kind == "ring" else CartTopology.grid(1)
    return Communicator(_Fabric(1, timeout), topo, 0)


def spawn_ranks(n: int, kind, program, *args,
                timeout: float = DEFAULT_TIMEOUT) -> list:
    """Run program(comm, *args) on n concurrent ranks; return per-rank results.

    kind selects the topology ("ring" or "grid", or an explicit CartTopology
    of matching size).  If any rank raises, the group is aborted, all ranks
    are joined, and the first failure is re-raised (abort fallout from other
    ranks is suppressed).
    """
    if n < 1:
        raise ValueError("rank count must be >= 1")
    if isinstance(kind, CartTopology):
        if kind.size != n:
            raise ValueError(f"topology size {kind.size} != rank count {n}")
        topo = kind
    else:
        topo = CartTopology.ring(n) if kind == "ring" else CartTopology.grid(n)
    fabric = _Fabric(n, timeout)
    results = [None] * n
    failures: list[BaseException] = []
    flock = threading.Lock()

    def runner(r: int) -> None:
        comm = Communicator(fabric, topo, r)
        try:
            results[r] = program(comm, *args)
        except BaseException as exc:
            with flock:
                failures.append(exc)
            fabric.abort(exc)

    threads = [threading.Thread(target=runner, args=(r,), name=f"rank{r}", daemon=True)
               for r in range(n)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if failures:
        for exc in failures:
            if not isinstance(exc, TransportAborted):
                raise exc
        raise failures[0]
    return results
