"""Execution-portability layer: layout-polymorphic 2-D views plus
parallel-for / parallel-reduce over pluggable backends.

The sequential backend defines reference semantics; the data-parallel
backend partitions index ranges into contiguous chunks over a thread pool
and must produce identical results for any pure kernel (up to bounded
floating-point reassociation in reductions).
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Callable

import numpy as np


class Layout(Enum):
    """Memory order of a 2-D view: which index is contiguous."""

    ROW_MAJOR = "row"
    COL_MAJOR = "col"


class View2D:
    """Dense float64 matrix over one contiguous 1-D buffer.

    Element semantics are layout independent: (i, j) always reads back the
    last value written to (i, j).  The layout only decides the buffer
    offset, ROW_MAJOR keeping rows contiguous and COL_MAJOR columns.
    Dimensions are fixed at construction.
    """

    __slots__ = ("rows", "cols", "layout", "data")

    def __init__(self, rows: int, cols: int, layout: Layout = Layout.ROW_MAJOR,
                 data: np.ndarray | None = None):
        if rows < 0 or cols < 0:
            raise ValueError("view dimensions must be non-negative")
        self.rows = rows
        self.cols = cols
        self.layout = layout
        if data is None:
            data = np.zeros(rows * cols, dtype=np.float64)
        else:
            data = np.asarray(data, dtype=np.float64).reshape(-1)
            if data.shape[0] != rows * cols:
                raise ValueError(
                    f"buffer length {data.shape[0]} != rows*cols = {rows * cols}")
        self.data = data

    def index(self, i: int, j: int) -> int:
        """Buffer offset of element (i, j) under the view's layout."""
        assert 0 <= i < self.rows and 0 <= j < self.cols, (i, j)
        if self.layout is Layout.ROW_MAJOR:
            return i * self.cols + j
        return j * self.rows + i

    def __getitem__(self, ij):
        i, j = ij
        return self.data[self.index(i, j)]

    def __setitem__(self, ij, value):
        i, j = ij
        self.data[self.index(i, j)] = value

    @property
    def array(self) -> np.ndarray:
        """Zero-copy 2-D numpy view with (i, j) indexing."""
        order = "C" if self.layout is Layout.ROW_MAJOR else "F"
        return self.data.reshape(self.rows, self.cols, order=order)

    def fill(self, value: float) -> None:
        self.data.fill(value)

    def copy(self) -> "View2D":
        return View2D(self.rows, self.cols, self.layout, self.data.copy())


class SequentialBackend:
    """Reference backend: kernels run inline, in ascending index order."""

    kind = "sequential"
    workers = 1

    def for_each(self, n: int, kernel: Callable[[int], None]) -> None:
        for i in range(n):
            kernel(i)

    def reduce(self, n, map_fn, combine, identity):
        acc = identity
        for i in range(n):
            acc = combine(acc, map_fn(i))
        return acc

    def synchronize(self) -> None:
        pass


# One shared pool per worker count keeps thread usage bounded across the
# many short-lived backends the benchmark spawns.
_pool_lock = threading.Lock()
_pools: dict[int, ThreadPoolExecutor] = {}


def _pool(workers: int) -> ThreadPoolExecutor:
    with _pool_lock:
        pool = _pools.get(workers)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=workers,
                                      thread_name_prefix=f"dp{workers}")
            _pools[workers] = pool
        return pool


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    size = -(-n // workers)  # ceil division
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


class DataParallelBackend:
    """Thread-pool backend with deterministic contiguous chunking.

    Chunk w covers [w*c, (w+1)*c) with c = ceil(n / workers).  Each worker
    walks its chunk in ascending order; reduce combines chunk partials in
    ascending worker order, so reassociation is bounded and reproducible.
    """

    kind = "parallel"

    def __init__(self, workers: int = 4):
        if workers < 1:
            raise ValueError("worker count must be >= 1")
        self.workers = workers
        self._state = threading.Condition()
        self._inflight = 0

    def _begin(self):
        with self._state:
            self._inflight += 1

    def _end(self):
        with self._state:
            self._inflight -= 1
            if self._inflight == 0:
                self._state.notify_all()

    def for_each(self, n: int, kernel: Callable[[int], None]) -> None:
        if n <= 0:
            return
        self._begin()
        try:
            pool = _pool(self.workers)
            futures = [pool.submit(_run_chunk, kernel, lo, hi)
                       for lo, hi in _chunks(n, self.workers)]
            for f in futures:
                f.result()
        finally:
            self._end()

    def reduce(self, n, map_fn, combine, identity):
        if n <= 0:
            return identity
        self._begin()
        try:
            pool = _pool(self.workers)
            futures = [pool.submit(_reduce_chunk, map_fn, combine, identity, lo, hi)
                       for lo, hi in _chunks(n, self.workers)]
            acc = identity
            for f in futures:
                acc = combine(acc, f.result())
            return acc
        finally:
            self._end()

    def synchronize(self) -> None:
        """Block until every kernel in flight on this backend has finished."""
        with self._state:
            while self._inflight:
                self._state.wait()


def _run_chunk(kernel, lo, hi):
    for i in range(lo, hi):
        kernel(i)


def _reduce_chunk(map_fn, combine, identity, lo, hi):
    acc = identity
    for i in range(lo, hi):
        acc = combine(acc, map_fn(i))
    return acc


Backend = SequentialBackend | DataParallelBackend


def make_backend(kind: str, workers: int = 4) -> Backend:
    if kind == "sequential":
        return SequentialBackend()
    if kind == "parallel":
        return DataParallelBackend(workers)
    raise ValueError(f"unknown backend kind {kind!r}")


def parallel_for(backend: Backend, n: int, kernel: Callable[[int], None]) -> None:
    """Invoke kernel(i) exactly once for every i in [0, n).

    The kernel must write only to per-index-disjoint locations.  On return
    all writes are visible to the caller.  n = 0 is a no-op.
    """
    backend.for_each(n, kernel)


def parallel_reduce(backend: Backend, n: int, map_fn: Callable[[int], float],
                    combine: Callable[[float, float], float], identity: float) -> float:
    """Combine map_fn(i) over [0, n) with an associative-commutative op.

    The sequential backend folds in ascending index order and is the
    reference answer; n = 0 returns the identity.
    """
    return backend.reduce(n, map_fn, combine, identity)


def synchronize(backend: Backend) -> None:
    """Return once all kernels previously submitted on backend completed.

    Timing taken after this call excludes no in-flight work; calling it on
    an idle backend returns immediately.
    """
    backend.synchronize()
