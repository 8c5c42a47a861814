"""Kernel timing: monotonic clocks read only after backend synchronization."""

from __future__ import annotations

import time
from contextlib import contextmanager

from .portability import Backend, synchronize


class KernelTimers:
    """Per-rank accumulator of elapsed seconds by kernel category.

    When constructed with a category list, the buckets are fixed: timing an
    unknown category is an error, and untouched buckets report 0.0.  The
    clock is injectable so tests can verify what is and is not measured.
    """

    def __init__(self, categories=None, clock=time.perf_counter):
        self._clock = clock
        self._strict = categories is not None
        self.totals: dict[str, float] = {c: 0.0 for c in categories or ()}

    def _accumulate(self, category: str, seconds: float) -> None:
        if self._strict and category not in self.totals:
            raise KeyError(f"unknown timing category {category!r}")
        self.totals[category] = self.totals.get(category, 0.0) + seconds

    def time_kernel(self, backend: Backend, category: str, work) -> float:
        """Run work(), synchronize the backend, and bank the elapsed time."""
        start = self._clock()
        work()
        synchronize(backend)
        elapsed = self._clock() - start
        self._accumulate(category, elapsed)
        return elapsed

    @contextmanager
    def measure(self, backend: Backend, category: str):
        """Context-manager flavor of time_kernel for result-bearing work."""
        start = self._clock()
        try:
            yield
        finally:
            synchronize(backend)
            self._accumulate(category, self._clock() - start)


def timed(timers: KernelTimers | None, backend: Backend, category: str):
    """measure() that degrades to a plain nullcontext when timers is None."""
    if timers is None:
        return _NullContext()
    return timers.measure(backend, category)


class _NullContext:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False
