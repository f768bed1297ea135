"""Deterministic seeding, mergeable accumulators and the worker pool.

Every stochastic routine in the package draws from a Philox counter-based
generator keyed by ``(master_seed, *stream_path)``, so independent streams
can be derived without any sequential dependency.  Parallel runs split work
into indexed tasks whose results are merged in ascending task order, which
makes output bit-identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "derive_rng",
    "derive_seed_sequence",
    "Accumulator",
    "TaskError",
    "parallel_map_reduce",
]


def derive_seed_sequence(master_seed: int, *path: int) -> np.random.SeedSequence:
    """SeedSequence for the stream addressed by ``path`` under ``master_seed``."""
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(p) for p in path))


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Philox generator for stream ``path``; same inputs give the same stream."""
    return np.random.Generator(np.random.Philox(derive_seed_sequence(master_seed, *path)))


@dataclass
class Accumulator:
    """Mergeable (count, sum, sum-of-squares) moments, scalar or per-bin.

    ``merge`` is associative, so reducing task results in a fixed order is
    reproducible bit-for-bit regardless of how the tasks were scheduled.
    """

    count: int = 0
    total: np.ndarray | float = 0.0
    total_sq: np.ndarray | float = 0.0

    def add(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        n = values.shape[0] if values.ndim else 1
        self.count += int(n)
        self.total = self.total + values.sum(axis=0)
        self.total_sq = self.total_sq + (values * values).sum(axis=0)

    def merge(self, other: "Accumulator") -> "Accumulator":
        return Accumulator(
            count=self.count + other.count,
            total=self.total + other.total,
            total_sq=self.total_sq + other.total_sq,
        )

    @property
    def mean(self):
        return self.total / self.count

    @property
    def variance(self):
        # unbiased sample variance
        m = self.mean
        return (self.total_sq - self.count * m * m) / (self.count - 1)

    @property
    def stderr(self):
        return np.sqrt(np.maximum(self.variance, 0.0) / self.count)


class TaskError(RuntimeError):
    """A parallel task failed; carries the index of the first failure."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"task {index} failed: {cause!r}")
        self.index = index
        self.cause = cause


def parallel_map_reduce(fn, tasks, reduce_fn, initial, workers: int = 1,
                        backend: str = "auto"):
    """Run ``fn`` over ``tasks`` and fold results in ascending task order.

    The reduction order is fixed by the task list, never by completion
    order, so the reduced value is independent of scheduling.  The first
    failing task aborts the whole map with a :class:`TaskError`.

    backend: "serial", "thread", "process", or "auto" (process pool when
    workers > 1).
    """
    tasks = list(tasks)
    if not tasks:
        return initial
    if backend == "auto":
        backend = "serial" if workers <= 1 else "process"

    if backend == "serial":
        acc = initial
        for i, t in enumerate(tasks):
            try:
                res = fn(t)
            except Exception as exc:  # noqa: BLE001 - rewrap with task context
                raise TaskError(i, exc) from exc
            acc = reduce_fn(acc, res)
        return acc

    pool_cls = ThreadPoolExecutor if backend == "thread" else ProcessPoolExecutor
    acc = initial
    with pool_cls(max_workers=max(1, workers)) as pool:
        results = pool.map(fn, tasks)
        i = 0
        try:
            for res in results:  # map() yields in submission order
                acc = reduce_fn(acc, res)
                i += 1
        except Exception as exc:  # noqa: BLE001
            raise TaskError(i, exc) from exc
    return acc


def resolve_workers(requested: int | None) -> int:
    """Worker count with ANDERSON_WORKERS taking precedence over config."""
    env = os.environ.get("ANDERSON_WORKERS")
    if env is not None:
        return max(1, int(env))
    if requested is None:
        return 1
    return max(1, int(requested))
