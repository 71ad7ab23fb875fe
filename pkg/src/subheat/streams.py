"""Counter-based random streams and deterministic path-block fan-out.

A run of ``n`` paths is cut into blocks of ``BLOCK_SIZE`` paths. Block ``k``
of a run keyed by ``stream`` draws all its variates from ``stream.block(k)``,
a Philox generator keyed by the seed, the run's key and ``k``. The variates
of a path therefore depend only on the seed and the path index, never on the
number of workers or the order in which blocks finish.

Per-block statistics are merged with a fixed pairwise tree so the combined
mean and variance are bit-identical for any worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from subheat.errors import DomainError

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1 << 16
_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


@dataclass(frozen=True)
class RandomStream:
    """Philox stream keyed by (seed, stream_key); both are 64-bit integers."""

    seed: int
    stream_key: int = 0

    def generator(self) -> np.random.Generator:
        key = (self.seed & _MASK64) | ((self.stream_key & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, stream_key: int) -> "RandomStream":
        return RandomStream(self.seed, stream_key)

    def block(self, index: int) -> "RandomStream":
        """Stream of path block ``index`` within the run keyed by this stream."""
        return RandomStream(self.seed, ((self.stream_key & _MASK32) << 32) | (index & _MASK32))


@dataclass(frozen=True)
class BlockStats:
    """Count, mean and centred sum of squares of one block of path values."""

    count: int
    mean: float
    m2: float

    @classmethod
    def of(cls, values: np.ndarray) -> "BlockStats":
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return cls(0, 0.0, 0.0)
        mean = float(np.mean(values))
        return cls(int(values.size), mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other: "BlockStats") -> "BlockStats":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return BlockStats(count, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 0 else math.inf


def pairwise_merge(stats: Sequence[BlockStats]) -> BlockStats:
    """Combine block statistics along a fixed balanced binary tree."""
    if not stats:
        return BlockStats(0, 0.0, 0.0)
    level: List[BlockStats] = list(stats)
    while len(level) > 1:
        merged = [level[i].merge(level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            merged.append(level[-1])
        level = merged
    return level[0]


def block_sizes(n_paths: int, block_size: int = BLOCK_SIZE) -> List[Tuple[int, int]]:
    """[(stream_key, size), ...] covering ``n_paths`` paths."""
    if n_paths <= 0:
        raise DomainError(f"n_paths must be > 0, got {n_paths!r}")
    full, rest = divmod(n_paths, block_size)
    blocks = [(k, block_size) for k in range(full)]
    if rest:
        blocks.append((full, rest))
    return blocks


BlockKernel = Callable[[RandomStream, int], np.ndarray]


def _run_block(kernel: BlockKernel, stream: RandomStream, size: int) -> BlockStats:
    return BlockStats.of(kernel(stream, size))


def run_blocks(
    kernel: BlockKernel,
    n_paths: int,
    stream: RandomStream,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> BlockStats:
    """Evaluate ``kernel(stream, size) -> per-path values`` over all blocks and merge.

    ``kernel`` must be picklable (a module-level function or a
    ``functools.partial`` of one) when ``workers > 1``.
    """
    blocks = block_sizes(n_paths, block_size)
    logger.debug("running %d paths in %d blocks on %d worker(s)", n_paths, len(blocks), workers)
    if workers <= 1 or len(blocks) == 1:
        stats = [_run_block(kernel, stream.block(key), size) for key, size in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, kernel, stream.block(key), size) for key, size in blocks]
            stats = [f.result() for f in futures]
    return pairwise_merge(stats)


def collect_blocks(
    kernel: BlockKernel,
    n_paths: int,
    stream: RandomStream,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> np.ndarray:
    """Concatenate raw per-path values of all blocks in block order."""
    blocks = block_sizes(n_paths, block_size)
    if workers <= 1 or len(blocks) == 1:
        parts = [kernel(stream.block(key), size) for key, size in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(kernel, [stream.block(key) for key, _ in blocks], [s for _, s in blocks]))
    return np.concatenate([np.asarray(part) for part in parts])


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo value with its standard error.

    ``complement`` is ``volume - value`` for heat contents, carried separately
    so tiny deficits keep their digits; it is ``nan`` where no volume applies.
    """

    value: float
    stderr: float
    n_paths: int
    seed: int
    wall_time: float
    complement: float = math.nan
    quantity: str = "spectral"

    @classmethod
    def from_stats(
        cls,
        stats: BlockStats,
        seed: int,
        wall_time: float,
        volume: float = math.nan,
        quantity: str = "spectral",
        from_complement: bool = False,
    ) -> "Estimate":
        """Build from statistics of per-path values, or of per-path deficits if ``from_complement``."""
        if from_complement:
            return cls(volume - stats.mean, stats.stderr, stats.count, seed, wall_time, stats.mean, quantity)
        return cls(stats.mean, stats.stderr, stats.count, seed, wall_time, volume - stats.mean, quantity)
