"""Counter-based random streams keyed by (master seed, experiment, replicate).

Each replicate owns its own Philox stream, so results do not depend on the
order or the number of threads that evaluate replicates.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


def stream_seed(master_seed: int, experiment_id: str, replicate: int) -> int:
    """Stable 64-bit key for one replicate of one experiment."""
    token = f"{int(master_seed)}/{experiment_id}/{int(replicate)}".encode()
    return int.from_bytes(hashlib.blake2b(token, digest_size=8).digest(), "little")


@dataclass
class Stream:
    seed: int
    rng: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "Stream":
        seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        return cls(seed, np.random.Generator(np.random.Philox(key=seed)))


def make_stream(master_seed: int, experiment_id: str, replicate: int = 0) -> Stream:
    return Stream.from_seed(stream_seed(master_seed, experiment_id, replicate))


def as_stream(stream) -> Stream:
    if isinstance(stream, Stream):
        return stream
    if isinstance(stream, (int, np.integer)):
        return Stream.from_seed(int(stream))
    if isinstance(stream, np.random.Generator):
        return Stream(-1, stream)
    raise TypeError(f"cannot make a random stream from {type(stream).__name__}")


_threads = None


def set_threads(n: int | None) -> None:
    global _threads
    _threads = None if n is None else max(1, int(n))


def thread_count() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("ERMLAB_THREADS")
    return max(1, int(env)) if env else 1


def map_replicates(fn, count: int, threads: int | None = None) -> list:
    """``[fn(0), ..., fn(count - 1)]``, optionally across threads, in order."""
    threads = thread_count() if threads is None else threads
    if threads <= 1 or count < 2:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))
