"""
Functional Cache Module

Memo cache of scheme evaluations keyed by (checkpoint, x0, density
fingerprint). Densities are quantized before hashing and the scheme evaluates
the quantized density itself, so a cache hit returns exactly what a miss
would have computed.
"""

import hashlib
import threading
from collections import OrderedDict
from typing import Callable, Dict, Hashable, Optional, Tuple

import numpy as np

from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)

# Decimal digits kept by the quantization.
QUANTUM_DIGITS = 12


def quantize(values: np.ndarray) -> np.ndarray:
    """Round to 1e-12 and clear negative zeros."""
    return np.round(np.asarray(values, dtype=float), QUANTUM_DIGITS) + 0.0


def fingerprint(values: np.ndarray) -> str:
    """blake2b digest of the quantized values."""
    return hashlib.blake2b(quantize(values).tobytes(), digest_size=16).hexdigest()


class _InFlight:
    """Result slot of a key being computed by another thread."""

    def __init__(self) -> None:
        self.done = threading.Event()
        self.value: Optional[np.ndarray] = None
        self.error: Optional[BaseException] = None

    def wait(self) -> np.ndarray:
        self.done.wait()
        if self.error is not None:
            raise self.error
        return self.value


class FunctionalCache:
    """
    Bounded LRU map from keys to value arrays.

    Reads may run concurrently with one writer; every mutation holds the lock.
    ``get_or_compute`` computes each missing key once: concurrent callers of
    the same key wait for the first one and count as hits.

    Args:
        limit (int): Maximum number of entries.
    """

    def __init__(self, limit: int = 20000):
        if limit < 1:
            raise ValueError(f"cache limit must be positive, got {limit}")
        self.limit = limit
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self._entries: "OrderedDict[Hashable, np.ndarray]" = OrderedDict()
        self._lock = threading.Lock()
        self._in_flight: Dict[Hashable, _InFlight] = {}

    @staticmethod
    def key(checkpoint: int, x0: float, values: np.ndarray) -> Tuple[int, float, str]:
        return (int(checkpoint), float(x0), fingerprint(values))

    def get(self, key: Hashable) -> Optional[np.ndarray]:
        with self._lock:
            found = self._entries.get(key)
            if found is None:
                self.misses += 1
                return None
            self._entries.move_to_end(key)
            self.hits += 1
            return found

    def put(self, key: Hashable, value: np.ndarray) -> np.ndarray:
        stored = np.array(value, dtype=float, copy=True)
        stored.setflags(write=False)
        with self._lock:
            self._entries[key] = stored
            self._entries.move_to_end(key)
            while len(self._entries) > self.limit:
                self._entries.popitem(last=False)
                self.evictions += 1
                if self.evictions == 1:
                    logger.warning(
                        f"Functional cache reached its limit of {self.limit} entries; "
                        f"evicting least recently used evaluations"
                    )
        return stored

    def get_or_compute(self, key: Hashable, compute: Callable[[], np.ndarray]) -> np.ndarray:
        """
        Return the cached value of ``key``, computing and storing it on a miss.

        Args:
            key (Hashable): Cache key.
            compute (Callable[[], np.ndarray]): Producer of the value.

        Returns:
            np.ndarray: The read-only stored value.

        Raises:
            Exception: Whatever ``compute`` raised, in every waiting caller.
        """
        with self._lock:
            found = self._entries.get(key)
            if found is not None:
                self._entries.move_to_end(key)
                self.hits += 1
                return found
            pending = self._in_flight.get(key)
            owner = pending is None
            if owner:
                pending = self._in_flight[key] = _InFlight()
                self.misses += 1
            else:
                self.hits += 1
        if not owner:
            return pending.wait()
        try:
            pending.value = self.put(key, compute())
        except BaseException as e:
            pending.error = e
            raise
        finally:
            with self._lock:
                del self._in_flight[key]
            pending.done.set()
        return pending.value

    def discard(self, key: Hashable) -> bool:
        """Drop ``key``; returns whether it was present."""
        with self._lock:
            return self._entries.pop(key, None) is not None

    def __len__(self) -> int:
        return len(self._entries)

    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0
