"""
Random Stream Module

One numpy ``Generator`` per logical task, derived from the master seed and a
task label, so concurrent tasks never share or reorder a stream.
"""

import hashlib

import numpy as np


def label_key(label: str) -> int:
    """Stable 64-bit integer derived from a task label."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def task_rng(seed: int, label: str) -> np.random.Generator:
    """
    Build the random stream of one task.

    Args:
        seed (int): Master seed of the run.
        label (str): Logical task label (e.g. "samples", "paths/3").

    Returns:
        np.random.Generator: Independent generator for this task.
    """
    return np.random.default_rng([int(seed), label_key(label)])
