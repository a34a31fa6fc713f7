"""
Seeded random streams.

Every random draw in the toolkit flows through a numpy Generator obtained
here. A stream is identified by (master_seed, label):

    digest  = SHA-256("<master_seed>:<label>" encoded as UTF-8)
    seed    = first 8 bytes of digest, big-endian, as an unsigned 64-bit int
    stream  = Generator(PCG64(SeedSequence(seed)))

The derived seed is what the CSV files report per trial, so any single
trial can be replayed with `stream_from_seed(seed)`.
"""

import hashlib

import numpy as np


def derive_seed(master_seed: int, label: str) -> int:
    """Stable 64-bit seed for a (master seed, label) pair."""
    digest = hashlib.sha256(f"{int(master_seed)}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stream_from_seed(seed: int) -> np.random.Generator:
    """Generator for an already derived 64-bit seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def derive_stream(master_seed: int, label: str) -> np.random.Generator:
    """
    Independent random stream for one purpose of one experiment.

    Args:
        master_seed: Experiment-wide seed
        label: Purpose of the stream, e.g. "trial-17" or "plan"

    Returns:
        A fresh numpy Generator; equal inputs give equal streams
    """
    return stream_from_seed(derive_seed(master_seed, label))
