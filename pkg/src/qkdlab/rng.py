"""Seeded random-stream derivation.

Every stochastic operation in the package takes a ``numpy.random.Generator``.
Harness trials obtain theirs from :func:`derive_trial_rng`, which maps
``(master_seed, trial_index, site_label)`` onto an independent Philox
stream.  The mapping depends only on those three values, so results do not
depend on execution order or on how many workers run the trials.
"""
from __future__ import annotations

import hashlib

import numpy as np

RngStream = np.random.Generator

_U64 = 1 << 64


def label_key(site_label: str) -> int:
    """Stable 64-bit integer for a site label (independent of ``PYTHONHASHSEED``)."""
    digest = hashlib.blake2b(site_label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_trial_rng(master_seed: int, trial_index: int, site_label: str) -> RngStream:
    """Return the substream identified by ``(master_seed, trial_index, site_label)``.

    Parameters
    ----------
    master_seed : int
        Unsigned 64-bit experiment seed.
    trial_index : int
        Non-negative trial (or block) counter.
    site_label : str
        Name of the consuming site, e.g. ``"channel"`` or ``"eve"``.
    """
    if not 0 <= master_seed < _U64:
        raise ValueError(f"master_seed must be in [0, 2**64), got {master_seed}")
    if trial_index < 0:
        raise ValueError(f"trial_index must be >= 0, got {trial_index}")
    seq = np.random.SeedSequence(
        entropy=master_seed, spawn_key=(trial_index, label_key(site_label))
    )
    return np.random.Generator(np.random.Philox(seq))
