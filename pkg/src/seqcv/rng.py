"""Reproducible random streams for replicated experiments.

Every stream is a Philox4x32 counter-based generator keyed by
``SeedSequence(root_seed, spawn_key=(replication, role))``. A replication's
draws depend only on the root seed, its own index and the role of the
stream, so results do not change with the order in which replications run
or with how they are spread over threads.
"""

from __future__ import annotations

import numpy as np

__all__ = ["ROLES", "stream"]

ROLES = {
    "errors": 0,
    "innovations": 1,
    "resample": 2,
    "initial": 3,
}


def stream(seed: int, replication: int = 0, role: str = "errors") -> np.random.Generator:
    """Generator for one (replication, role) pair under a root seed."""
    if seed < 0 or replication < 0:
        raise ValueError("seed and replication index must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication), ROLES[role]))
    return np.random.Generator(np.random.Philox(ss))
