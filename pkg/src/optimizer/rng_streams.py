"""
Counter-based random streams.

Every random draw in a run comes from a numpy Philox generator whose key is
derived from (seed, purpose, mpc step, iteration, particle id). A particle's
stream therefore depends only on its id, never on which worker or chunk
evaluates it, and each purpose gets its own disjoint family of streams.
"""

from enum import IntEnum

import numpy as np

MASTER = 0


class StreamPurpose(IntEnum):
    INIT = 1
    DISTURBANCE = 2
    PERTURB = 3
    RESAMPLE = 4
    REALISED_WIND = 5
    WIND_INIT = 6
    TRACES = 7
    RETRY = 8
    DISTURBANCE_RETRY = 9


def stream(seed: int, purpose: StreamPurpose, mpc_step: int = 0, iteration: int = 0,
           particle_id: int = MASTER) -> np.random.Generator:
    keys = [int(seed), int(purpose), int(mpc_step), int(iteration), int(particle_id)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(keys)))


def particle_stream(seed: int, mpc_step: int, iteration: int, particle_id: int,
                    purpose: StreamPurpose = StreamPurpose.DISTURBANCE) -> np.random.Generator:
    # particle ids are shifted so they never collide with the master slot
    return stream(seed, purpose, mpc_step, iteration, particle_id + 1)


def entropy_seed() -> int:
    """Fresh seed from OS entropy, small enough to print and pass back on the CLI."""
    return int(np.random.SeedSequence().entropy % (2 ** 63))
