"""Counter-based, splittable random streams.

Every run owns a 64-bit seed. Named substreams (data generation, parameter
init, batch order, ...) are derived from it through ``SeedSequence`` spawn
keys, so they are statistically independent and stable across library
versions: the generator family (Philox) and the stream ids below are part of
the on-disk reproducibility contract.
"""

import numpy as np

GENERATOR_NAME = "philox-v1"

# Fixed spawn indices per purpose. Never reorder; append only.
STREAM_IDS = {
    "data": 0,
    "init": 1,
    "batch": 2,
    "test": 3,
    "probe": 4,
}


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for substream `name` of `seed`."""
    if name not in STREAM_IDS:
        raise ValueError(f"unknown stream name {name!r}; expected one of {sorted(STREAM_IDS)}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(STREAM_IDS[name],))
    return np.random.Generator(np.random.Philox(ss))
