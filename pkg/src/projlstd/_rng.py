"""Seeded random streams.

Every random quantity is drawn from a Philox (counter-based) bit generator
keyed by ``SeedSequence(master_seed, spawn_key=(stream_id, *keys))``.  The
stream id names the consumer, so trajectory draws and projection draws never
share a sub-stream, and the keys pin down the cell within an experiment.
Results are therefore independent of evaluation order and worker count.

Transforms applied on top of the uniform stream:

* uniforms: ``Generator.random`` (53-bit doubles in [0, 1))
* Gaussians: ``Generator.standard_normal`` (NumPy's ziggurat), scaled
  afterwards
"""

import numpy as np

TRAJECTORY = 0
PROJECTION = 1
FEATURES = 2
CHAIN = 3
VERIFY = 4

_MASK64 = (1 << 64) - 1


def stream(seed, stream_id, *keys):
    """Return a ``numpy.random.Generator`` for one named sub-stream."""
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be a non-negative 64-bit integer, got {seed}")
    spawn_key = (int(stream_id),) + tuple(int(k) & _MASK64 for k in keys)
    ss = np.random.SeedSequence(seed & _MASK64, spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(ss))
