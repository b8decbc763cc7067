"""Counter-based seed splitting.

Every random component draws from its own stream derived from one master
seed and a fixed component id, so rerunning one component reproduces it
without replaying the others.
"""

import numpy as np

COMPONENTS = {"disorder": 0, "shots": 1, "integrator": 2, "init": 3, "synthetic": 4}


def component_rng(seed: int, component: str, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(COMPONENTS[component], int(index)))
    return np.random.Generator(np.random.Philox(ss))
