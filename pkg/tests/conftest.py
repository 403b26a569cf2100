import numpy as np
import pytest

from bpmatch.instance import Instance, derive_seed, gen_random_instance


@pytest.fixture
def inst_a():
    """Two disjoint heavy edges: optimum (1, 2) with weight 4, eps = 4."""
    return Instance(np.array([[2.0, 0.0], [0.0, 2.0]]))


@pytest.fixture
def inst_tie():
    return Instance(np.array([[1.0, 1.0], [1.0, 1.0]]))


def random_instances(tag, count, sizes):
    """Deterministic stream of (n, instance) cycling through ``sizes``."""
    sizes = list(sizes)
    for t in range(count):
        n = sizes[t % len(sizes)]
        yield n, gen_random_instance(n, derive_seed(tag, n, t))
