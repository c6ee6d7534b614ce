import numpy as np
import pytest

from skrecover.hashing import draw_hash


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def make_hash(seed: int, width: int):
    return draw_hash(np.random.default_rng(seed), width)
