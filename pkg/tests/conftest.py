import pytest

from levygrad.sampling import RngStream

# fixed once, before any test was run; each test uses its own stream ids
SEED = 20261015


@pytest.fixture
def stream():
    def make(k, *sub):
        return RngStream(SEED, k, tuple(sub))

    return make

# unit tests make many independent statistical assertions; 4 standard errors
# keeps the family-wise false-failure rate small (acceptance tests use 3)
Z_UNIT = 4.0
