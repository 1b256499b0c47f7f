import json

import numpy as np
import pytest

from dist_core import binomial_pmf, make_pmf, two_point_q, uniform_q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def uniform12():
    return uniform_q(1, 2)


@pytest.fixture
def lc_two_point():
    """Q(1) = 0.8, Q(2) = 0.2; CPo(lambda, Q) is log-concave for lambda >= 0.625."""
    return two_point_q(0.8)


@pytest.fixture
def ulc_binomial():
    return binomial_pmf(3, 0.5)


@pytest.fixture
def pmf_file(tmp_path):
    def write(p, name="p.json"):
        path = tmp_path / name
        path.write_text(json.dumps(p.to_dict()))
        return str(path)
    return write


@pytest.fixture
def triangle():
    return make_pmf(0, [0.2, 0.5, 0.3])
