import numpy as np
import pytest

from polarnet import (
    AtMostK,
    Ball2,
    BallInf,
    ChannelStack,
    IidGaussian,
    Rician,
    SelectOne,
    build_grid_geometry,
    sample_channels,
)


def random_sizes(rng, max_layers=6, max_m=10):
    n = int(rng.integers(1, max_layers + 1))
    return [int(m) for m in rng.integers(1, max_m + 1, n)]


def random_stack(rng, sizes, kind="iid"):
    seed = int(rng.integers(2**63))
    if kind == "iid":
        return sample_channels(sizes, IidGaussian(1.0), seed)
    geometry = build_grid_geometry(sizes, 100.0, 10.0, 2e9)
    return sample_channels(geometry, Rician(0.5), seed)


def random_policy(rng, m_max=10):
    kind = int(rng.integers(4))
    beta = float(rng.uniform(0.2, 3.0))
    if kind == 0:
        return Ball2(beta)
    if kind == 1:
        return BallInf(beta)
    if kind == 2:
        return AtMostK(beta, int(rng.integers(1, 4)))
    return SelectOne(beta)


def direct_product_stack(matrices):
    return ChannelStack(matrices)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
