import numpy as np
import pytest

from exact_diffusion.rng import RngStream


@pytest.fixture
def rng() -> RngStream:
    return RngStream(20250809, 0)


@pytest.fixture
def np_rng() -> np.random.Generator:
    return np.random.default_rng(20250809)


def fresh_stream(label: str, seed: int = 20250809) -> RngStream:
    import zlib

    return RngStream(seed, zlib.crc32(label.encode()) & 0x7FFFFFFF)
