import numpy as np
import pytest

from stomatch.rng import STREAM_ALGORITHM, philox4x32, uniform_block, uniforms


# Known-answer vectors of the Random123 reference implementation.
@pytest.mark.parametrize("ctr, key, expected", [
    ([0, 0, 0, 0], [0, 0], [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]),
    ([0xFFFFFFFF] * 4, [0xFFFFFFFF] * 2, [0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD]),
    ([0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344], [0xA4093822, 0x299F31D0],
     [0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1]),
])
def test_philox_known_answers(ctr, key, expected):
    out = philox4x32(np.array(ctr, dtype=np.uint32), key)
    assert [int(v) for v in out] == expected


def test_block_equals_pointwise():
    trials = np.arange(50)
    block = uniform_block(9, trials, STREAM_ALGORITHM, 3, 11)
    point = uniforms(9, trials[:, None], STREAM_ALGORITHM, np.arange(3, 14)[None, :])
    np.testing.assert_array_equal(block, point)


def test_streams_and_seeds_differ():
    a = uniforms(1, np.arange(1000), 0, 0)
    assert not np.array_equal(a, uniforms(1, np.arange(1000), 1, 0))
    assert not np.array_equal(a, uniforms(2, np.arange(1000), 0, 0))


def test_uniform_moments():
    u = uniform_block(123, np.arange(20000), 0, 0, 10).ravel()
    assert np.all((u >= 0) & (u < 1))
    assert abs(u.mean() - 0.5) < 3 * np.sqrt(1 / 12 / u.size) * 1.5
    assert abs(u.var() - 1 / 12) < 2e-3


def test_seed_range():
    with pytest.raises(ValueError):
        uniforms(-1, 0, 0, 0)
