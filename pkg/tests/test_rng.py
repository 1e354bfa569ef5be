import numpy as np
import pytest

from martdev import rng


class TestPhilox:
    # Random123 known-answer vectors for philox4x32-10
    KATS = [
        ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
        (
            (0xFFFFFFFF,) * 4,
            (0xFFFFFFFF, 0xFFFFFFFF),
            (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD),
        ),
        (
            (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
            (0xA4093822, 0x299F31D0),
            (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
        ),
    ]

    @pytest.mark.parametrize("ctr,key,expected", KATS)
    def test_known_answers(self, ctr, key, expected):
        out = rng.philox4x32(ctr, key)
        assert tuple(int(w) for w in out) == expected

    def test_jit_matches_reference(self):
        streams = np.array([0, 1, 7, 2**33 + 5], dtype=np.uint64)
        for tag in (rng.TAG_MAGNITUDE, rng.TAG_DESIGN):
            a = rng.uniforms(2**40 + 3, streams, 50, tag, step0=2**32 - 10)
            b = rng.uniforms_reference(2**40 + 3, streams, 50, tag, step0=2**32 - 10)
            np.testing.assert_array_equal(a, b)


class TestUniforms:
    def test_open_unit_interval(self):
        u = rng.uniforms(1, np.arange(100), 1000)
        assert u.min() > 0.0 and u.max() < 1.0

    def test_batch_equals_single_streams(self):
        batch = rng.uniforms(9, [3, 4, 5], 20)
        for r, s in enumerate([3, 4, 5]):
            np.testing.assert_array_equal(batch[r], rng.uniforms(9, [s], 20)[0])

    def test_prefix_and_window(self):
        full = rng.uniforms(9, [3], 100)
        np.testing.assert_array_equal(full[:, :40], rng.uniforms(9, [3], 40))
        np.testing.assert_array_equal(full[:, 60:], rng.uniforms(9, [3], 40, step0=60))

    def test_tags_and_seeds_separate(self):
        a = rng.uniforms(1, [0], 10, rng.TAG_MAGNITUDE)
        assert not np.array_equal(a, rng.uniforms(1, [0], 10, rng.TAG_WEIGHT))
        assert not np.array_equal(a, rng.uniforms(2, [0], 10, rng.TAG_MAGNITUDE))

    def test_moments(self):
        u = rng.uniforms(123, np.arange(1000), 1000).ravel()
        m = u.size
        assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / m)
        assert abs(u.var() - 1 / 12) < 4 * np.sqrt(1 / 180 / m)

    def test_bad_seed(self):
        with pytest.raises(ValueError):
            rng.uniforms(-1, [0], 3)
