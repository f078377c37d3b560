"""Generator determinism and basic statistical sanity."""

import numpy as np

from hiernoise.rng import Rng, derive_seed


def test_streams_reproducible():
    a = Rng(12345).uniforms(1000)
    b = Rng(12345).uniforms(1000)
    assert np.array_equal(a, b)


def test_chunking_does_not_change_stream():
    whole = Rng(7).next_uint64(100)
    r = Rng(7)
    parts = np.concatenate([r.next_uint64(30), r.next_uint64(50), r.next_uint64(20)])
    assert np.array_equal(whole, parts)


def test_known_values_frozen():
    # frozen outputs pin the algorithm across platforms and refactors:
    # SplitMix64 with seed 0, outputs 1..3
    got = Rng(0).next_uint64(3)
    expected = np.array([16294208416658607535, 7960286522194355700,
                         487617019471545679], dtype=np.uint64)
    assert np.array_equal(got, expected)


def test_uniforms_in_unit_interval():
    u = Rng(9).uniforms(10000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.02


def test_normals_moments():
    z = Rng(11).normals(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    assert len(Rng(11).normals(7)) == 7


def test_permutation_is_permutation():
    p = Rng(4).permutation(100)
    assert sorted(p.tolist()) == list(range(100))
    assert np.array_equal(p, Rng(4).permutation(100))


def test_categorical_frequencies():
    cdf = np.array([0.2, 0.5, 1.0])
    draws = Rng(13).categorical(cdf, 100_000)
    freqs = np.bincount(draws, minlength=3) / draws.size
    assert np.abs(freqs - [0.2, 0.3, 0.5]).max() < 0.01


def test_derive_seed_separates_streams():
    tags = [derive_seed(1, "corrupt"), derive_seed(1, "init"),
            derive_seed(1, "shuffle"), derive_seed(2, "corrupt"),
            derive_seed(1, "corrupt", 5)]
    assert len(set(tags)) == len(tags)
    assert derive_seed(1, "corrupt") == derive_seed(1, "corrupt")
