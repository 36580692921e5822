import numpy as np
import pytest

from markov_cce.rng import Streams, as_generator, as_streams, make_generator


def test_same_stream_same_numbers():
    a = make_generator(3, "cce", 2, 1).random(5)
    b = make_generator(3, "cce", 2, 1).random(5)
    assert np.array_equal(a, b)


def test_distinct_streams_differ():
    a = make_generator(3, "cce", 2, 1).random(5)
    assert not np.array_equal(a, make_generator(3, "cce", 2, 2).random(5))
    assert not np.array_equal(a, make_generator(4, "cce", 2, 1).random(5))


def test_string_keys_do_not_collide_with_small_ints():
    a = make_generator(0, "x").random(3)
    b = make_generator(0, 0).random(3)
    assert not np.array_equal(a, b)


def test_child_matches_flat_id():
    s = Streams(11).child("v", 5)
    assert np.array_equal(s.generator(0).random(4), make_generator(11, "v", 5, 0).random(4))


def test_generator_is_philox():
    assert isinstance(make_generator(0).bit_generator, np.random.Philox)


@pytest.mark.parametrize("bad", [-1, 1.5, True, None])
def test_bad_keys_rejected(bad):
    with pytest.raises((TypeError, ValueError)):
        make_generator(0, bad)


def test_coercions():
    assert as_streams(5).seed == 5
    s = Streams(2)
    assert as_streams(s) is s
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert isinstance(as_generator(3), np.random.Generator)
    with pytest.raises(TypeError):
        as_streams("seed")
