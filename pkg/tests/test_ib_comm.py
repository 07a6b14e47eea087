import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridnav.errors import InvalidInputError
from gridnav.ib_comm import (HEADER, GaussianLatent, Message, OccupancyImage, codec_grid_side, decode_map,
                             encode_map, gaussian_kl, kl_monte_carlo, reconstruction_bce, vib_loss)


def test_kl_of_prior_is_zero():
    assert gaussian_kl(GaussianLatent(np.zeros(4), np.ones(4))) == 0.0


def test_kl_known_values():
    assert gaussian_kl(GaussianLatent([1.0], [1.0])) == pytest.approx(0.5)
    assert gaussian_kl(GaussianLatent([0.0], [math.e])) == pytest.approx(0.5 * (math.e - 2))


def test_kl_monte_carlo_agrees():
    lat = GaussianLatent([0.5, -1.0, 0.2], [0.3, 2.0, 1.1])
    mc, se = kl_monte_carlo(lat, 100_000, seed=3)
    assert abs(mc - gaussian_kl(lat)) < 3 * se


def test_latent_validation():
    with pytest.raises(InvalidInputError):
        GaussianLatent([0.0], [0.0])
    with pytest.raises(InvalidInputError):
        GaussianLatent([0.0, 1.0], [1.0])


def test_bce_perfect_and_clamped():
    y = OccupancyImage(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert reconstruction_bce(y, y) == pytest.approx(-4 * math.log1p(-1e-7))
    flipped = OccupancyImage(1 - y.values)
    assert reconstruction_bce(y, flipped) == pytest.approx(-4 * math.log(1e-7))
    half = OccupancyImage(np.full((2, 2), 0.5))
    assert reconstruction_bce(y, half) == pytest.approx(4 * math.log(2))


def test_bce_shape_mismatch():
    with pytest.raises(InvalidInputError):
        reconstruction_bce(OccupancyImage(np.zeros((2, 2))), OccupancyImage(np.zeros((3, 3))))


def test_vib_total():
    y = OccupancyImage(np.full((3, 3), 0.5))
    lat = GaussianLatent([1.0, 0.0], [1.0, 1.0])
    rep = vib_loss(y, y, lat, beta=0.1)
    assert rep.total == pytest.approx(rep.reconstruction + 0.1 * 0.5)
    with pytest.raises(InvalidInputError):
        vib_loss(y, y, lat, beta=0.0)


@pytest.mark.parametrize("budget,k", [(1, 1), (4, 2), (8, 2), (9, 3), (16, 4), (64, 8), (127, 11), (128, 11)])
def test_grid_side(budget, k):
    assert codec_grid_side(budget) == k


def test_grid_side_capped_by_image():
    assert codec_grid_side(10_000, 29) == 29
    with pytest.raises(InvalidInputError):
        codec_grid_side(0)


@pytest.mark.parametrize("budget", [4, 16, 64, 128])
def test_message_within_budget(budget):
    rng = np.random.default_rng(budget)
    img = OccupancyImage((rng.uniform(size=(29, 29)) > 0.5).astype(float))
    msg = encode_map(img, budget)
    assert msg.n_bits <= budget
    assert set(msg.payload) <= {0, 1}


def test_encode_block_majority():
    img = np.zeros((4, 4))
    img[:2, :2] = 1.0
    img[2:, 2:] = 0.6
    msg = encode_map(OccupancyImage(img), 4)
    assert msg.grid_side == 2
    assert msg.payload == (1, 0, 0, 1)


def test_full_resolution_roundtrip():
    rng = np.random.default_rng(5)
    img = (rng.uniform(size=(7, 7)) > 0.5).astype(float)
    msg = encode_map(OccupancyImage(img), 49)
    np.testing.assert_array_equal(decode_map(msg, 7).values, img)


def test_decode_nearest_neighbour():
    msg = Message((1, 0, 0, 1), 2)
    out = decode_map(msg, 4).values
    np.testing.assert_array_equal(out, [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]])
    assert decode_map(msg, 5).values.shape == (5, 5)


def test_wire_header_layout():
    msg = Message((1,) * 9, 3, 1, (7, 300), 123456)
    data = msg.to_bytes()
    assert data[:HEADER.size] == bytes([3, 0, 1, 7, 0, 44, 1, 0x40, 0xE2, 0x01, 0x00])
    assert len(data) == HEADER.size + 2
    assert data[HEADER.size:] == bytes([0xFF, 0x80])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**16 - 1), st.integers(0, 2**16 - 1), st.integers(0, 2**32 - 1), st.data())
def test_wire_roundtrip(k, x, y, ts, data):
    bits = tuple(data.draw(st.lists(st.integers(0, 1), min_size=k * k, max_size=k * k)))
    msg = Message(bits, k, 1, (x, y), ts)
    assert Message.from_bytes(msg.to_bytes()) == msg


def test_truncated_payload_rejected():
    data = Message((1,) * 16, 4).to_bytes()
    with pytest.raises(InvalidInputError):
        Message.from_bytes(data[:-1])
