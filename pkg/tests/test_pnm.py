import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lisgan import pnm

gray = st.tuples(st.integers(1, 12), st.integers(1, 12))


@given(st.one_of(arrays(np.uint8, gray), arrays(np.uint8, gray.map(lambda s: s + (3,)))))
def test_round_trip_is_lossless(img):
    np.testing.assert_array_equal(pnm.decode(pnm.encode(img)), img)


def test_header_comments_are_skipped():
    buf = b"P5\n# made by hand\n2 1\n# depth\n255\n\x00\xff"
    np.testing.assert_array_equal(pnm.decode(buf), [[0, 255]])


@pytest.mark.parametrize("buf,match", [
    (b"P2\n1 1\n255\n0", "magic"),
    (b"P5\n1 1\n65535\n\x00\x00", "8-bit"),
    (b"P5\n2 2\n255\n\x00", "truncated"),
    (b"P5\nx 2\n255\n", "header"),
])
def test_malformed_files_are_rejected(buf, match):
    with pytest.raises(pnm.PNMError, match=match):
        pnm.decode(buf)


def test_to_uint8_rounds_and_orders_channels():
    chw = np.zeros((3, 1, 2))
    chw[0, 0, 1] = 1.0
    chw[2, 0, 0] = 0.5
    out = pnm.to_uint8(chw)
    assert out.shape == (1, 2, 3)
    assert out[0, 1, 0] == 255 and out[0, 0, 2] == 128
    assert pnm.to_uint8(np.full((1, 2, 2), 2.0)).max() == 255
