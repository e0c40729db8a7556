import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import crandn
from oracles import gray_16qam_table, gray_qpsk_table, hamming
from rc_symdet.errors import ConfigError, FramingError, NumericError, ShapeError
from rc_symdet.ofdm import (
    QAM16,
    QPSK,
    SubframeConfig,
    get_scheme,
    ofdm_demodulate,
    ofdm_modulate,
    papr_db,
    qam_demodulate,
    qam_modulate,
    symbols_to_indices,
)

schemes = st.sampled_from([QPSK, QAM16])


@pytest.mark.parametrize("scheme,table", [(QPSK, gray_qpsk_table()), (QAM16, gray_16qam_table())])
def test_mapping_matches_frozen_table(scheme, table):
    for bits, point in table.items():
        assert qam_modulate(list(bits), scheme)[0] == pytest.approx(point, abs=1e-15)


def test_qpsk_zero_bits():
    assert qam_modulate([0, 0], QPSK)[0] == pytest.approx((1 + 1j) / math.sqrt(2))


@pytest.mark.parametrize("scheme", [QPSK, QAM16])
def test_constellation_energy_and_distinct(scheme):
    c = scheme.constellation
    assert np.mean(np.abs(c) ** 2) == pytest.approx(1.0)
    assert len(set(np.round(c, 12))) == scheme.order


@pytest.mark.parametrize("scheme", [QPSK, QAM16])
def test_gray_property(scheme):
    # nearest neighbours differ in exactly one bit
    table = gray_qpsk_table() if scheme is QPSK else gray_16qam_table()
    d_min = scheme.min_distance
    for (b1, p1), (b2, p2) in itertools.combinations(table.items(), 2):
        if abs(abs(p1 - p2) - d_min) < 1e-12:
            assert hamming(b1, b2) == 1


def test_min_distance_values():
    assert QPSK.min_distance == pytest.approx(math.sqrt(2))
    assert QAM16.min_distance == pytest.approx(2 / math.sqrt(10))


@pytest.mark.parametrize("scheme", [QPSK, QAM16])
def test_round_trip_all_patterns(scheme):
    k = scheme.bits_per_symbol
    bits = np.array(list(itertools.product((0, 1), repeat=k))).ravel()
    np.testing.assert_array_equal(qam_demodulate(qam_modulate(bits, scheme), scheme), bits)


@given(schemes, st.data())
def test_round_trip_random_bits(scheme, data):
    n = data.draw(st.integers(1, 40)) * scheme.bits_per_symbol
    bits = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    np.testing.assert_array_equal(qam_demodulate(qam_modulate(bits, scheme), scheme), bits)


@given(schemes, st.integers(0, 15), st.floats(0, 0.499), st.floats(0, 2 * math.pi))
def test_small_noise_is_corrected(scheme, idx, frac, angle):
    idx %= scheme.order
    point = scheme.constellation[idx]
    noisy = point + frac * scheme.min_distance * np.exp(1j * angle)
    assert symbols_to_indices(noisy, scheme) == idx


def test_tie_goes_to_lowest_index():
    # the origin is equidistant from all four QPSK points
    assert symbols_to_indices(0j, QPSK) == 0
    # midpoint between labels 0 (1+j) and 1 (1-j)
    assert symbols_to_indices(1 / math.sqrt(2), QPSK) == 0


def test_framing_errors():
    with pytest.raises(FramingError):
        qam_modulate([0, 1, 1], QPSK)
    with pytest.raises(FramingError):
        qam_modulate([0, 2], QPSK)


def test_scheme_lookup():
    assert get_scheme("16-QAM") is QAM16
    assert get_scheme("qpsk") is QPSK
    with pytest.raises(ConfigError):
        get_scheme("64qam")


def test_subframe_config():
    cfg = SubframeConfig(n_sc=64, n_cp=16, q=4, n_d=13)
    assert cfg.frame_len == 80
    assert cfg.overhead == pytest.approx(4 / 17)
    assert round(100 * cfg.overhead, 1) == 23.5
    with pytest.raises(ConfigError):
        SubframeConfig(n_sc=16, n_cp=16)
    with pytest.raises(ConfigError):
        SubframeConfig(q=0)


def test_cyclic_prefix_rows(rng):
    cfg = SubframeConfig(n_sc=16, n_cp=4, n_t=2)
    frame = ofdm_modulate(crandn(rng, 16, 2), cfg)
    assert frame.shape == (20, 2)
    np.testing.assert_array_equal(frame[:4], frame[16:20])


def test_single_tone_is_complex_exponential():
    cfg = SubframeConfig(n_sc=16, n_cp=4, n_t=1, n_r=1)
    k = 3
    grid = np.zeros((16, 1), dtype=complex)
    grid[k, 0] = 1.0
    frame = ofdm_modulate(grid, cfg)
    t = np.arange(-4, 16)
    np.testing.assert_allclose(frame[:, 0], np.exp(2j * np.pi * k * t / 16) / 16, atol=1e-15)


def test_round_trip_batched(rng):
    cfg = SubframeConfig(n_sc=32, n_cp=8, n_t=3)
    z = crandn(rng, 5, 32, 3)
    np.testing.assert_allclose(ofdm_demodulate(ofdm_modulate(z, cfg), cfg), z, atol=1e-12)


def test_cyclic_delay_is_phase_ramp(rng):
    cfg = SubframeConfig(n_sc=32, n_cp=8, n_t=1, n_r=1)
    z = crandn(rng, 32, 1)
    frame = ofdm_modulate(z, cfg)
    d = 5
    delayed = np.zeros_like(frame)
    delayed[d:] = frame[:-d]  # linear delay within the CP acts cyclically on the body
    n = np.arange(32)[:, None]
    np.testing.assert_allclose(ofdm_demodulate(delayed, cfg), z * np.exp(-2j * np.pi * n * d / 32), atol=1e-12)


def test_zero_frame_gives_zero_grid():
    cfg = SubframeConfig(n_sc=8, n_cp=2, n_t=1, n_r=1)
    np.testing.assert_array_equal(ofdm_demodulate(np.zeros((10, 1)), cfg), np.zeros((8, 1)))


def test_shape_errors():
    cfg = SubframeConfig(n_sc=8, n_cp=2, n_t=1, n_r=1)
    with pytest.raises(ShapeError):
        ofdm_demodulate(np.zeros((9, 1)), cfg)
    with pytest.raises(ShapeError):
        ofdm_modulate(np.zeros((7, 1)), cfg)


@given(st.integers(0, 3), st.floats(0.1, 10))
def test_energy_conservation(seed, scale):
    cfg = SubframeConfig(n_sc=16, n_cp=4, n_t=2)
    z = scale * crandn(np.random.default_rng(seed), 16, 2)
    body = ofdm_modulate(z, cfg)[4:]
    # with the 1/N inverse, sum |x|^2 = sum |Z|^2 / N
    assert np.sum(np.abs(body) ** 2) == pytest.approx(np.sum(np.abs(z) ** 2) / 16, rel=1e-10)


def test_papr_examples(rng):
    assert papr_db(np.exp(1j * rng.uniform(0, 6.28, 64))) == pytest.approx(0.0, abs=1e-12)
    impulse = np.zeros(32)
    impulse[0] = 1
    assert papr_db(impulse) == pytest.approx(10 * math.log10(32))
    x = crandn(rng, 80, 2)
    assert papr_db(3.7 * x) == pytest.approx(papr_db(x))
    with pytest.raises(NumericError):
        papr_db(np.zeros(8))
