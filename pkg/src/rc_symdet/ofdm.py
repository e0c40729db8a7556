"""QAM mapping and the OFDM modulate / demodulate chain.

Array conventions
-----------------
A frequency grid ``Z`` has shape ``(..., n_sc, n_t)``: row ``n`` is the
MIMO symbol vector on subcarrier ``n``.  A time frame has shape
``(..., n_cp + n_sc, n_ant)``.  Leading axes are batch axes (several OFDM
symbols at once).

Gray tables
-----------
Bits are mapped MSB first.  QPSK uses ``((1-2 b0) + j (1-2 b1)) / sqrt(2)``.
16-QAM uses the layout from 3GPP TS 38.211,
``I = (1-2 b0)(2-(1-2 b2))``, ``Q = (1-2 b1)(2-(1-2 b3))``, scaled by
``1/sqrt(10)``; each axis is Gray coded (``01, 00, 10, 11`` for levels
``3, 1, -1, -3``).
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, FramingError, NumericError, ShapeError
from .numerics import fft, ifft

__all__ = [
    "ModulationScheme",
    "QPSK",
    "QAM16",
    "get_scheme",
    "SubframeConfig",
    "qam_modulate",
    "qam_demodulate",
    "symbols_to_indices",
    "ofdm_modulate",
    "ofdm_demodulate",
    "add_cyclic_prefix",
    "papr_db",
]


@dataclass(frozen=True)
class ModulationScheme:
    name: str
    bits_per_symbol: int

    @cached_property
    def constellation(self):
        """Points indexed by the integer value of their bit label."""
        labels = np.arange(2**self.bits_per_symbol)
        bits = (labels[:, None] >> np.arange(self.bits_per_symbol)[::-1]) & 1
        b = 1 - 2 * bits.astype(float)
        if self.bits_per_symbol == 2:
            pts = (b[:, 0] + 1j * b[:, 1]) / np.sqrt(2)
        elif self.bits_per_symbol == 4:
            pts = (b[:, 0] * (2 - b[:, 2]) + 1j * b[:, 1] * (2 - b[:, 3])) / np.sqrt(10)
        else:
            raise ConfigError(f"unsupported modulation order 2^{self.bits_per_symbol}")
        pts.setflags(write=False)
        return pts

    @property
    def order(self):
        return 2**self.bits_per_symbol

    @cached_property
    def min_distance(self):
        c = self.constellation
        d = np.abs(c[:, None] - c[None, :])
        return float(d[d > 0].min())


QPSK = ModulationScheme("qpsk", 2)
QAM16 = ModulationScheme("16qam", 4)

_SCHEMES = {"qpsk": QPSK, "4qam": QPSK, "16qam": QAM16, "qam16": QAM16}


def get_scheme(name):
    if isinstance(name, ModulationScheme):
        return name
    try:
        return _SCHEMES[str(name).lower().replace("-", "")]
    except KeyError:
        raise ConfigError(f"unknown modulation {name!r}; use 'qpsk' or '16qam'") from None


@dataclass(frozen=True)
class SubframeConfig:
    """Resource-grid dimensions of one subframe (Q reference + N_d data symbols)."""

    n_sc: int = 64
    n_cp: int = 16
    q: int = 4
    n_d: int = 13
    n_t: int = 2
    n_r: int = 2

    def __post_init__(self):
        if self.n_sc < 1 or self.n_cp < 0:
            raise ConfigError("n_sc must be >= 1 and n_cp >= 0")
        if self.n_cp >= self.n_sc:
            raise ConfigError(f"n_cp ({self.n_cp}) must be smaller than n_sc ({self.n_sc})")
        if self.q < 1 or self.n_d < 1:
            raise ConfigError("q and n_d must both be >= 1")
        if self.n_t < 1 or self.n_r < 1:
            raise ConfigError("antenna counts must be >= 1")

    @property
    def frame_len(self):
        return self.n_cp + self.n_sc

    @property
    def overhead(self):
        """Fraction of OFDM symbols spent on reference signals."""
        return self.q / (self.q + self.n_d)


def qam_modulate(bits, scheme):
    scheme = get_scheme(scheme)
    bits = np.asarray(bits, dtype=np.int64).ravel()
    k = scheme.bits_per_symbol
    if bits.size % k:
        raise FramingError(f"{bits.size} bits is not a multiple of {k}")
    if np.any((bits != 0) & (bits != 1)):
        raise FramingError("bits must be 0 or 1")
    idx = bits.reshape(-1, k) @ (1 << np.arange(k)[::-1])
    return scheme.constellation[idx]


def symbols_to_indices(symbols, scheme):
    """Nearest constellation index per symbol; ties go to the lowest index."""
    scheme = get_scheme(scheme)
    symbols = np.asarray(symbols)
    c = scheme.constellation
    d = np.abs(symbols[..., None] - c) ** 2
    return np.argmin(d, axis=-1)


def qam_demodulate(symbols, scheme):
    """Hard nearest-neighbour decisions, returned as a flat bit array."""
    scheme = get_scheme(scheme)
    idx = symbols_to_indices(np.ravel(symbols), scheme)
    k = scheme.bits_per_symbol
    bits = (idx[:, None] >> np.arange(k)[::-1]) & 1
    return bits.ravel().astype(np.int8)


def _check_grid(grid, cfg, n_ant=None):
    if grid.shape[-2] != cfg.n_sc:
        raise ShapeError(f"grid has {grid.shape[-2]} subcarriers, config says {cfg.n_sc}")
    if n_ant is not None and grid.shape[-1] != n_ant:
        raise ShapeError(f"grid has {grid.shape[-1]} antennas, expected {n_ant}")


def add_cyclic_prefix(body, n_cp):
    """Prepend the last ``n_cp`` samples along the time axis (-2)."""
    if n_cp == 0:
        return np.array(body, copy=True)
    return np.concatenate([body[..., -n_cp:, :], body], axis=-2)


def ofdm_modulate(grid, cfg):
    """Per-antenna IFFT of length ``n_sc`` followed by cyclic-prefix insertion."""
    grid = np.asarray(grid)
    if grid.ndim < 2:
        raise ShapeError("grid must be at least 2-D (n_sc, n_ant)")
    _check_grid(grid, cfg)
    return add_cyclic_prefix(ifft(grid, axis=-2), cfg.n_cp)


def ofdm_demodulate(frame, cfg):
    """Strip the cyclic prefix and take a per-antenna FFT."""
    frame = np.asarray(frame)
    if frame.ndim < 2 or frame.shape[-2] != cfg.frame_len:
        raise ShapeError(
            f"frame length {frame.shape[-2] if frame.ndim >= 2 else None} != n_cp + n_sc = {cfg.frame_len}"
        )
    return fft(frame[..., cfg.n_cp :, :], axis=-2)


def papr_db(frame):
    """Peak-to-mean power ratio of all samples of ``frame`` in dB."""
    p = np.abs(np.asarray(frame)) ** 2
    mean = p.mean() if p.size else 0.0
    if mean == 0.0:
        raise NumericError("PAPR is undefined for an all-zero signal")
    return float(10 * np.log10(p.max() / mean))
