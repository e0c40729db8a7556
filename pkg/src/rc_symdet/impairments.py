"""Transmit PA compression, multipath channel, additive noise and ADC quantization.

Together these build the received frame ``X = q(h(f(X_tx)) + N)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError

__all__ = [
    "PaConfig",
    "AdcConfig",
    "ChannelProfile",
    "ChannelRealization",
    "rapp",
    "power_amplifier",
    "quantize",
    "adc",
    "generate_channel",
    "apply_channel",
    "frequency_response",
    "noise_variance",
    "awgn",
]


@dataclass(frozen=True)
class PaConfig:
    """RAPP amplifier settings.

    ``input_backoff_db=None`` bypasses the amplifier entirely (ideal linear PA).
    """

    rho: float = 3.0
    x_sat: float = 1.0
    input_backoff_db: float | None = None

    def __post_init__(self):
        if self.rho <= 0 or self.x_sat <= 0:
            raise ConfigError("RAPP needs rho > 0 and x_sat > 0")

    @property
    def enabled(self):
        return self.input_backoff_db is not None


@dataclass(frozen=True)
class AdcConfig:
    """Uniform mid-rise quantizer applied to I and Q separately.

    When ``a_max`` is None the clip level is chosen per receive antenna as
    ``clip_rms_factor`` times the RMS of one real component of that
    antenna's signal.
    """

    bits: int = 1
    a_max: float | None = None
    clip_rms_factor: float = 3.0
    enabled: bool = False

    def __post_init__(self):
        if self.bits < 1:
            raise ConfigError("ADC needs at least one bit")
        if self.a_max is not None and self.a_max <= 0:
            raise ConfigError("a_max must be positive")
        if self.clip_rms_factor <= 0:
            raise ConfigError("clip_rms_factor must be positive")


@dataclass(frozen=True)
class ChannelProfile:
    """Tap-delay-line Rayleigh profile with an exponential power-delay profile.

    ``kind="identity"`` gives a single unit tap with identity antenna coupling
    (requires ``n_r == n_t``); useful for sanity runs.
    """

    n_taps: int = 4
    decay_db_per_tap: float = 3.0
    kind: str = "rayleigh"

    def __post_init__(self):
        if self.n_taps < 1:
            raise ConfigError("n_taps must be >= 1")
        if self.kind not in ("rayleigh", "identity"):
            raise ConfigError(f"unknown channel kind {self.kind!r}")

    def tap_powers(self):
        p = 10.0 ** (-self.decay_db_per_tap * np.arange(self.n_taps) / 10.0)
        return p / p.sum()


@dataclass
class ChannelRealization:
    taps: np.ndarray  # (n_r, n_t, n_taps)
    meta: dict = field(default_factory=dict)

    @property
    def n_r(self):
        return self.taps.shape[0]

    @property
    def n_t(self):
        return self.taps.shape[1]

    @property
    def n_taps(self):
        return self.taps.shape[2]

    def to_dict(self):
        return {
            "re": self.taps.real.tolist(),
            "im": self.taps.imag.tolist(),
            **self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        taps = np.asarray(d["re"]) + 1j * np.asarray(d["im"])
        meta = {k: v for k, v in d.items() if k not in ("re", "im")}
        return cls(taps, meta)


def rapp(x, rho=3.0, x_sat=1.0):
    """AM/AM RAPP compression; the phase of ``x`` is preserved."""
    x = np.asarray(x)
    mag = np.abs(x)
    r = mag / x_sat
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # above saturation, divide x_sat by a factor >= 1 so rounding cannot exceed x_sat
        big = x_sat / (1.0 + r ** (-2.0 * rho)) ** (1.0 / (2 * rho))
        small = mag / (1.0 + r ** (2 * rho)) ** (1.0 / (2 * rho))
        out_mag = np.where(r > 1.0, big, small)
        unit = np.where(mag > 0, x / np.where(mag > 0, mag, 1.0), 0.0)
    return unit * out_mag


def power_amplifier(x, cfg):
    """Scale ``x`` to the configured input back-off, then apply RAPP.

    The back-off is realised by setting the mean input power to
    ``x_sat**2 / 10**(ibo/10)``; the mean is taken over all of ``x``.
    """
    x = np.asarray(x)
    if not cfg.enabled:
        return x
    p_in = np.mean(np.abs(x) ** 2)
    if p_in == 0:
        return x
    target = cfg.x_sat**2 / 10.0 ** (cfg.input_backoff_db / 10.0)
    return rapp(x * np.sqrt(target / p_in), cfg.rho, cfg.x_sat)


def quantize(x, bits, a_max):
    """Mid-rise quantizer on real input.

    ``delta * ceil(x / delta) - delta / 2`` inside ``|x| < a_max``, and
    ``a_max * sign(x)`` outside, with ``a_max = (2**bits - 1) * delta / 2``.
    """
    x = np.asarray(x, dtype=float)
    delta = 2.0 * a_max / (2**bits - 1)
    inner = delta * np.ceil(x / delta) - delta / 2.0
    return np.where(np.abs(x) < a_max, inner, a_max * np.sign(x))


def adc(x, cfg):
    """Quantize the I and Q parts of every receive antenna (last axis)."""
    x = np.asarray(x)
    if not cfg.enabled:
        return x
    if cfg.a_max is not None:
        a_max = np.full(x.shape[-1], cfg.a_max)
    else:
        axes = tuple(range(x.ndim - 1))
        rms = np.sqrt(np.mean(np.abs(x) ** 2, axis=axes) / 2.0)
        a_max = cfg.clip_rms_factor * np.where(rms > 0, rms, 1.0)
    return quantize(x.real, cfg.bits, a_max) + 1j * quantize(x.imag, cfg.bits, a_max)


def generate_channel(profile, n_r, n_t, seed=None, n_cp=None):
    """Draw one MIMO tap-delay-line realization.

    Taps are i.i.d. circularly symmetric Gaussian; the expected total power
    of every tx/rx pair is 1.
    """
    if n_cp is not None and profile.n_taps > n_cp:
        raise ConfigError(f"{profile.n_taps} taps exceed the cyclic prefix ({n_cp})")
    if profile.kind == "identity":
        if n_r != n_t:
            raise ConfigError("identity channel needs n_r == n_t")
        taps = np.zeros((n_r, n_t, profile.n_taps), dtype=complex)
        taps[:, :, 0] = np.eye(n_r)
        return ChannelRealization(taps, {"kind": "identity"})
    rng = np.random.default_rng(seed)
    std = np.sqrt(profile.tap_powers() / 2.0)
    g = rng.standard_normal((n_r, n_t, profile.n_taps, 2))
    taps = (g[..., 0] + 1j * g[..., 1]) * std
    return ChannelRealization(taps, {"kind": "rayleigh"})


def apply_channel(x, ch):
    """MIMO FIR filtering of frames ``(..., T, n_t)`` -> ``(..., T, n_r)``.

    Each frame is convolved on its own and truncated to its length.
    """
    x = np.asarray(x)
    if x.shape[-1] != ch.n_t:
        raise ShapeError(f"frame has {x.shape[-1]} tx streams, channel expects {ch.n_t}")
    T = x.shape[-2]
    out = np.zeros(x.shape[:-1] + (ch.n_r,), dtype=np.result_type(x, ch.taps))
    for lag in range(min(ch.n_taps, T)):
        h = ch.taps[:, :, lag]
        if not np.any(h):
            continue
        out[..., lag:, :] += x[..., : T - lag, :] @ h.T
    return out


def frequency_response(ch, n_sc):
    """Per-subcarrier channel matrices, shape ``(n_sc, n_r, n_t)``."""
    return np.moveaxis(np.fft.fft(ch.taps, n=n_sc, axis=-1), -1, 0)


def noise_variance(x, snr_db):
    """Per-sample complex noise variance giving ``snr_db`` w.r.t. mean power of ``x``."""
    if np.isposinf(snr_db):
        return 0.0
    return float(np.mean(np.abs(np.asarray(x)) ** 2) / 10.0 ** (snr_db / 10.0))


def awgn(x, snr_db, seed=None, noise_var=None):
    """Add circularly symmetric Gaussian noise.

    ``snr_db = inf`` returns ``x`` unchanged.  An explicit ``noise_var``
    overrides the SNR-derived variance.
    """
    x = np.asarray(x)
    if noise_var is None:
        noise_var = noise_variance(x, snr_db)
    if noise_var == 0.0:
        return x.copy()
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(x.shape + (2,))
    return x + np.sqrt(noise_var / 2.0) * (g[..., 0] + 1j * g[..., 1])
