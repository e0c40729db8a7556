"""Fixed-weight echo state network with a windowed input layer.

State recursion (feedback weights are identically zero)::

    s(t+1) = tanh(s(t) W_s + u(t) W_in + n(t)),     s(0) = 0

where ``u(t) = [x(t), x(t-1), ..., x(t-W+1)]`` is the input window with
zero pre-padding and ``tanh`` acts on real and imaginary parts separately.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .numerics import spectral_radius

__all__ = [
    "ReservoirSpec",
    "ReservoirWeights",
    "init_reservoir",
    "window_inputs",
    "run_reservoir",
    "split_tanh",
    "reservoir_features",
]


@dataclass(frozen=True)
class ReservoirSpec:
    n_neurons: int = 64
    window_len: int = 16
    spectral_radius: float = 0.5
    sparsity: float = 0.2  # fraction of nonzero entries in W_s
    input_scale: float = 0.5
    state_noise_std: float = 0.0
    complex_input_weights: bool = True
    readout_input: bool = False  # readout sees [s(t), u(t)] instead of s(t)
    washout: int = 0  # leading samples of each frame left out of readout fits

    def __post_init__(self):
        if self.n_neurons < 1:
            raise ConfigError("n_neurons must be >= 1")
        if self.window_len < 1:
            raise ConfigError("window_len must be >= 1")
        if not 0.0 < self.spectral_radius < 1.0:
            raise ConfigError("spectral_radius must lie in (0, 1)")
        if not 0.0 < self.sparsity <= 1.0:
            raise ConfigError("sparsity (nonzero fraction) must lie in (0, 1]")
        if self.input_scale <= 0:
            raise ConfigError("input_scale must be positive")
        if self.state_noise_std < 0:
            raise ConfigError("state_noise_std must be >= 0")
        if self.washout < 0:
            raise ConfigError("washout must be >= 0")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ReservoirWeights:
    w_s: np.ndarray  # (n_neurons, n_neurons), real
    w_in: np.ndarray  # (window_len * n_streams, n_neurons)
    spec: ReservoirSpec
    n_streams: int
    seed: int | None = None

    @property
    def w_fb(self):
        return np.zeros((self.n_streams, self.spec.n_neurons))

    @property
    def n_neurons(self):
        return self.spec.n_neurons


def init_reservoir(spec, n_streams, seed=None):
    """Draw reservoir weights for ``n_streams`` input streams.

    Nonzeros of ``W_s`` are uniform on [-1, 1] before rescaling to the target
    spectral radius; ``W_in`` is uniform on [-input_scale, input_scale]
    (independently for real and imaginary parts when complex).
    """
    if n_streams < 1:
        raise ConfigError("n_streams must be >= 1")
    rng = np.random.default_rng(seed)
    n = spec.n_neurons
    nnz = int(round(spec.sparsity * n * n))
    if nnz < 1:
        raise ConfigError(f"sparsity {spec.sparsity} leaves no nonzero entries for {n} neurons")
    w_s = np.zeros(n * n)
    pos = rng.choice(n * n, size=nnz, replace=False)
    w_s[pos] = rng.uniform(-1.0, 1.0, size=nnz)
    w_s = w_s.reshape(n, n)
    rho = spectral_radius(w_s)
    if rho == 0.0:
        raise ConfigError("W_s is nilpotent for this seed/sparsity; cannot reach target spectral radius")
    w_s *= spec.spectral_radius / rho

    shape = (spec.window_len * n_streams, n)
    w_in = rng.uniform(-spec.input_scale, spec.input_scale, size=shape)
    if spec.complex_input_weights:
        w_in = w_in + 1j * rng.uniform(-spec.input_scale, spec.input_scale, size=shape)
    return ReservoirWeights(w_s, w_in, spec, n_streams, seed)


def window_inputs(x, window_len):
    """Stack ``[x(t), x(t-1), ..., x(t-W+1)]`` along the last axis."""
    x = np.asarray(x)
    T = x.shape[-2]
    lags = []
    for k in range(window_len):
        shifted = np.zeros_like(x)
        if k < T:
            shifted[..., k:, :] = x[..., : T - k, :]
        lags.append(shifted)
    return np.concatenate(lags, axis=-1)


def split_tanh(a):
    if np.iscomplexobj(a):
        return np.tanh(a.real) + 1j * np.tanh(a.imag)
    return np.tanh(a)


def run_reservoir(weights, x, pad=0, initial_state=None, seed=None):
    """State trajectory for input frames ``x`` of shape ``(..., T, n_streams)``.

    ``pad`` zero input samples are appended before running.  Returns an array
    of shape ``(..., T + pad, n_neurons)`` whose row ``t`` is ``s(t)``; row 0
    is the initial state.
    """
    x = np.asarray(x)
    if x.ndim < 2 or x.shape[-1] != weights.n_streams:
        raise ShapeError(f"input needs trailing dim {weights.n_streams}, got shape {x.shape}")
    if pad:
        x = np.concatenate([x, np.zeros(x.shape[:-2] + (pad, x.shape[-1]), dtype=x.dtype)], axis=-2)
    spec = weights.spec
    drive = window_inputs(x, spec.window_len) @ weights.w_in
    if spec.state_noise_std > 0:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(drive.shape) * spec.state_noise_std
        if np.iscomplexobj(drive):
            noise = noise + 1j * rng.standard_normal(drive.shape) * spec.state_noise_std
        drive = drive + noise
    T = x.shape[-2]
    batch = x.shape[:-2]
    states = np.zeros(batch + (T, spec.n_neurons), dtype=np.result_type(drive, complex))
    s = np.zeros(batch + (spec.n_neurons,), dtype=states.dtype)
    if initial_state is not None:
        s = s + np.asarray(initial_state)
    w_s = weights.w_s
    for t in range(T):
        states[..., t, :] = s
        s = split_tanh(s @ w_s + drive[..., t, :])
    return states


def reservoir_features(weights, x, pad=0):
    """Readout features for every time step: the states, extended with the
    current input window ``u(t)`` when ``spec.readout_input`` is set."""
    states = run_reservoir(weights, x, pad=pad)
    if not weights.spec.readout_input:
        return states
    x = np.asarray(x)
    if pad:
        x = np.concatenate([x, np.zeros(x.shape[:-2] + (pad, x.shape[-1]), dtype=x.dtype)], axis=-2)
    return np.concatenate([states, window_inputs(x, weights.spec.window_len)], axis=-1)
