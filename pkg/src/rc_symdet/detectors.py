"""Reservoir-computing symbol detectors.

Four trainers live here:

* :func:`train_time_rc` -- shallow RC with a least-squares readout and a
  delay search over the target offset.
* :func:`train_tf_rc` -- time layer, fixed FFT and a unit-modulus
  per-subcarrier layer, fitted by alternating least squares.
* :func:`train_rcnet_deep_time` / :func:`train_rcnet_deep_tf` -- sequential
  stacks of the above, each layer fed by the previous layer's output.

Readouts act on row vectors: ``y(t) = s(t) @ W_tout``.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotTrainedError, NumericError, ShapeError
from .numerics import DEFAULT_PINV_RTOL, fft, ifft, least_squares, pseudo_inverse
from .ofdm import SubframeConfig, add_cyclic_prefix, ofdm_demodulate, ofdm_modulate, qam_demodulate
from .reservoir import ReservoirSpec, init_reservoir, reservoir_features

log = logging.getLogger(__name__)

__all__ = [
    "TrainingSet",
    "TimeReadout",
    "TfReadout",
    "RcLayer",
    "RcnetModel",
    "TrainDiagnostics",
    "default_delay_grid",
    "layer_seed",
    "train_time_rc",
    "detect_time_rc",
    "tf_phase_update",
    "tf_time_update",
    "tf_objective",
    "train_tf_rc",
    "detect_tf_rc",
    "train_rcnet_deep_time",
    "train_rcnet_deep_tf",
    "rcnet_forward",
    "rcnet_detect",
]


@dataclass
class TrainingSet:
    """The Q reference symbols of one subframe.

    ``rx`` holds received frames ``(Q, T, n_r)``, ``tx_time`` the transmitted
    time-domain frames ``(Q, T, n_t)`` and ``tx_freq`` the frequency grids
    ``(Q, n_sc, n_t)``.
    """

    rx: np.ndarray
    tx_time: np.ndarray
    tx_freq: np.ndarray
    cfg: SubframeConfig

    def __post_init__(self):
        cfg = self.cfg
        if self.rx.ndim != 3 or self.rx.shape[1:] != (cfg.frame_len, cfg.n_r):
            raise ShapeError(f"rx must be (Q, {cfg.frame_len}, {cfg.n_r}), got {self.rx.shape}")
        q = self.rx.shape[0]
        if q < 1:
            raise ShapeError("training set needs at least one reference symbol")
        if self.tx_time.shape != (q, cfg.frame_len, cfg.n_t):
            raise ShapeError(f"tx_time must be ({q}, {cfg.frame_len}, {cfg.n_t}), got {self.tx_time.shape}")
        if self.tx_freq.shape != (q, cfg.n_sc, cfg.n_t):
            raise ShapeError(f"tx_freq must be ({q}, {cfg.n_sc}, {cfg.n_t}), got {self.tx_freq.shape}")

    @classmethod
    def from_grids(cls, rx, grids, cfg):
        grids = np.asarray(grids)
        return cls(np.asarray(rx), ofdm_modulate(grids, cfg), grids, cfg)

    @property
    def q(self):
        return self.rx.shape[0]


@dataclass
class TimeReadout:
    w_tout: np.ndarray  # (n_neurons, n_t)
    p_star: int


@dataclass
class TfReadout:
    w_tout: np.ndarray  # (n_neurons, n_t)
    w_fout: np.ndarray  # (n_sc, n_t), unit modulus
    p_star: int = 0


@dataclass
class RcLayer:
    """One reservoir with its trained readout.

    ``input_gain`` rescales the layer input to unit RMS (fixed at training
    time from the reference symbols) so the reservoir sees the same drive
    level whatever the PA back-off or channel gain.
    """

    weights: object  # ReservoirWeights
    readout: TimeReadout | TfReadout | None = None
    input_gain: float = 1.0


@dataclass
class RcnetModel:
    kind: str  # "deep-time" | "deep-tf"
    layers: list

    def __post_init__(self):
        if self.kind not in ("deep-time", "deep-tf"):
            raise ConfigError(f"unknown RCNet kind {self.kind!r}")
        want = TimeReadout if self.kind == "deep-time" else TfReadout
        for layer in self.layers:
            if layer.readout is not None and not isinstance(layer.readout, want):
                raise ConfigError(f"{self.kind} model holds a {type(layer.readout).__name__}")

    @property
    def depth(self):
        return len(self.layers)


@dataclass
class TrainDiagnostics:
    """Objective values recorded during training.

    For delay searches ``objective_trace`` holds one value per delay tried;
    for ALS it holds the objective after every full iteration, and
    ``half_step_trace`` additionally records the value after each block update.
    Deep models keep one list per layer in ``layer_traces`` and their
    concatenation in ``objective_trace``.  ``final_objective`` is the
    objective of the readout that was kept (last layer for deep models).
    """

    objective_trace: list = field(default_factory=list)
    layer_traces: list = field(default_factory=list)
    half_step_trace: list = field(default_factory=list)
    delay_objectives: list = field(default_factory=list)
    p_stars: list = field(default_factory=list)
    final_objective: float = float("nan")

    def summary(self):
        return {
            "final_objective": float(self.final_objective),
            "trace_length": len(self.objective_trace),
            "layers": len(self.layer_traces) or 1,
            "p_stars": [int(p) for p in self.p_stars],
        }


def default_delay_grid(n_cp, points=None):
    """Delays to search: ``points`` values spread uniformly over ``[0, n_cp]``,
    or every integer in ``[0, n_cp]`` when ``points`` is None."""
    if points is None:
        return list(range(n_cp + 1))
    return sorted(set(int(round(v)) for v in np.linspace(0, n_cp, points)))


def layer_seed(seed, layer):
    """Seed for layer ``layer``; layer 0 reuses ``seed`` so depth-1 stacks
    coincide with their shallow counterpart."""
    if layer == 0 or seed is None:
        return seed
    return int(np.random.SeedSequence([int(seed), int(layer)]).generate_state(1)[0])


def _check_delay_grid(delay_grid):
    grid = [int(p) for p in delay_grid]
    if not grid:
        raise ConfigError("delay grid is empty")
    if min(grid) < 0:
        raise ConfigError("delays must be non-negative")
    return grid


def _flat(a):
    return a.reshape(-1, a.shape[-1])


def _sq_norm(a):
    return float(np.sum(a.real**2 + a.imag**2))


# ---------------------------------------------------------------- time RC


def unit_rms_gain(x):
    """Scalar gain bringing ``x`` to unit RMS (1 for an all-zero input)."""
    p = float(np.mean(np.abs(x) ** 2)) if np.size(x) else 0.0
    return 1.0 / np.sqrt(p) if p > 0 else 1.0


def _aligned_states(layer, x, p):
    """States ``s(t + p)`` for ``t = 0..T-1`` driven by ``x`` with ``p`` zeros appended."""
    return reservoir_features(layer.weights, x * layer.input_gain, pad=p)[..., p:, :]


def _fit_time_layer(layer, inputs, targets, delay_grid, rel_tol, ridge):
    grid = _check_delay_grid(delay_grid)
    T = targets.shape[-2]
    w0 = layer.weights.spec.washout
    if w0 >= T:
        raise ConfigError(f"washout {w0} leaves no samples in a frame of length {T}")
    states = reservoir_features(layer.weights, inputs * layer.input_gain, pad=max(grid))
    tgt = _flat(targets[..., w0:, :])
    objs, sols = [], []
    for p in grid:
        S = _flat(states[..., p + w0 : p + T, :])
        if not np.any(S):
            warnings.warn(f"all reservoir states are zero at delay {p}", RuntimeWarning, stacklevel=3)
        W = least_squares(S, tgt, rel_tol, ridge)
        obj = _sq_norm(S @ W - tgt)
        if not np.isfinite(obj):
            raise NumericError(f"non-finite objective at delay {p}")
        objs.append(obj)
        sols.append(W)
    best = int(np.argmin(objs))
    log.debug("delay search: p*=%d obj=%.4g", grid[best], objs[best])
    return TimeReadout(sols[best], grid[best]), objs, grid


def _time_layer_output(layer, x):
    r = layer.readout
    return _aligned_states(layer, x, r.p_star) @ r.w_tout


def train_time_rc(train, spec=None, delay_grid=None, seed=None, *, weights=None,
                  rel_tol=DEFAULT_PINV_RTOL, ridge=0.0):
    """Fit a shallow time-domain RC.

    For every delay ``p`` in ``delay_grid`` the readout is the least-squares
    map from the states ``s(t + p)`` to the transmitted samples; the delay
    with the smallest squared error is kept.  Pass either ``spec`` + ``seed``
    or ready-made ``weights``.
    """
    if weights is None:
        weights = init_reservoir(spec or ReservoirSpec(), train.cfg.n_r, seed)
    if delay_grid is None:
        delay_grid = default_delay_grid(train.cfg.n_cp)
    layer = RcLayer(weights, None, unit_rms_gain(train.rx))
    layer.readout, objs, grid = _fit_time_layer(layer, train.rx, train.tx_time, delay_grid, rel_tol, ridge)
    diag = TrainDiagnostics(objective_trace=list(objs), p_stars=[layer.readout.p_star], final_objective=min(objs))
    return layer, diag


def _require(layer, kind):
    if layer is None or layer.readout is None:
        raise NotTrainedError("detector has no trained readout")
    if not isinstance(layer.readout, kind):
        raise ConfigError(f"expected a {kind.__name__}, got {type(layer.readout).__name__}")


def detect_time_rc(layer, frame, cfg, scheme=None):
    """Estimate the frequency grid of ``frame`` (``(T, n_r)`` or batched).

    Returns ``(grid, bits)``; ``bits`` is None when no scheme is given.
    """
    _require(layer, TimeReadout)
    y = _time_layer_output(layer, np.asarray(frame))
    grid = ofdm_demodulate(y, cfg)
    return grid, (qam_demodulate(grid, scheme) if scheme is not None else None)


# ---------------------------------------------------------- time-frequency RC


def tf_phase_update(zbar, z):
    """Unit-modulus weights maximizing ``Re(sum_q w * conj(z_q) * zbar_q)``.

    Reduces over axis 0 (the reference-symbol axis); remaining axes are kept,
    so ``(Q, n_sc, n_t)`` inputs give ``(n_sc, n_t)`` weights.  Entries whose
    inner product vanishes are set to 1.
    """
    zbar = np.asarray(zbar)
    z = np.asarray(z)
    if zbar.shape != z.shape:
        raise ShapeError(f"shape mismatch {zbar.shape} vs {z.shape}")
    c = np.sum(np.conj(z) * zbar, axis=0)
    w = np.exp(-1j * np.angle(c))
    w[np.abs(c) == 0] = 1.0
    return w


def tf_time_update(states, z_hat, s_pinv=None, rel_tol=DEFAULT_PINV_RTOL, ridge=0.0):
    """Least-squares time readout for phase-compensated frequency targets.

    ``states`` are CP-stripped states ``(Q, n_sc, n_neurons)`` and ``z_hat``
    the targets ``(Q, n_sc, n_t)``.  Because the DFT is invertible, the
    frequency-domain fit ``||FFT(S W) - Z_hat||`` is solved by fitting ``S W``
    to ``IFFT(Z_hat)``.
    """
    states = np.asarray(states)
    z_hat = np.asarray(z_hat)
    if states.ndim != 3 or z_hat.ndim != 3 or states.shape[:2] != z_hat.shape[:2]:
        raise ShapeError(f"incompatible shapes {states.shape} and {z_hat.shape}")
    target = _flat(ifft(z_hat, axis=-2))
    if s_pinv is not None:
        return s_pinv @ target
    return least_squares(_flat(states), target, rel_tol, ridge)


def tf_objective(states, w_tout, w_fout, z):
    """Frequency-domain fit ``sum |FFT(S W) * w_fout - Z|^2``."""
    return _sq_norm(fft(states @ w_tout, axis=-2) * w_fout - z)


def _fit_tf_layer(layer, inputs, targets_freq, cfg, max_iters, tol, rel_tol, ridge, delay_grid=(0,)):
    if max_iters < 1:
        raise ConfigError("max_als_iters must be >= 1")
    grid = _check_delay_grid(delay_grid)
    n_sc = cfg.n_sc
    if layer.weights.spec.washout > cfg.n_cp:
        # CP removal already discards the first n_cp states of every frame
        raise ConfigError("time-frequency layers support washout <= n_cp only")
    all_states = reservoir_features(layer.weights, inputs * layer.input_gain, pad=max(grid))
    w_fout = np.ones(targets_freq.shape[1:], dtype=complex)
    target_time = _flat(ifft(targets_freq, axis=-2))

    # with unit phases the first W update is a plain time-domain fit, which
    # selects the state delay before the alternation starts
    delay_objs = []
    best = None
    for p in grid:
        states = all_states[..., p + cfg.n_cp : p + cfg.n_cp + n_sc, :]
        s_flat = _flat(states)
        s_pinv = None if ridge > 0 else pseudo_inverse(s_flat, rel_tol)
        w_tout = s_pinv @ target_time if s_pinv is not None else least_squares(s_flat, target_time, rel_tol, ridge)
        obj = tf_objective(states, w_tout, w_fout, targets_freq)
        delay_objs.append(obj)
        if best is None or obj < best[0]:
            best = (obj, p, states, s_pinv, w_tout)
    first_obj, p_star, states, s_pinv, w_tout = best

    trace, half = [], []
    prev = None
    for it in range(max_iters):
        if it > 0:
            z_hat = targets_freq * np.conj(w_fout)
            w_tout = tf_time_update(states, z_hat, s_pinv, rel_tol, ridge)
            half.append(tf_objective(states, w_tout, w_fout, targets_freq))
        else:
            half.append(first_obj)
        zbar = fft(states @ w_tout, axis=-2)
        w_fout = tf_phase_update(zbar, targets_freq)
        obj = tf_objective(states, w_tout, w_fout, targets_freq)
        if not np.isfinite(obj):
            raise NumericError(f"non-finite ALS objective at iteration {it}")
        half.append(obj)
        trace.append(obj)
        if prev is not None and prev > 0 and (prev - obj) / prev < tol:
            break
        prev = obj
    return TfReadout(w_tout, w_fout, p_star), trace, half, delay_objs


def _tf_layer_output(layer, x, cfg):
    r = layer.readout
    states = _aligned_states(layer, x, r.p_star)[..., cfg.n_cp :, :]
    return fft(states @ r.w_tout, axis=-2) * r.w_fout


def train_tf_rc(train, spec=None, max_als_iters=5, tol=1e-8, seed=None, *, weights=None,
                delay_grid=(0,), rel_tol=DEFAULT_PINV_RTOL, ridge=0.0):
    """Fit a time-frequency RC by alternating least squares.

    ``w_fout`` starts at all ones; each iteration solves the time readout in
    closed form, then sets every ``w_fout`` entry to the phase that best
    aligns the FFT output with the reference symbols.  Stops after
    ``max_als_iters`` or once the relative objective decrease drops below
    ``tol``.  When ``delay_grid`` has several entries, the state delay with
    the best unit-phase fit is used for the alternation.
    """
    if weights is None:
        weights = init_reservoir(spec or ReservoirSpec(), train.cfg.n_r, seed)
    layer = RcLayer(weights, None, unit_rms_gain(train.rx))
    layer.readout, trace, half, delay_objs = _fit_tf_layer(
        layer, train.rx, train.tx_freq, train.cfg, max_als_iters, tol, rel_tol, ridge, delay_grid
    )
    diag = TrainDiagnostics(objective_trace=trace, half_step_trace=half, delay_objectives=delay_objs,
                            p_stars=[layer.readout.p_star], final_objective=trace[-1])
    return layer, diag


def detect_tf_rc(layer, frame, cfg, scheme=None):
    """Reservoir, time readout, CP removal, FFT, per-subcarrier phase; returns ``(grid, bits)``."""
    _require(layer, TfReadout)
    grid = _tf_layer_output(layer, np.asarray(frame), cfg)
    return grid, (qam_demodulate(grid, scheme) if scheme is not None else None)


# ------------------------------------------------------------------ RCNet


def _layer_specs(per_layer_spec, L):
    if L < 1:
        raise ConfigError("RCNet needs at least one layer")
    if per_layer_spec is None:
        return [ReservoirSpec()] * L
    if isinstance(per_layer_spec, ReservoirSpec):
        return [per_layer_spec] * L
    specs = list(per_layer_spec)
    if len(specs) != L:
        raise ConfigError(f"{len(specs)} layer specs given for L={L}")
    return specs


def _layer_seeds(seeds, L):
    if seeds is None or np.isscalar(seeds):
        return [layer_seed(seeds, l) for l in range(L)]
    seeds = list(seeds)
    if len(seeds) != L:
        raise ConfigError(f"{len(seeds)} seeds given for L={L}")
    return seeds


def train_rcnet_deep_time(train, L=3, per_layer_spec=None, delay_grid=None, seeds=None, *,
                          rel_tol=DEFAULT_PINV_RTOL, ridge=0.0):
    """Stack ``L`` time RCs; layer ``l`` is driven by layer ``l-1``'s trained output.

    Every layer regresses onto the same transmitted time-domain frames.
    """
    specs = _layer_specs(per_layer_spec, L)
    seeds = _layer_seeds(seeds, L)
    if delay_grid is None:
        delay_grid = default_delay_grid(train.cfg.n_cp, 5)
    x = train.rx
    layers, diag = [], TrainDiagnostics()
    for l in range(L):
        layer = RcLayer(init_reservoir(specs[l], x.shape[-1], seeds[l]), None, unit_rms_gain(x))
        layer.readout, objs, grid = _fit_time_layer(layer, x, train.tx_time, delay_grid, rel_tol, ridge)
        layers.append(layer)
        diag.layer_traces.append(list(objs))
        diag.objective_trace.extend(objs)
        diag.p_stars.append(layer.readout.p_star)
        diag.final_objective = min(objs)
        x = _time_layer_output(layer, x)
    return RcnetModel("deep-time", layers), diag


def train_rcnet_deep_tf(train, L=3, per_layer_spec=None, als_iters=5, seeds=None, *, tol=0.0,
                        delay_grid=(0,), rel_tol=DEFAULT_PINV_RTOL, ridge=0.0):
    """Stack ``L`` time-frequency RCs.

    Between layers the frequency-domain output is brought back to the time
    domain by an IFFT and cyclically extended with a fresh prefix, giving a
    full ``n_cp + n_sc`` frame for the next reservoir.
    """
    specs = _layer_specs(per_layer_spec, L)
    seeds = _layer_seeds(seeds, L)
    cfg = train.cfg
    x = train.rx
    layers, diag = [], TrainDiagnostics()
    for l in range(L):
        layer = RcLayer(init_reservoir(specs[l], x.shape[-1], seeds[l]), None, unit_rms_gain(x))
        layer.readout, trace, half, delay_objs = _fit_tf_layer(
            layer, x, train.tx_freq, cfg, als_iters, tol, rel_tol, ridge, delay_grid
        )
        layers.append(layer)
        diag.layer_traces.append(list(trace))
        diag.objective_trace.extend(trace)
        diag.half_step_trace.extend(half)
        diag.delay_objectives.extend(delay_objs)
        diag.p_stars.append(layer.readout.p_star)
        diag.final_objective = trace[-1]
        x = _tf_to_time(_tf_layer_output(layer, x, cfg), cfg)
    return RcnetModel("deep-tf", layers), diag


def _tf_to_time(grid, cfg):
    return add_cyclic_prefix(ifft(grid, axis=-2), cfg.n_cp)


def rcnet_forward(model, frame, cfg):
    """Frequency-grid estimate produced by the last layer of ``model``."""
    if not model.layers or any(l.readout is None for l in model.layers):
        raise NotTrainedError("RCNet model has untrained layers")
    x = np.asarray(frame)
    if model.kind == "deep-time":
        for layer in model.layers:
            x = _time_layer_output(layer, x)
        return ofdm_demodulate(x, cfg)
    grid = None
    for i, layer in enumerate(model.layers):
        grid = _tf_layer_output(layer, x, cfg)
        if i + 1 < len(model.layers):
            x = _tf_to_time(grid, cfg)
    return grid


def rcnet_detect(model, frame, cfg, scheme=None):
    """Run all layers in training order; returns ``(grid, bits)``."""
    grid = rcnet_forward(model, frame, cfg)
    return grid, (qam_demodulate(grid, scheme) if scheme is not None else None)
