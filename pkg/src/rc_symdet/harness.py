"""Monte-Carlo experiment orchestration.

One *trial* is one subframe: ``q`` reference symbols followed by ``n_d``
data symbols sent through PA -> channel -> noise -> ADC.  Every enabled
detector is trained on the reference symbols only and scored on the data
symbols.  A *sweep* repeats the trials at each value of one swept
parameter and sums bit errors.

Randomness is derived from ``(master_seed, trial_index, component)`` so a
trial's channel, data, noise and reservoirs do not depend on the sweep
point or on how trials are spread over workers.
"""

import csv
import dataclasses
import json
import logging
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import lmmse_channel_estimate, lmmse_equalize, orthogonal_pilots, sphere_detect_grid
from .detectors import (
    TrainingSet,
    default_delay_grid,
    detect_tf_rc,
    detect_time_rc,
    rcnet_detect,
    train_rcnet_deep_tf,
    train_rcnet_deep_time,
    train_tf_rc,
    train_time_rc,
)
from .errors import ConfigError
from .impairments import (
    AdcConfig,
    ChannelProfile,
    adc,
    apply_channel,
    awgn,
    generate_channel,
    noise_variance,
    power_amplifier,
    PaConfig,
)
from .ofdm import SubframeConfig, get_scheme, ofdm_demodulate, ofdm_modulate, qam_demodulate, qam_modulate
from .reservoir import ReservoirSpec

log = logging.getLogger(__name__)

__all__ = [
    "DETECTORS",
    "SWEEP_VARIABLES",
    "RcConfig",
    "ExperimentConfig",
    "BerRecord",
    "RunManifest",
    "Subframe",
    "desk_profile",
    "paper_profile",
    "config_to_dict",
    "config_from_dict",
    "load_config",
    "derive_seed",
    "snr_from_ebn0",
    "point_config",
    "simulate_subframe",
    "run_trial",
    "run_sweep",
    "emit_report",
    "read_ber_csv",
]

DETECTORS = ("time-rc", "tf-rc", "rcnet-time", "rcnet-tf", "lmmse", "sphere")
SWEEP_VARIABLES = ("snr_db", "ibo_db", "adc_bits", "n_layers")

# component ids for seed derivation
_DATA, _PILOT, _CHANNEL, _NOISE, _RESERVOIR = range(5)
_COMPONENTS = {"data": _DATA, "pilot": _PILOT, "channel": _CHANNEL, "noise": _NOISE, "reservoir": _RESERVOIR}


@dataclass(frozen=True)
class RcConfig:
    """Reservoir detector settings shared by all four RC detectors.

    Delay grids are given as point counts spread uniformly over
    ``[0, n_cp]`` and rounded to integers: ``shallow_delay_points`` for the
    shallow time RC, ``deep_delay_points`` for every RCNet time layer and
    ``tf_delay_points`` for the state delay of every time-frequency layer.
    """

    reservoir: ReservoirSpec = ReservoirSpec()
    n_layers: int = 3
    shallow_delay_points: int = 50
    deep_delay_points: int = 5
    tf_delay_points: int = 5
    shallow_als_iters: int = 5
    deep_als_iters: int = 5
    als_tol: float = 1e-8
    ridge: float = 0.0
    pinv_rtol: float = 1e-10

    def __post_init__(self):
        if self.n_layers < 1:
            raise ConfigError("n_layers must be >= 1")
        if min(self.shallow_delay_points, self.deep_delay_points, self.tf_delay_points) < 1:
            raise ConfigError("delay grids must be non-empty")
        if self.shallow_als_iters < 1 or self.deep_als_iters < 1:
            raise ConfigError("ALS iteration counts must be >= 1")
        if self.ridge < 0:
            raise ConfigError("ridge must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    subframe: SubframeConfig = SubframeConfig()
    modulation: str = "16qam"
    pa: PaConfig = PaConfig()
    adc: AdcConfig = AdcConfig()
    channel: ChannelProfile = ChannelProfile()
    snr_db: float = 15.0
    sweep_variable: str = "snr_db"
    sweep_values: tuple | None = None  # None: a single point at the base value
    detectors: tuple = DETECTORS
    rc: RcConfig = RcConfig()
    trials: int = 50
    master_seed: int = 0
    profile: str = "desk"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.sweep_values is not None and not len(self.sweep_values):
            raise ConfigError("sweep must contain at least one point")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep_variable must be one of {SWEEP_VARIABLES}")
        if not self.detectors:
            raise ConfigError("enable at least one detector")
        unknown = set(self.detectors) - set(DETECTORS)
        if unknown:
            raise ConfigError(f"unknown detectors: {sorted(unknown)}")
        get_scheme(self.modulation)
        if self.channel.n_taps > self.subframe.n_cp:
            raise ConfigError(f"channel has {self.channel.n_taps} taps but the CP is only {self.subframe.n_cp}")
        if self.channel.kind == "identity" and self.subframe.n_r != self.subframe.n_t:
            raise ConfigError("identity channel needs n_r == n_t")
        if set(self.detectors) & {"lmmse", "sphere"} and self.subframe.q < self.subframe.n_t:
            raise ConfigError("model-based baselines need q >= n_t reference symbols")
        if "sphere" in self.detectors and self.subframe.n_r < self.subframe.n_t:
            raise ConfigError("sphere decoding needs n_r >= n_t")

    @property
    def scheme(self):
        return get_scheme(self.modulation)

    @property
    def points(self):
        """Sweep points; the base value of the swept parameter when unset."""
        if self.sweep_values is not None:
            return tuple(self.sweep_values)
        base = {
            "snr_db": self.snr_db,
            "ibo_db": self.pa.input_backoff_db,
            "adc_bits": self.adc.bits,
            "n_layers": self.rc.n_layers,
        }[self.sweep_variable]
        if base is None:
            raise ConfigError("the PA is bypassed; give sweep_values to sweep ibo_db")
        return (base,)


def desk_profile(**overrides):
    """Small configuration that keeps the structural ratios of the full setup."""
    base = ExperimentConfig(
        subframe=SubframeConfig(n_sc=64, n_cp=16, q=4, n_d=13, n_t=2, n_r=2),
        rc=RcConfig(reservoir=ReservoirSpec(n_neurons=64, window_len=16, input_scale=0.02)),
        trials=50,
        profile="desk",
    )
    return replace(base, **overrides)


def paper_profile(**overrides):
    """4x4, 1024 subcarriers, 128 neurons, window 128 (slow)."""
    base = ExperimentConfig(
        subframe=SubframeConfig(n_sc=1024, n_cp=160, q=4, n_d=13, n_t=4, n_r=4),
        channel=ChannelProfile(n_taps=16, decay_db_per_tap=1.0),
        rc=RcConfig(reservoir=ReservoirSpec(n_neurons=128, window_len=128)),
        trials=100,
        profile="paper",
    )
    return replace(base, **overrides)


PROFILES = {"desk": desk_profile, "paper": paper_profile}

_NESTED = {
    "subframe": SubframeConfig,
    "pa": PaConfig,
    "adc": AdcConfig,
    "channel": ChannelProfile,
    "rc": RcConfig,
}


def config_to_dict(cfg):
    d = dataclasses.asdict(cfg)
    d["sweep_values"] = None if cfg.sweep_values is None else list(cfg.sweep_values)
    d["detectors"] = list(cfg.detectors)
    return d


def config_from_dict(d, base=None):
    """Build a config from a (possibly partial) JSON-style dict.

    Missing fields fall back to ``base`` (default: the profile named by
    ``d["profile"]``, else desk).
    """
    d = dict(d)
    if base is None:
        base = PROFILES[d.get("profile", "desk")]()
    unknown = set(d) - {f.name for f in dataclasses.fields(ExperimentConfig)}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    for key, value in d.items():
        if key in _NESTED:
            current = getattr(base, key)
            sub = dict(value)
            if key == "rc" and "reservoir" in sub:
                sub["reservoir"] = _merge(current.reservoir, sub["reservoir"])
            kw[key] = _merge(current, sub)
        elif key in ("sweep_values", "detectors"):
            kw[key] = None if value is None else tuple(value)
        elif key == "snr_db":
            kw[key] = float(value)  # also accepts "inf"
        else:
            kw[key] = value
    return replace(base, **kw)


def _merge(current, values):
    if isinstance(values, type(current)):
        return values
    names = {f.name for f in dataclasses.fields(current)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {type(current).__name__} keys: {sorted(unknown)}")
    return replace(current, **values)


def load_config(path, profile=None):
    with open(path) as fh:
        d = json.load(fh)
    if profile is not None:
        d["profile"] = profile
    return config_from_dict(d)


def derive_seed(master_seed, trial_index, component):
    """Independent 32-bit seed per ``(trial, component)``."""
    if isinstance(component, str):
        component = _COMPONENTS[component]
    ss = np.random.SeedSequence([int(master_seed), int(trial_index), int(component)])
    return int(ss.generate_state(1)[0])


def snr_from_ebn0(ebn0_db, bits_per_symbol):
    return ebn0_db + 10.0 * np.log10(bits_per_symbol)


def point_config(cfg, value):
    """Config with the swept parameter set to ``value``."""
    var = cfg.sweep_variable
    if var == "snr_db":
        return replace(cfg, snr_db=float(value))
    if var == "ibo_db":
        ibo = None if value is None else float(value)
        return replace(cfg, pa=replace(cfg.pa, input_backoff_db=ibo))
    if var == "adc_bits":
        return replace(cfg, adc=replace(cfg.adc, bits=int(value), enabled=True))
    if var == "n_layers":
        return replace(cfg, rc=replace(cfg.rc, n_layers=int(value)))
    raise ConfigError(f"cannot sweep {var!r}")


@dataclass
class Subframe:
    grids: np.ndarray  # (q + n_d, n_sc, n_t) transmitted symbols
    rx: np.ndarray  # (q + n_d, frame_len, n_r) received frames
    noise_var: float  # per time-domain sample
    channel: object
    data_bits: np.ndarray  # bits carried by the n_d data symbols


def simulate_subframe(cfg, trial_index):
    """Draw and transmit one subframe for ``cfg`` (already at its sweep point)."""
    sf = cfg.subframe
    scheme = cfg.scheme
    seed = lambda comp: derive_seed(cfg.master_seed, trial_index, comp)

    pilots = orthogonal_pilots(sf.q, sf.n_sc, sf.n_t, seed(_PILOT))
    rng = np.random.default_rng(seed(_DATA))
    data_bits = rng.integers(0, 2, size=sf.n_d * sf.n_sc * sf.n_t * scheme.bits_per_symbol, dtype=np.int8)
    data = qam_modulate(data_bits, scheme).reshape(sf.n_d, sf.n_sc, sf.n_t)
    grids = np.concatenate([pilots, data], axis=0)

    tx = power_amplifier(ofdm_modulate(grids, sf), cfg.pa)
    channel = generate_channel(cfg.channel, sf.n_r, sf.n_t, seed(_CHANNEL), n_cp=sf.n_cp)
    clean = apply_channel(tx, channel)
    nv = noise_variance(clean, cfg.snr_db)
    rx = adc(awgn(clean, cfg.snr_db, seed(_NOISE), noise_var=nv), cfg.adc)
    return Subframe(grids, rx, nv, channel, data_bits)


def _run_detector(name, cfg, train, test_rx, est_inputs, trial_index):
    """Returns ``(bits, diagnostics or None)`` for one detector."""
    sf = cfg.subframe
    rc = cfg.rc
    scheme = cfg.scheme
    rseed = derive_seed(cfg.master_seed, trial_index, _RESERVOIR)
    common = dict(rel_tol=rc.pinv_rtol, ridge=rc.ridge)
    if name == "time-rc":
        grid = default_delay_grid(sf.n_cp, rc.shallow_delay_points)
        layer, diag = train_time_rc(train, rc.reservoir, grid, rseed, **common)
        return detect_time_rc(layer, test_rx, sf, scheme)[1], diag
    tf_grid = default_delay_grid(sf.n_cp, rc.tf_delay_points)
    if name == "tf-rc":
        layer, diag = train_tf_rc(train, rc.reservoir, rc.shallow_als_iters, rc.als_tol, rseed,
                                  delay_grid=tf_grid, **common)
        return detect_tf_rc(layer, test_rx, sf, scheme)[1], diag
    if name == "rcnet-time":
        grid = default_delay_grid(sf.n_cp, rc.deep_delay_points)
        model, diag = train_rcnet_deep_time(train, rc.n_layers, rc.reservoir, grid, rseed, **common)
        return rcnet_detect(model, test_rx, sf, scheme)[1], diag
    if name == "rcnet-tf":
        model, diag = train_rcnet_deep_tf(
            train, rc.n_layers, rc.reservoir, rc.deep_als_iters, rseed, tol=rc.als_tol,
            delay_grid=tf_grid, **common
        )
        return rcnet_detect(model, test_rx, sf, scheme)[1], diag
    est, rx_grid = est_inputs
    if name == "lmmse":
        return qam_demodulate(lmmse_equalize(est, rx_grid), scheme), None
    if name == "sphere":
        return qam_demodulate(sphere_detect_grid(est, rx_grid, scheme.constellation), scheme), None
    raise ConfigError(f"unknown detector {name!r}")


def run_trial(cfg, sweep_value, trial_index, keep_traces=False, with_channel=False):
    """Simulate one subframe at ``sweep_value`` and score every detector.

    Returns ``{detector: {"bit_errors", "total_bits", "objective", "trace"}}``,
    plus the channel realization as a dict when ``with_channel`` is set.
    """
    pcfg = point_config(cfg, sweep_value)
    sf = pcfg.subframe
    frame = simulate_subframe(pcfg, trial_index)
    train = TrainingSet.from_grids(frame.rx[: sf.q], frame.grids[: sf.q], sf)
    test_rx = frame.rx[sf.q :]

    est_inputs = None
    if set(pcfg.detectors) & {"lmmse", "sphere"}:
        rx_grid = ofdm_demodulate(frame.rx, sf)
        # the frequency-domain noise variance grows by n_sc under the unnormalized FFT
        est = lmmse_channel_estimate(rx_grid[: sf.q], frame.grids[: sf.q], frame.noise_var * sf.n_sc)
        est_inputs = (est, rx_grid[sf.q :])

    out = {}
    for name in pcfg.detectors:
        bits, diag = _run_detector(name, pcfg, train, test_rx, est_inputs, trial_index)
        errors = int(np.count_nonzero(bits != frame.data_bits))
        rec = {"bit_errors": errors, "total_bits": int(frame.data_bits.size)}
        if diag is not None:
            rec["objective"] = float(diag.final_objective)
            if keep_traces:
                rec["trace"] = [float(v) for v in diag.objective_trace]
        out[name] = rec
    if with_channel:
        return out, frame.channel.to_dict()
    return out


@dataclass
class BerRecord:
    detector: str
    sweep_variable: str
    sweep_value: float
    trials: int
    bit_errors: int
    total_bits: int

    @property
    def ber(self):
        return self.bit_errors / self.total_bits if self.total_bits else 0.0


@dataclass
class RunManifest:
    config: dict
    master_seed: int
    trial_seeds: list
    software_version: str
    diagnostics: dict
    overhead: float
    wall_clock_s: float = 0.0
    partial: bool = False
    failures: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    channels: list = field(default_factory=list)  # per-trial taps, for replay

    def to_dict(self):
        return dataclasses.asdict(self)


def _trial_task(args):
    cfg, value, trial = args
    return run_trial(cfg, value, trial, keep_traces=(trial == 0), with_channel=True)


def run_sweep(cfg, workers=1):
    """Run every trial at every sweep point; returns ``(records, manifest, traces)``.

    ``traces`` maps detector id to the objective trace of trial 0 at the
    first sweep point.  Results are summed in a fixed order, so the table
    does not depend on ``workers``.  A failing trial marks the manifest as
    partial and is listed in ``failures``; its point's records count only
    the trials that finished.
    """
    t0 = time.perf_counter()
    tasks = [(cfg, v, k) for v in cfg.points for k in range(cfg.trials)]
    results = [None] * len(tasks)
    failures = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_trial_task, t) for t in tasks]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported in manifest
                    failures.append({"sweep_value": tasks[i][1], "trial": tasks[i][2], "error": repr(exc)})
    else:
        for i, t in enumerate(tasks):
            try:
                results[i] = _trial_task(t)
            except Exception as exc:  # noqa: BLE001
                failures.append({"sweep_value": t[1], "trial": t[2], "error": repr(exc)})
    if failures:
        log.error("%d trial(s) failed; results are partial", len(failures))

    channels = {}
    for (c, val, k), res in zip(tasks, results):
        if res is not None:
            channels.setdefault(k, res[1])
    results = [None if res is None else res[0] for res in results]

    records = []
    diagnostics = {}
    traces = {}
    for v in cfg.points:
        for det in cfg.detectors:
            errs = bits = n = 0
            objs = []
            for (c, val, k), res in zip(tasks, results):
                if val != v or res is None:
                    continue
                r = res[det]
                errs += r["bit_errors"]
                bits += r["total_bits"]
                n += 1
                if "objective" in r:
                    objs.append(r["objective"])
                if "trace" in r and det not in traces:
                    traces[det] = r["trace"]
            records.append(BerRecord(det, cfg.sweep_variable, float(v), n, errs, bits))
            if objs:
                diagnostics.setdefault(det, {})[str(v)] = {
                    "mean_final_objective": float(np.mean(objs)),
                    "min_final_objective": float(np.min(objs)),
                    "max_final_objective": float(np.max(objs)),
                }

    sf = cfg.subframe
    manifest = RunManifest(
        config=config_to_dict(cfg),
        master_seed=cfg.master_seed,
        trial_seeds=[
            {"trial": k, **{c: derive_seed(cfg.master_seed, k, i) for c, i in _COMPONENTS.items()}}
            for k in range(cfg.trials)
        ],
        software_version=__version__,
        diagnostics=diagnostics,
        overhead=sf.overhead,
        wall_clock_s=time.perf_counter() - t0,
        partial=bool(failures),
        failures=failures,
        notes={
            "overhead_percent": round(100 * sf.overhead, 1),
            "channel_redraw": "independent channel realization per trial (subframe)",
            "snr_definition": "mean received signal power / noise power per sample, before the ADC",
            "ebn0_mapping_db": f"snr_db = ebn0_db + 10*log10({cfg.scheme.bits_per_symbol})",
            "adc_clip_policy": (
                f"a_max = {cfg.adc.a_max}" if cfg.adc.a_max is not None
                else f"a_max = {cfg.adc.clip_rms_factor} x per-antenna RMS of one real component"
            ),
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        channels=[{"trial": k, **channels[k]} for k in sorted(channels)],
    )
    return records, manifest, traces


BER_COLUMNS = ("detector", "sweep_variable", "sweep_value", "trials", "bit_errors", "total_bits", "ber")


def emit_report(records, manifest, out_dir, traces=None, gnuplot=False):
    """Write ``ber.csv``, ``manifest.json`` and ``learning_curve_<id>.csv`` files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with open(out / "ber.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BER_COLUMNS)
        for r in records:
            w.writerow([r.detector, r.sweep_variable, repr(float(r.sweep_value)), r.trials,
                        r.bit_errors, r.total_bits, repr(r.ber)])
    written.append(out / "ber.csv")
    with open(out / "manifest.json", "w") as fh:
        json.dump(_strict(manifest.to_dict()), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    written.append(out / "manifest.json")
    for det, trace in (traces or {}).items():
        path = out / f"learning_curve_{det}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("iteration", "objective"))
            for i, v in enumerate(trace):
                w.writerow((i, repr(float(v))))
        written.append(path)
    if gnuplot:
        for det in sorted({r.detector for r in records}):
            path = out / f"ber_{det}.dat"
            with open(path, "w") as fh:
                fh.write(f"# {records[0].sweep_variable} ber\n")
                for r in records:
                    if r.detector == det:
                        fh.write(f"{r.sweep_value:g} {r.ber:.6e}\n")
            written.append(path)
    return written


def read_ber_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        BerRecord(r["detector"], r["sweep_variable"], float(r["sweep_value"]), int(r["trials"]),
                  int(r["bit_errors"]), int(r["total_bits"]))
        for r in rows
    ]


def _strict(o):
    """JSON-safe copy: numpy scalars/arrays unwrapped, non-finite floats as strings."""
    if isinstance(o, dict):
        return {str(k): _strict(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_strict(v) for v in o]
    if isinstance(o, np.ndarray):
        return _strict(o.tolist())
    if isinstance(o, np.generic):
        o = o.item()
    if isinstance(o, float) and not np.isfinite(o):
        return str(o)
    return o
