"""Acceptance suite.

Every test records a one-line verdict in ``conftest.ACCEPTANCE``; the lines
are printed in the terminal summary.  Two trend criteria do not hold at the
small default scale and are marked as strict expected failures: they run in
full, report FAIL with the measured numbers, and turn the suite red if they
ever start passing so the marker can be removed.
"""

import math
import time

import numpy as np
import pytest

import conftest
from conftest import crandn
from oracles import brute_force_min, normal_equations_lmmse
from rc_symdet.baselines import FrequencyChannelEstimate, lmmse_equalize, sphere_decode
from rc_symdet.detectors import (
    TrainingSet,
    _aligned_states,
    _tf_to_time,
    _tf_layer_output,
    _time_layer_output,
    default_delay_grid,
    detect_tf_rc,
    detect_time_rc,
    rcnet_detect,
    train_rcnet_deep_tf,
    train_rcnet_deep_time,
    train_tf_rc,
    train_time_rc,
)
from rc_symdet.harness import desk_profile, derive_seed, emit_report, run_sweep, simulate_subframe, snr_from_ebn0
from rc_symdet.impairments import AdcConfig, ChannelProfile, PaConfig
from rc_symdet.numerics import ifft
from rc_symdet.ofdm import QAM16, QPSK
from rc_symdet.reservoir import ReservoirSpec, init_reservoir, run_reservoir

DESK = desk_profile()
SPEC = DESK.rc.reservoir


def record(cid, title, ok, detail):
    conftest.ACCEPTANCE[cid] = (title, bool(ok), detail)
    assert ok, detail


def training_set(seed, condition=None, snr_db=15.0):
    """Desk-scale reference symbols; ``condition`` cycles linear / PA at 3 dB IBO / 1-bit ADC."""
    kw = {}
    if condition == 1:
        kw["pa"] = PaConfig(input_backoff_db=3.0)
    elif condition == 2:
        kw["adc"] = AdcConfig(bits=1, enabled=True)
        kw["modulation"] = "qpsk"
    cfg = desk_profile(snr_db=snr_db, master_seed=seed, **kw)
    frame = simulate_subframe(cfg, 0)
    sf = cfg.subframe
    train = TrainingSet.from_grids(frame.rx[: sf.q], frame.grids[: sf.q], sf)
    return train, frame.rx[sf.q :], derive_seed(seed, 0, "reservoir")


def flat(a):
    return a.reshape(-1, a.shape[-1])


def normal_residual(S, W, T):
    Sh = S.conj().T
    return np.linalg.norm(Sh @ (S @ W - T)) / np.linalg.norm(Sh @ T)


def test_01_als_monotone():
    t0 = time.perf_counter()
    worst = -math.inf
    for s in range(100):
        train, _, rseed = training_set(s, s % 3)
        _, diag = train_tf_rc(train, SPEC, 20, tol=0.0, seed=rseed)
        h = np.array(diag.half_step_trace)
        assert len(diag.objective_trace) == 20
        worst = max(worst, float(np.max(np.diff(h) / h[:-1])))
    dt = time.perf_counter() - t0
    record(1, "ALS monotone over 100 training sets x 20 iterations", worst <= 1e-9 and dt < 60,
           f"largest relative increase {worst:.2e} (limit 1e-9), {dt:.1f} s")


def test_02_sphere_decoder_exact():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    mismatches = 0
    for i in range(1000):
        n_t = 2 + i % 2
        scheme = (QPSK, QAM16)[(i // 2) % 2]
        H = crandn(rng, n_t, n_t)
        z = scheme.constellation[rng.integers(0, scheme.order, n_t)]
        y = H @ z + rng.uniform(0.05, 1.5) * crandn(rng, n_t)
        got, metric = sphere_decode(H, y, scheme.constellation)
        best, best_z = brute_force_min(H, y, scheme.constellation)
        same_point = np.array_equal(got, best_z)
        same_metric = metric == float(np.sum(np.abs(y - H @ best_z) ** 2))
        same_oracle = np.linalg.norm(y - H @ got) ** 2 == best
        mismatches += not (same_point and same_metric and same_oracle)
    dt = time.perf_counter() - t0
    record(2, "sphere decoder equals brute-force ML on 1000 instances", mismatches == 0 and dt < 60,
           f"{mismatches} mismatches, {dt:.1f} s")


def test_03_lmmse_matches_normal_equations():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    H = crandn(rng, 1000, 4, 4)
    y = crandn(rng, 1000, 4)
    nv = rng.uniform(0.01, 1.0, 1000)
    worst = 0.0
    for i in range(1000):
        got = lmmse_equalize(FrequencyChannelEstimate(H[i : i + 1], nv[i]), y[i : i + 1])[0]
        want = normal_equations_lmmse(H[i], y[i], nv[i])
        worst = max(worst, float(np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want)))))
    dt = time.perf_counter() - t0
    record(3, "LMMSE equalizer vs normal-equations oracle, 1000 4x4 cases", worst < 1e-10 and dt < 10,
           f"max deviation {worst:.1e} (limit 1e-10), {dt:.1f} s")


def _tf_residual(layer, x, train, iters, rseed_weights):
    """Residual of the final time readout against the phases it was fitted to.

    The last time update uses the phases left by iteration ``iters - 1``, so
    the layer is retrained from the same weights for one iteration fewer.
    """
    cfg = train.cfg
    sub = TrainingSet(x, train.tx_time, train.tx_freq, cfg)
    again, _ = train_tf_rc(sub, weights=rseed_weights, max_als_iters=iters, tol=0.0,
                           delay_grid=default_delay_grid(cfg.n_cp, 5))
    np.testing.assert_array_equal(again.readout.w_tout, layer.readout.w_tout)
    if iters > 1:
        prev, _ = train_tf_rc(sub, weights=rseed_weights, max_als_iters=iters - 1, tol=0.0,
                              delay_grid=default_delay_grid(cfg.n_cp, 5))
        phases = prev.readout.w_fout
    else:
        phases = np.ones_like(layer.readout.w_fout)
    S = flat(_aligned_states(layer, x, layer.readout.p_star)[:, cfg.n_cp :])
    T = flat(ifft(train.tx_freq * np.conj(phases), axis=-2))
    return normal_residual(S, layer.readout.w_tout, T)


def test_04_readouts_solve_normal_equations():
    worst = 0.0
    count = 0
    grid5 = default_delay_grid(16, 5)
    for s in range(9):
        train, _, rseed = training_set(100 + s, s % 3)
        layer, _ = train_time_rc(train, SPEC, default_delay_grid(16, 50), rseed)
        S = flat(_aligned_states(layer, train.rx, layer.readout.p_star))
        worst = max(worst, normal_residual(S, layer.readout.w_tout, flat(train.tx_time)))
        count += 1

        model, _ = train_rcnet_deep_time(train, 3, SPEC, grid5, rseed)
        x = train.rx
        for lay in model.layers:
            S = flat(_aligned_states(lay, x, lay.readout.p_star))
            worst = max(worst, normal_residual(S, lay.readout.w_tout, flat(train.tx_time)))
            x = _time_layer_output(lay, x)
            count += 1

        iters = 1 + s % 5
        layer, _ = train_tf_rc(train, SPEC, iters, tol=0.0, seed=rseed, delay_grid=grid5)
        worst = max(worst, _tf_residual(layer, train.rx, train, iters, layer.weights))
        count += 1

        model, _ = train_rcnet_deep_tf(train, 3, SPEC, iters, rseed, tol=0.0, delay_grid=grid5)
        x = train.rx
        for lay in model.layers:
            worst = max(worst, _tf_residual(lay, x, train, iters, lay.weights))
            x = _tf_to_time(_tf_layer_output(lay, x, train.cfg), train.cfg)
            count += 1
    record(4, "trained readouts satisfy the normal equations", worst < 1e-6,
           f"{count} readouts, max relative residual {worst:.1e} (limit 1e-6)")


def test_05_echo_state_washout():
    spec = ReservoirSpec(n_neurons=SPEC.n_neurons, window_len=SPEC.window_len, spectral_radius=0.9)
    steps = []
    for s in range(20):
        rng = np.random.default_rng(s)
        w = init_reservoir(spec, 2, seed=s)
        x = crandn(rng, 200, 2)
        a = run_reservoir(w, x, initial_state=crandn(rng, spec.n_neurons))
        b = run_reservoir(w, x, initial_state=crandn(rng, spec.n_neurons))
        d = np.max(np.abs(a - b), axis=1)
        below = np.flatnonzero(d < 1e-6)
        steps.append(int(below[0]) if below.size else math.inf)
    record(5, "echo-state washout at spectral radius 0.9, 20 seeds", max(steps) <= 200,
           f"states agree to 1e-6 after at most {max(steps)} steps (limit 200)")


def test_06_unit_modulus():
    worst = 0.0
    grid5 = default_delay_grid(16, 5)
    for s in range(20):
        train, _, rseed = training_set(200 + s, s % 3)
        layer, _ = train_tf_rc(train, SPEC, 5, seed=rseed, delay_grid=grid5)
        worst = max(worst, float(np.max(np.abs(np.abs(layer.readout.w_fout) - 1))))
        model, _ = train_rcnet_deep_tf(train, 3, SPEC, 5, rseed, delay_grid=grid5)
        for lay in model.layers:
            worst = max(worst, float(np.max(np.abs(np.abs(lay.readout.w_fout) - 1))))
    record(6, "frequency weights have unit modulus", worst < 1e-12,
           f"max ||w|-1| = {worst:.1e} over 80 trained layers (limit 1e-12)")


def test_07_depth_one_is_shallow():
    mismatches = 0
    grid = default_delay_grid(16, 5)
    for s in range(6):
        train, test_rx, rseed = training_set(300 + s, s % 3)
        cfg = train.cfg
        shallow, _ = train_time_rc(train, SPEC, grid, rseed)
        deep, _ = train_rcnet_deep_time(train, 1, SPEC, grid, rseed)
        a, b = detect_time_rc(shallow, test_rx, cfg, QPSK), rcnet_detect(deep, test_rx, cfg, QPSK)
        mismatches += not (np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]))

        shallow, _ = train_tf_rc(train, SPEC, 5, tol=1e-8, seed=rseed, delay_grid=grid)
        deep, _ = train_rcnet_deep_tf(train, 1, SPEC, 5, rseed, tol=1e-8, delay_grid=grid)
        a, b = detect_tf_rc(shallow, test_rx, cfg, QPSK), rcnet_detect(deep, test_rx, cfg, QPSK)
        mismatches += not (np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]))
    record(7, "RCNet with one layer reproduces the shallow detectors", mismatches == 0,
           f"{mismatches} of 12 comparisons differ")


def test_08_depth_lowers_objective():
    t0 = time.perf_counter()
    rc = DESK.rc
    snr = snr_from_ebn0(15.0, QAM16.bits_per_symbol)
    wins_time = wins_tf = 0
    for s in range(20):
        train, _, rseed = training_set(400 + s, None, snr_db=snr)
        _, shallow = train_time_rc(train, SPEC, default_delay_grid(16, 50), rseed)
        _, deep = train_rcnet_deep_time(train, 10, SPEC, default_delay_grid(16, 5), rseed)
        wins_time += deep.final_objective <= shallow.final_objective
        tf_grid = default_delay_grid(16, rc.tf_delay_points)
        _, shallow = train_tf_rc(train, SPEC, rc.shallow_als_iters, rc.als_tol, rseed, delay_grid=tf_grid)
        _, deep = train_rcnet_deep_tf(train, 10, SPEC, rc.deep_als_iters, rseed, tol=rc.als_tol,
                                      delay_grid=tf_grid)
        wins_tf += deep.final_objective <= shallow.final_objective
    dt = time.perf_counter() - t0
    record(8, "ten-layer RCNet objective <= shallow objective", wins_time >= 18 and wins_tf >= 18 and dt < 300,
           f"time {wins_time}/20, time-frequency {wins_tf}/20 (need 18), {dt:.0f} s")


@pytest.mark.xfail(strict=True, reason="trend does not hold at desk scale; analysis in the design notes")
def test_09_one_bit_adc_sphere_collapse():
    t0 = time.perf_counter()
    cfg = desk_profile(modulation="qpsk", adc=AdcConfig(bits=1, enabled=True), snr_db=15.0,
                       detectors=("sphere", "tf-rc"), trials=50)
    records, _, _ = run_sweep(cfg)
    ber = {r.detector: r.ber for r in records}
    dt = time.perf_counter() - t0
    ok = ber["sphere"] >= 0.3 and ber["tf-rc"] < ber["sphere"] and dt < 300
    record(9, "1-bit ADC: sphere BER >= 0.3 and time-frequency RC lower", ok,
           f"sphere {ber['sphere']:.3f}, tf-rc {ber['tf-rc']:.3f}, {dt:.0f} s")


@pytest.mark.xfail(strict=True, reason="trend does not hold at desk scale; analysis in the design notes")
def test_10_low_backoff_rcnet_beats_lmmse():
    t0 = time.perf_counter()
    cfg = desk_profile(pa=PaConfig(input_backoff_db=3.0), snr_db=15.0, detectors=("rcnet-tf", "lmmse"), trials=50)
    records, _, _ = run_sweep(cfg)
    ber = {r.detector: r.ber for r in records}
    dt = time.perf_counter() - t0
    ok = ber["rcnet-tf"] < ber["lmmse"] and dt < 300
    record(10, "IBO 3 dB: deep time-frequency RCNet BER < LMMSE BER", ok,
           f"rcnet-tf {ber['rcnet-tf']:.3f}, lmmse {ber['lmmse']:.3f}, {dt:.0f} s")


def test_11_noiseless_identity_channel():
    worst = {}
    for mod in ("qpsk", "16qam"):
        cfg = desk_profile(modulation=mod, snr_db=math.inf, trials=3,
                           channel=ChannelProfile(n_taps=1, kind="identity"))
        records, _, _ = run_sweep(cfg)
        for r in records:
            worst[r.detector] = max(worst.get(r.detector, 0), r.bit_errors)
    record(11, "noiseless identity channel: zero errors for all six detectors",
           len(worst) == 6 and not any(worst.values()), f"bit errors {worst}")


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("determinism")
    cfg = desk_profile(trials=4, sweep_values=(10.0, 20.0), master_seed=11)
    runs = []
    for workers in (1, 2):
        records, manifest, traces = run_sweep(cfg, workers=workers)
        emit_report(records, manifest, out / str(workers), traces)
        runs.append((out / str(workers), manifest))
    return runs


def test_12_worker_count_determinism(two_runs):
    (a, _), (b, _) = two_runs
    same = (a / "ber.csv").read_bytes() == (b / "ber.csv").read_bytes()
    record(12, "ber.csv identical for 1 and 2 workers", same, "byte-identical" if same else "files differ")


def test_13_overhead(two_runs):
    _, manifest = two_runs[0]
    pct = manifest.notes["overhead_percent"]
    record(13, "manifest reports the training overhead", manifest.overhead == 4 / 17 and pct == 23.5,
           f"overhead {manifest.overhead:.4f} ({pct}%)")
