"""
Shallow reservoir detectors on a multipath channel
==================================================

Trains a time-domain RC and a time-frequency RC on the four reference
symbols of one subframe and detects the remaining thirteen.  The LMMSE
receiver with pilot-based channel estimates is shown for comparison.
"""

import numpy as np

from rc_symdet.baselines import lmmse_channel_estimate, lmmse_equalize
from rc_symdet.detectors import TrainingSet, default_delay_grid, detect_tf_rc, detect_time_rc, train_tf_rc, train_time_rc
from rc_symdet.harness import desk_profile, simulate_subframe
from rc_symdet.impairments import PaConfig
from rc_symdet.ofdm import ofdm_demodulate, qam_demodulate

cfg = desk_profile(snr_db=20.0, pa=PaConfig(input_backoff_db=5.0))
sf, scheme = cfg.subframe, cfg.scheme
frame = simulate_subframe(cfg, trial_index=0)
train = TrainingSet.from_grids(frame.rx[: sf.q], frame.grids[: sf.q], sf)
test_rx = frame.rx[sf.q :]


def ber(bits):
    return np.mean(bits != frame.data_bits)


spec = cfg.rc.reservoir
time_rc, diag = train_time_rc(train, spec, default_delay_grid(sf.n_cp, 50), seed=1)
print(f"time RC      delay {time_rc.readout.p_star:2d}  BER {ber(detect_time_rc(time_rc, test_rx, sf, scheme)[1]):.4f}")

tf_rc, diag = train_tf_rc(train, spec, max_als_iters=5, seed=1, delay_grid=default_delay_grid(sf.n_cp, 5))
print(f"TF RC        delay {tf_rc.readout.p_star:2d}  BER {ber(detect_tf_rc(tf_rc, test_rx, sf, scheme)[1]):.4f}")
print("  ALS objective per iteration:", " ".join(f"{v:.3g}" for v in diag.objective_trace))

# the model-based receiver needs the noise level in the frequency domain
grid = ofdm_demodulate(frame.rx, sf)
est = lmmse_channel_estimate(grid[: sf.q], frame.grids[: sf.q], frame.noise_var * sf.n_sc)
print(f"LMMSE                  BER {ber(qam_demodulate(lmmse_equalize(est, grid[sf.q:]), scheme)):.4f}")
