"""
A transmitted OFDM subframe and what the hardware does to it
============================================================

Builds one 2x2 subframe, pushes it through a saturating amplifier at a few
back-off levels and looks at the peak power and the in-band error.  Then a
1-bit converter is applied at the receiver.
"""

import numpy as np

from rc_symdet.impairments import AdcConfig, PaConfig, adc, power_amplifier
from rc_symdet.ofdm import QAM16, SubframeConfig, ofdm_demodulate, ofdm_modulate, papr_db, qam_modulate

cfg = SubframeConfig(n_sc=64, n_cp=16, n_t=2, n_r=2)
rng = np.random.default_rng(0)

bits = rng.integers(0, 2, size=17 * cfg.n_sc * cfg.n_t * 4)
grid = qam_modulate(bits, QAM16).reshape(17, cfg.n_sc, cfg.n_t)
frames = ofdm_modulate(grid, cfg)
print("frame shape (symbols, samples, antennas):", frames.shape)
print(f"PAPR of the first frame: {papr_db(frames[0, :, 0]):.1f} dB")

# lower back-off drives the amplifier harder into compression
for ibo in (9.0, 6.0, 3.0, 0.0):
    out = power_amplifier(frames, PaConfig(input_backoff_db=ibo))
    rx = ofdm_demodulate(out, cfg)
    gain = np.vdot(grid, rx) / np.vdot(grid, grid)  # best scalar fit
    evm = np.sqrt(np.mean(np.abs(rx - gain * grid) ** 2) / np.mean(np.abs(gain * grid) ** 2))
    print(f"IBO {ibo:3.0f} dB  PAPR {papr_db(out[0, :, 0]):4.1f} dB  EVM {100 * evm:5.1f} %")

q = adc(frames, AdcConfig(bits=1, enabled=True))
print("levels after a 1-bit converter:", np.unique(np.round(q[..., 0].real, 4)))
