"""
Stacking reservoirs
===================

Each extra RCNet layer is trained on the previous layer's output.  The
training objective keeps falling with depth; whether the detections on
fresh symbols improve depends on how much training data there is.
"""

import numpy as np

from rc_symdet.detectors import TrainingSet, default_delay_grid, rcnet_detect, train_rcnet_deep_tf, train_rcnet_deep_time
from rc_symdet.harness import desk_profile, simulate_subframe

cfg = desk_profile(snr_db=21.0)
sf = cfg.subframe
spec = cfg.rc.reservoir
grid5 = default_delay_grid(sf.n_cp, 5)

print(" L   time objective   BER    | TF objective   BER")
for L in (1, 2, 4, 8):
    objs, bers = [], []
    for trial in range(5):
        frame = simulate_subframe(cfg, trial)
        train = TrainingSet.from_grids(frame.rx[: sf.q], frame.grids[: sf.q], sf)
        row = []
        for trainer, kw in ((train_rcnet_deep_time, dict(delay_grid=grid5)), (train_rcnet_deep_tf, dict(delay_grid=grid5))):
            model, diag = trainer(train, L, spec, seeds=trial, **kw)
            bits = rcnet_detect(model, frame.rx[sf.q :], sf, cfg.scheme)[1]
            row.append((diag.final_objective, np.mean(bits != frame.data_bits)))
        objs.append([r[0] for r in row])
        bers.append([r[1] for r in row])
    o, b = np.mean(objs, axis=0), np.mean(bers, axis=0)
    print(f"{L:2d}   {o[0]:14.4g}  {b[0]:.4f} | {o[1]:12.4g}  {b[1]:.4f}")
