"""
Keeping a trained detector
==========================

A trained RCNet is written to a single .npz file and read back; the
reloaded model gives the same detections.
"""

import tempfile
from pathlib import Path

import numpy as np

from rc_symdet.artifacts import load_model, save_model
from rc_symdet.detectors import TrainingSet, rcnet_detect, train_rcnet_deep_tf
from rc_symdet.harness import config_to_dict, desk_profile, simulate_subframe

cfg = desk_profile(snr_db=25.0)
sf = cfg.subframe
frame = simulate_subframe(cfg, 0)
train = TrainingSet.from_grids(frame.rx[: sf.q], frame.grids[: sf.q], sf)
model, _ = train_rcnet_deep_tf(train, 3, cfg.rc.reservoir, seeds=0)

path = Path(tempfile.mkdtemp()) / "rcnet.npz"
save_model(path, model, {"subframe": config_to_dict(cfg)["subframe"]})
back, meta = load_model(path)
print("stored subframe:", meta["subframe"])

a = rcnet_detect(model, frame.rx[sf.q :], sf, cfg.scheme)[1]
b = rcnet_detect(back, frame.rx[sf.q :], sf, cfg.scheme)[1]
print("identical detections:", np.array_equal(a, b))
