"""Train a small enhancement model on synthetic low-light pairs.

``python3 demos/02_toy_training.py [steps]`` (default 300, about a minute on
one core). With 2000 steps the training-set PSNR passes 30 dB.
"""
import sys
import time

import numpy as np

from hvinet.cidnet import cidnet_forward
from hvinet.metrics import psnr
from hvinet.training import TrainConfig, moving_average, synthetic_pairs, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 300

# Eight smooth 32x32 images, darkened with gamma 2 and a little noise.
low, normal = synthetic_pairs(8, 32)
print(f"input PSNR before enhancement: {psnr(low, normal):.2f} dB")

config = TrainConfig(steps=steps)
print("model:", config.model)

t0 = time.time()


def report(step, loss, lr):
    if step % 50 == 0:
        print(f"  step {step:5d}  loss {loss:.5f}  lr {lr:.2e}  {time.time() - t0:5.1f}s")


result = train(config, low, normal, callback=report)
losses = [row[1] for row in result.log]
smooth = moving_average(losses, 50)
print(f"loss moving average: {smooth[0]:.5f} -> {smooth[-1]:.5f}")

out = cidnet_forward(low, result.model)
print(f"training-set PSNR after {steps} steps: {psnr(out, normal):.2f} dB")
print("learned color-space params:", result.model.transform.params())

# The weights and the HVI parameters travel together in one file plus a
# small text sidecar.
result.model.save("/tmp/toy_model.w")
print("saved /tmp/toy_model.w and /tmp/toy_model.w.cfg")
