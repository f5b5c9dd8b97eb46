# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Diagnostics tour
#
# Train a small structured denoiser, then probe it: Jacobian spectrum,
# frequency response, recursive dynamics and noise robustness.

# %%
import numpy as np

from structnet import (
    TrainConfig, frequency_response, gen_freq_sweep, gen_signal_recovery,
    jacobian_spectrum, perturbation_robustness, recurse, train,
)
from structnet.shaping import spectral_cap
from structnet.net import Architecture, init_network

task = gen_signal_recovery(seed=0, n_samples=256, dim=16, noise_std=0.1)
net = init_network(Architecture((16, 16, 16), shaping="dct_band"), seed=0)
log = train(net, task, TrainConfig(epochs=60, learning_rate=3e-3))
print(f"loss {log.loss[0]:.3f} -> {log.loss[-1]:.4f}")
print("mean correction norm per layer, last epoch:", np.round(log.residual_norms[-1], 3))

# %% [markdown]
# ## Jacobian spectrum
#
# Per-layer singular values of the input-output Jacobian, averaged over
# validation probes.

# %%
rep = jacobian_spectrum(net, task.inputs[task.val_idx][:8])
print(np.round(rep.mean[0], 3))

# %% [markdown]
# ## Frequency response
#
# Unit-norm cosine probes, one DCT mode each. The low band passes, the
# rest is attenuated.

# %%
fr = frequency_response(net, gen_freq_sweep(16, 15))
for m, g in zip(fr.modes, fr.gains):
    print(f"mode {m:2d}  {'#' * int(40 * g / fr.gains.max())}")

# %% [markdown]
# ## Recursive application
#
# Iterate a layer on its own output. Training leaves the correction path of
# this layer with a large gain (the spectral cap holds at initialization
# only), so its Lipschitz certificate exceeds one and nothing forces the
# iteration to settle. Re-capping the weight at 0.9 and shrinking the
# correction output weights to a gain of 0.05 turns the same layer into a
# contraction, and the update magnitudes then fall geometrically.

# %%
import copy

layer = net.layers[0]
trace = recurse(layer, task.inputs[0], max_iters=300)
print(f"trained:   certificate {layer.lipschitz_bound():.3f}, converged {trace.converged} "
      f"after {trace.iterations} steps, fitted decay {trace.decay_rate(skip=5):.3f}")

tamed = copy.deepcopy(layer)
tamed.weight[...] = spectral_cap(tamed.shaping, tamed.weight, 0.9)
tamed.correction.w2 *= 0.05 / tamed.correction.lipschitz_bound()
trace = recurse(tamed, task.inputs[0], max_iters=3000)
print(f"rescaled:  certificate {tamed.lipschitz_bound():.3f}, converged {trace.converged} "
      f"after {trace.iterations} steps, fitted decay {trace.decay_rate(skip=5):.3f}")

# %% [markdown]
# ## Noise robustness
#
# Mean output deviation against the input noise level. The slope of that
# line is compared with the product of per-layer Lipschitz certificates.

# %%
rob = perturbation_robustness(net, task.inputs[task.val_idx], trials=50)
print("mean deviation:", np.round(rob.mean, 4))
print(f"slope {rob.slope:.3f} vs certificate x mean noise norm "
      f"{net.lipschitz_bound() * rob.noise_norm:.3f}")
