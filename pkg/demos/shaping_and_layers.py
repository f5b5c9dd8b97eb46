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
# # Shaping operators and structured layers
#
# A structured layer computes `y = S(W) x + phi(x)`. The shaping operator `S`
# constrains the raw weight before it touches the input, and `phi` is a small
# tanh network whose output starts at zero.

# %%
import numpy as np

from structnet import make_shaping, spectral_cap, svd_values
from structnet.linalg import dct_basis
from structnet.net import Architecture, init_network

rng = np.random.default_rng(0)
w = rng.standard_normal((16, 16)) / 4

# %% [markdown]
# ## The operator menu
#
# Every kind turns the same raw weight into a different effective map. The
# top singular value shows how much each one can amplify.

# %%
for kind in ("identity", "sparsity_mask", "diagonal_scale", "low_rank",
             "dct_band", "laplacian_smooth", "learned_projection"):
    op = make_shaping(kind, 16, 16, seed=1)
    s = svd_values(op.apply(w))
    print(f"{kind:<20s} sigma_1 = {s[0]:.3f}   numerical rank = {np.sum(s > 1e-10)}")

# %% [markdown]
# ## Band projection
#
# `dct_band` keeps a set of cosine modes on both sides of `W`. A low-pass map
# sends any high-mode input to exactly zero.

# %%
op = make_shaping("dct_band", 16, 16, passband=0.25)
eff = op.apply(w)
high_modes = dct_basis(16)[4:]
print("largest response to a stop-band mode:", np.abs(eff @ high_modes.T).max())

# %% [markdown]
# ## Spectral cap
#
# Initialisation rescales `W` until the effective map's top singular value
# is at most gamma.

# %%
capped = spectral_cap(op, 10 * w, 0.95)
print("before", svd_values(op.apply(10 * w))[0], "after", svd_values(op.apply(capped))[0])

# %% [markdown]
# ## A two-layer net
#
# At initialisation the correction outputs zero, so the net is exactly the
# product of its effective maps.

# %%
net = init_network(Architecture((16, 16, 16), shaping="dct_band"), seed=0)
x = rng.standard_normal(16)
a = net.layers[1].effective_map() @ net.layers[0].effective_map()
print("max |net(x) - A x| =", np.abs(net(x) - a @ x).max())
print("parameters:", [name for name, _ in net.params()])
