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
# # Running experiments from a config file
#
# The `structnet` command runs one experiment kind per call. Configs are
# plain `section.key = value` lines. Anything left out takes its default,
# and `config.echo` records the fully expanded form.

# %%
import subprocess
import sys
import tempfile
from pathlib import Path

from structnet.cli import main
from structnet.config import parse_config

work = Path(tempfile.mkdtemp())
cfg_path = work / "denoise.cfg"
cfg_path.write_text("""\
# two-layer low-pass denoiser
task.name = signal_recovery
task.n_samples = 128
arch.dims = 32, 32, 32
arch.shaping = dct_band
train.epochs = 20
experiment.checkpoint = true
""")
print(parse_config(cfg_path.read_text()).to_text())

# %% [markdown]
# Same thing as `structnet train --config denoise.cfg --out <dir> --seed 0 1`.

# %%
status = main(["train", "--config", str(cfg_path), "--out", str(work / "train"), "--seed", "0", "1"])
print("exit", status)
for p in sorted((work / "train").rglob("*")):
    print(p.relative_to(work))

# %%
print((work / "train" / "seed_0" / "metrics.csv").read_text().splitlines()[:4])

# %% [markdown]
# Errors name the offending line and key.

# %%
bad = work / "bad.cfg"
bad.write_text("arch.shaping = wavelet\n")
subprocess.run([sys.executable, "-m", "structnet.cli", "train", "--config", str(bad)])
