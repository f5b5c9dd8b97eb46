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
# # Figure battery
#
# Regenerates every figure family (numbered 02 through 14) as standalone SVG
# files, each next to the CSV it was drawn from. Everything is trained from
# scratch on synthetic data, at desk scale, on one CPU core. A full run
# takes a minute or two.
#
# ```
# python3 demos/figure_battery.py [output_dir] [--quick]
# ```
#
# | files | content |
# |---|---|
# | fig02 | layer-1 Jacobian singular values, structured net vs matched MLP |
# | fig03 | activation variance heatmaps (neurons x epochs), two layers each |
# | fig04 | mean correction norm per structured layer over training |
# | fig05 | gain under single-mode cosine probes after training |
# | fig06 | two-branch (low + high band) net vs MLP on multi-scale input |
# | fig07, fig08 | update magnitude and surrogate energy under recursion |
# | fig09, fig10 | training loss and gradient norm curves |
# | fig11 | output deviation vs input noise, mean and std over 5 seeds |
# | fig12 | validation accuracy per shaping variant on graph signals |
# | fig13 | loss with and without the correction path |
# | fig14 | final loss against depth 2..10, 3 seeds |

# %%
import sys
import time

from structnet.battery import BatteryConfig, quick_config, run_battery

args = [a for a in sys.argv[1:] if not a.startswith("-")]
out_dir = args[0] if args else "figures"
cfg = quick_config() if "--quick" in sys.argv else BatteryConfig()
cfg

# %% [markdown]
# One call runs the whole set. Timings print per figure family.

# %%
start = time.perf_counter()
timings = run_battery(out_dir, cfg, verbose=True)
print(f"total {time.perf_counter() - start:.1f} s -> {out_dir}/")
