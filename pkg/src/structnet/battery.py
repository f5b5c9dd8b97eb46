"""Regenerate the full desk-scale figure set as SVG files.

Each figure family gets one or more ``figNN_*.svg`` files plus the CSV it
was drawn from. Figures that compare models pit a structured network
(low-pass ``dct_band`` shaping, spectral cap 0.95, correction on) against
a ReLU MLP with a matched parameter count, trained on identical data.

Run ``python3 -m structnet.battery --out figures`` or the demo script
``demos/figure_battery.py``.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import DivergenceError
from .experiments import write_csv
from .linalg import svd_values
from .net import Architecture, init_network, mlp_hidden_for_budget
from .svg import emit_svg, write_svg
from .tasks import gen_freq_sweep, gen_graph_classification, gen_multiscale_signal, gen_signal_recovery
from .train import TrainConfig, Trainer


@dataclass
class BatteryConfig:
    dim: int = 32
    n_samples: int = 512
    epochs: int = 250
    seeds: tuple = (0, 1, 2, 3, 4)
    depth_seeds: tuple = (0, 1, 2)
    depth_epochs: int = 100
    depths: tuple = (2, 3, 4, 5, 6, 7, 8, 9, 10)
    ablation_epochs: int = 100
    graph_nodes: int = 64
    graph_noise: float = 2.0
    graph_epochs: int = 40
    sigmas: tuple = (0.01, 0.05, 0.1, 0.2, 0.5)
    trials: int = 100


def quick_config():
    """A few-second variant for smoke tests."""
    return BatteryConfig(dim=16, n_samples=96, epochs=6, seeds=(0, 1), depth_seeds=(0,),
                         depth_epochs=4, depths=(2, 3), ablation_epochs=6, graph_nodes=16,
                         graph_epochs=4, trials=5)


def structured_arch(dim):
    return Architecture((dim, dim, dim), shaping="dct_band", gamma=0.95)


def matched_mlp(dim, budget):
    return Architecture((dim, mlp_hidden_for_budget(dim, dim, budget), dim), model="mlp")


def _pair(dim, seed):
    pg = init_network(structured_arch(dim), seed)
    mlp = init_network(matched_mlp(dim, pg.n_params()), seed)
    return {"PGNN": pg, "MLP": mlp}


def _svg(out, name, series, **style):
    write_svg(out / f"{name}.svg", emit_svg(series, **style))


def _epochs(log):
    return np.array(log.epochs, dtype=float)


def fig_training_pair(cfg, out):
    """Figures 2, 3, 4, 5, 9, 10 from one PGNN/MLP training pair."""
    task = gen_signal_recovery(0, cfg.n_samples, cfg.dim)
    nets = _pair(cfg.dim, 0)
    tcfg = TrainConfig(epochs=cfg.epochs, seed=0)
    logs = {name: Trainer(net, task, tcfg).run() for name, net in nets.items()}

    # figure 2: layer-1 Jacobian singular values averaged over validation probes
    probes = task.inputs[task.val_idx][:8]
    rows, series = [], {}
    for name, net in nets.items():
        spec = dg.jacobian_spectrum(net, probes).mean[0]
        series[f"{name} layer 1"] = (np.arange(1, spec.size + 1), spec)
        rows += [[name, i + 1, v] for i, v in enumerate(spec)]
    write_csv(out / "fig02_jacobian_spectrum.csv", ["model", "index", "value"], rows)
    _svg(out, "fig02_jacobian_spectrum", series, title="Jacobian singular value spectrum",
         x_label="index", y_label="singular value")

    # figure 3: activation variance heatmaps, two layers per model
    for name, log in logs.items():
        for layer in range(2):
            grid = log.variance_grid(layer)
            _svg(out, f"fig03_activation_variance_{name.lower()}_l{layer + 1}", grid, mode="heatmap",
                 title=f"{name} layer {layer + 1}: activation variance", x_label="epoch",
                 y_label="neuron", log_scale=True)

    # figure 4: residual norms per structured layer
    res = logs["PGNN"].residual_matrix()
    ep = _epochs(logs["PGNN"])
    write_csv(out / "fig04_residual_norms.csv", ["epoch", "res_norm_l1", "res_norm_l2"],
              [[e, *r] for e, r in zip(logs["PGNN"].epochs, res)])
    _svg(out, "fig04_residual_norms", {f"R{l + 1}": (ep, res[:, l]) for l in range(2)},
         title="Mean norm of correction output", x_label="epoch", y_label="mean norm")

    # figure 5: frequency response after training
    sweep = gen_freq_sweep(cfg.dim, cfg.dim - 1)
    series, rows = {}, []
    for name, net in nets.items():
        fr = dg.frequency_response(net, sweep)
        series[name] = (fr.frequencies, fr.gains)
        rows += [[name, f, m, g] for f, m, g in zip(fr.frequencies, fr.modes, fr.gains)]
    write_csv(out / "fig05_freq_response.csv", ["model", "frequency", "mode", "gain"], rows)
    _svg(out, "fig05_freq_response", series, title="Frequency response under cosine sweeps",
         x_label="cycles / sample", y_label="gain")

    # figures 9 and 10: loss and gradient norm curves
    rows = [[name, e, lo, g] for name, log in logs.items()
            for e, lo, g in zip(log.epochs, log.loss, log.grad_norm)]
    write_csv(out / "fig09_10_training.csv", ["model", "epoch", "loss", "grad_norm"], rows)
    _svg(out, "fig09_training_loss", {n: (_epochs(l), l.loss) for n, l in logs.items()},
         title="Training loss", x_label="epoch", y_label="mse", log_y=True)
    _svg(out, "fig10_grad_norm", {n: (_epochs(l), l.grad_norm) for n, l in logs.items()},
         title="Gradient norm", x_label="epoch", y_label="norm", log_y=True)
    return {"logs": logs, "nets": nets}


def fig_multires(cfg, out):
    task = gen_multiscale_signal(0, cfg.n_samples, cfg.dim)
    res = dg.multires_compose(task, TrainConfig(epochs=cfg.epochs), seed=0)
    logs = res["logs"]
    write_csv(out / "fig06_multires.csv", ["model", "epoch", "loss"],
              [[n, e, lo] for n, log in logs.items() for e, lo in zip(log.epochs, log.loss)])
    _svg(out, "fig06_multires", {"two-branch PGNN": (_epochs(logs["pgnn"]), logs["pgnn"].loss),
                                 "MLP": (_epochs(logs["mlp"]), logs["mlp"].loss)},
         title="Training loss on multi-scale input", x_label="epoch", y_label="mse", log_y=True)
    return res


def _trace(layer, x0):
    try:
        return dg.recurse(layer, x0, max_iters=200, tol=1e-10)
    except DivergenceError as err:
        return err.record


def fig_recursion(cfg, out, net):
    """Figures 7 and 8: the trained first layer and a certified contraction.

    The contraction is a freshly capped layer (gamma 0.9) whose correction
    is rescaled so the Lipschitz certificate is at most 0.95.
    """
    x0 = gen_signal_recovery(0, 8, cfg.dim).inputs[0]
    capped = init_network(Architecture((cfg.dim, cfg.dim), shaping="dct_band", gamma=0.9), 1).layers[0]
    rng = np.random.default_rng(1)
    corr = capped.correction
    w2 = rng.standard_normal(corr.w2.shape)
    corr.w2[...] = w2 * 0.05 / (svd_values(w2)[0] * svd_values(corr.w1)[0])
    corr.b1[...] = rng.standard_normal(corr.b1.shape)
    traces = {"trained PGNN layer 1": _trace(net.layers[0], x0),
              f"capped layer (L = {capped.lipschitz_bound():.3f})": _trace(capped, x0)}
    rows = [[name, t + 1, d, e] for name, tr in traces.items()
            for t, (d, e) in enumerate(zip(tr.deltas, tr.energies))]
    write_csv(out / "fig07_08_recursion.csv", ["module", "t", "delta", "energy"], rows)
    steps = {n: np.arange(1, tr.deltas.size + 1) for n, tr in traces.items()}
    _svg(out, "fig07_recursion_delta", {n: (steps[n], tr.deltas) for n, tr in traces.items()},
         title="Update magnitude under recursive application", x_label="iteration",
         y_label="|x_t - x_(t-1)|", log_y=True)
    _svg(out, "fig08_recursion_energy", {n: (steps[n], tr.energies) for n, tr in traces.items()},
         title="Surrogate energy under recursion", x_label="iteration", y_label="E_t", log_y=True)
    return traces


def fig_robustness(cfg, out):
    """Figure 11: deviation curves, mean and across-seed std over seeds."""
    curves = {"PGNN": [], "MLP": []}
    for seed in cfg.seeds:
        task = gen_signal_recovery(seed, cfg.n_samples, cfg.dim)
        for name, net in _pair(cfg.dim, seed).items():
            Trainer(net, task, TrainConfig(epochs=cfg.epochs, seed=seed)).run()
            rep = dg.perturbation_robustness(net, task.inputs[task.val_idx], cfg.sigmas, cfg.trials, seed)
            curves[name].append(rep.mean)
    sig = np.array(cfg.sigmas)
    rows, series, bands = [], {}, {}
    for name, c in curves.items():
        c = np.array(c)
        mean, std = c.mean(axis=0), c.std(axis=0)
        series[name], bands[name] = (sig, mean), std
        rows += [[name, s, m, d] for s, m, d in zip(sig, mean, std)]
    write_csv(out / "fig11_robustness.csv", ["model", "sigma", "mean_dev", "seed_std"], rows)
    _svg(out, "fig11_robustness", series, bands=bands, title="Output deviation under Gaussian input noise",
         x_label="sigma", y_label="mean |f(x + noise) - f(x)|")
    return {k: np.array(v) for k, v in curves.items()}


def fig_projection_variants(cfg, out):
    task = gen_graph_classification(0, n_nodes=cfg.graph_nodes, n_classes=4, n_samples=cfg.n_samples,
                                    noise_std=cfg.graph_noise)
    n = cfg.graph_nodes
    arch = Architecture((n, n, 4), shaping=["identity", "identity"],
                        shaping_params={"edges": task.extras["edges"]})
    variants = ["identity", "sparsity_mask", "dct_band", "laplacian_smooth", "learned_projection"]
    res = dg.ablation_projection_variants(task, variants, TrainConfig(
        epochs=cfg.graph_epochs, learning_rate=3e-3, loss="cross_entropy"), arch, seeds=cfg.seeds)
    rows, series, bands = [], {}, {}
    for v, info in res.items():
        acc = np.array([r[1].val_acc for r in info["runs"]])
        ep = _epochs(info["runs"][0][1])
        series[v], bands[v] = (ep, acc.mean(axis=0)), acc.std(axis=0)
        rows += [[v, s, m] for s, _, _, m in info["runs"]]
    write_csv(out / "fig12_projection_variants.csv", ["variant", "seed", "final_val_acc"], rows)
    _svg(out, "fig12_projection_variants", series, bands=bands,
         title="Validation accuracy across projection variants", x_label="epoch", y_label="accuracy")
    return res


def fig_residual_ablation(cfg, out):
    task = gen_multiscale_signal(0, cfg.n_samples, cfg.dim)
    arch = Architecture((cfg.dim, cfg.dim), shaping="dct_band")
    pairs = dg.ablation_residual(task, TrainConfig(epochs=cfg.ablation_epochs), arch, seeds=cfg.seeds)
    on = np.array([p[1].loss for p in pairs])
    off = np.array([p[2].loss for p in pairs])
    ep = _epochs(pairs[0][1])
    write_csv(out / "fig13_residual_ablation.csv", ["seed", "final_loss_on", "final_loss_off"],
              [[s, a.loss[-1], b.loss[-1]] for s, a, b in pairs])
    _svg(out, "fig13_residual_ablation", {"with correction": (ep, on.mean(axis=0)),
                                          "without correction": (ep, off.mean(axis=0))},
         title="Training loss with and without correction", x_label="epoch", y_label="mse", log_y=True)
    return pairs


def fig_depth(cfg, out):
    finals = []
    rows = []
    for seed in cfg.depth_seeds:
        task = gen_signal_recovery(seed, cfg.n_samples, cfg.dim)
        recs = dg.depth_sweep(Architecture((cfg.dim, cfg.dim), shaping="dct_band"), cfg.depths, task,
                              TrainConfig(epochs=cfg.depth_epochs, seed=seed))
        finals.append([r.final_loss for r in recs])
        rows += [[seed, r.depth, r.final_loss, r.diverged, r.diverged_epoch] for r in recs]
    finals = np.array(finals)
    write_csv(out / "fig14_depth.csv", ["seed", "depth", "final_loss", "diverged", "diverged_epoch"], rows)
    _svg(out, "fig14_depth", {"PGNN": (np.array(cfg.depths, dtype=float), finals.mean(axis=0))},
         bands={"PGNN": finals.std(axis=0)}, title="Final mse vs depth", x_label="layers",
         y_label="mse", log_y=True)
    return rows


def run_battery(out_dir, cfg=None, verbose=False):
    """Write every figure into ``out_dir``; returns wall time per figure family."""
    cfg = cfg or BatteryConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}

    def timed(name, fn, *args):
        t = time.perf_counter()
        result = fn(*args)
        timings[name] = time.perf_counter() - t
        if verbose:
            print(f"{name:<22s} {timings[name]:7.1f} s")
        return result

    pair = timed("training pair", fig_training_pair, cfg, out)
    timed("multires", fig_multires, cfg, out)
    timed("recursion", fig_recursion, cfg, out, pair["nets"]["PGNN"])
    timed("robustness", fig_robustness, cfg, out)
    timed("projection variants", fig_projection_variants, cfg, out)
    timed("residual ablation", fig_residual_ablation, cfg, out)
    timed("depth", fig_depth, cfg, out)
    return timings


def main(argv=None):
    p = argparse.ArgumentParser(description="Regenerate the figure battery as SVG files.")
    p.add_argument("--out", default="figures")
    p.add_argument("--quick", action="store_true", help="tiny sizes, for a smoke run")
    args = p.parse_args(argv)
    cfg = quick_config() if args.quick else BatteryConfig()
    t = time.perf_counter()
    run_battery(args.out, cfg, verbose=True)
    print(f"{'total':<22s} {time.perf_counter() - t:7.1f} s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
