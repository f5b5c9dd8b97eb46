"""Run one configured experiment kind and write its artifact tree.

Layout under the output directory::

    <out>/seed_<n>/config.echo       effective config, canonical form
    <out>/seed_<n>/metrics.csv       per-epoch training record
    <out>/seed_<n>/<report>.csv      kind-specific report(s)
    <out>/seed_<n>/*.svg             figures (unless disabled)
    <out>/seed_<n>/checkpoint.bin    when experiment.checkpoint = true

Sweep kinds (depth, ablate-*, multires) nest one directory per training
run below the seed directory, each with its own ``metrics.csv``. The
column sets are listed in ``CSV_SCHEMAS``. Floats are written with
``repr`` so reruns reproduce files byte for byte.
"""

from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .errors import DivergenceError
from .net import Architecture, init_network
from .svg import emit_svg, write_svg
from .tasks import (
    gen_freq_sweep,
    gen_graph_classification,
    gen_multiscale_signal,
    gen_signal_recovery,
)
from .train import TrainConfig, Trainer

CSV_SCHEMAS = {
    "metrics": ["epoch", "loss", "val_loss", "grad_norm", "res_norm_l1..Lk"],
    "val_acc": ["epoch", "val_acc"],
    "activation_variance": ["epoch", "layer", "neuron", "variance"],
    "spectrum": ["layer", "probe", "index", "value"],
    "spectrum_mean": ["layer", "index", "value", "condition_mean"],
    "freq_response": ["frequency", "mode", "gain", "gain_std"],
    "recursion": ["t", "delta", "energy"],
    "robustness": ["sigma", "mean_dev", "std_dev"],
    "robustness_summary": ["slope", "noise_norm", "amplification", "lipschitz_bound"],
    "depth": ["depth", "initial_loss", "final_loss", "diverged", "diverged_epoch"],
    "projection": ["variant", "seed", "final_loss", "val_metric"],
    "projection_summary": ["variant", "mean", "var"],
    "residual_ablation": ["correction", "epoch", "loss", "res_norm_mean"],
    "multires": ["model", "epoch", "loss", "val_loss"],
    "multires_params": ["model", "n_params"],
}


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def write_metrics(directory, log):
    directory = Path(directory)
    k = log.n_layers
    header = ["epoch", "loss", "val_loss", "grad_norm"] + [f"res_norm_l{i + 1}" for i in range(k)]
    rows = [[e, lo, vl, g] + list(r) for e, lo, vl, g, r in
            zip(log.epochs, log.loss, log.val_loss, log.grad_norm, log.residual_norms)]
    write_csv(directory / "metrics.csv", header, rows)
    if not all(np.isnan(log.val_acc)):
        write_csv(directory / "val_acc.csv", CSV_SCHEMAS["val_acc"],
                  zip(log.epochs, log.val_acc))
    rows = [[e, l + 1, n, v] for e, var in zip(log.epochs, log.activation_variance)
            for l, layer_var in enumerate(var) for n, v in enumerate(layer_var)]
    write_csv(directory / "activation_variance.csv", CSV_SCHEMAS["activation_variance"], rows)


def build_task(cfg: ExperimentConfig, seed):
    t = cfg.task
    if t.name == "signal_recovery":
        return gen_signal_recovery(seed, t.n_samples, t.dim, t.noise_std, t.val_fraction)
    if t.name == "multiscale":
        return gen_multiscale_signal(seed, t.n_samples, t.dim, t.val_fraction)
    return gen_graph_classification(seed, t.n_nodes, t.n_classes, t.homophily, t.n_samples,
                                    t.noise_std, t.avg_degree, t.val_fraction)


def build_arch(cfg: ExperimentConfig, task):
    a = cfg.arch
    params = {"passband": a.passband, "band": a.band, "rank": a.rank or None,
              "alpha": a.alpha, "density": a.density, "scale": a.scale}
    if a.graph == "task":
        params["edges"] = task.extras["edges"]
    shaping = a.shaping[0] if len(a.shaping) == 1 else list(a.shaping)
    if isinstance(shaping, str) and a.graph == "task":
        # graph-shaped layers must be node-sized; other layers stay unshaped
        dims = a.dims
        shaping = [shaping if dims[i + 1] == task.in_dim else "identity"
                   for i in range(len(dims) - 1)]
    return Architecture(dims=tuple(a.dims), model=a.model, shaping=shaping,
                        shaping_params=params, correction=a.correction,
                        gamma=a.gamma or None, hidden=a.hidden or None,
                        outer_activation=None if a.outer_activation == "none" else a.outer_activation)


def build_train_config(cfg: ExperimentConfig, seed):
    t = cfg.train
    return TrainConfig(t.epochs, t.batch_size, t.learning_rate, t.optimizer, t.momentum,
                       t.beta1, t.beta2, t.eps, seed, t.loss, t.log_every)


def _svg(directory, name, series, **style):
    write_svg(Path(directory) / f"{name}.svg", emit_svg(series, **style))


def _training_svgs(d, log, prefix=""):
    ep = np.array(log.epochs, dtype=float)
    _svg(d, f"{prefix}loss", {"train": (ep, log.loss), "validation": (ep, log.val_loss)},
         title="Training loss", x_label="epoch", y_label="loss", log_y=True)
    _svg(d, f"{prefix}grad_norm", {"global": (ep, log.grad_norm)},
         title="Gradient norm", x_label="epoch", y_label="norm", log_y=True)
    res = log.residual_matrix()
    _svg(d, f"{prefix}residual_norms",
         {f"layer {l + 1}": (ep, res[:, l]) for l in range(res.shape[1])},
         title="Mean correction norm", x_label="epoch", y_label="norm")
    for l in range(log.n_layers):
        _svg(d, f"{prefix}activation_variance_l{l + 1}", log.variance_grid(l), mode="heatmap",
             title=f"Activation variance, layer {l + 1}", x_label="logged epoch",
             y_label="neuron")


def _train_single(cfg, task, arch, seed, d, svg):
    tcfg = build_train_config(cfg, seed)
    net = init_network(arch, seed)
    trainer = Trainer(net, task, tcfg)
    try:
        if cfg.experiment.train_first:
            log = trainer.run()
        else:
            trainer.measure()
            log = trainer.log
    except DivergenceError as err:
        log = err.record
        write_csv(d / "divergence.csv", ["epoch"], [[err.index]])
    write_metrics(d, log)
    if svg and log.epochs:
        _training_svgs(d, log)
    if cfg.experiment.checkpoint:
        save_checkpoint(d / "checkpoint.bin", trainer)
    return net, log


def _kind_jacobian(cfg, task, net, d, svg):
    probes = task.inputs[task.val_idx][:cfg.diag.n_probes]
    rep = dg.jacobian_spectrum(net, probes)
    rows = [[l + 1, p, i, v] for l, s in enumerate(rep.spectra)
            for p, vals in enumerate(s) for i, v in enumerate(vals)]
    write_csv(d / "spectrum.csv", CSV_SCHEMAS["spectrum"], rows)
    rows = [[l + 1, i, v, float(np.mean(c))] for l, (m, c) in enumerate(zip(rep.mean, rep.condition))
            for i, v in enumerate(m)]
    write_csv(d / "spectrum_mean.csv", CSV_SCHEMAS["spectrum_mean"], rows)
    if svg:
        _svg(d, "jacobian_spectrum",
             {f"layer {l + 1}": (np.arange(1, m.size + 1), m) for l, m in enumerate(rep.mean)},
             title="Jacobian singular values", x_label="index", y_label="singular value")


def _kind_freq(cfg, task, net, d, svg):
    sweep = gen_freq_sweep(task.in_dim, min(cfg.diag.n_freqs, task.in_dim - 1))
    fr = dg.frequency_response(net, sweep)
    rows = [[f, m, g, float(np.std(p))] for f, m, g, p in
            zip(fr.frequencies, fr.modes, fr.gains, fr.per_phase)]
    write_csv(d / "freq_response.csv", CSV_SCHEMAS["freq_response"], rows)
    if svg:
        _svg(d, "freq_response", {"gain": (fr.frequencies, fr.gains)},
             title="Frequency response", x_label="cycles / sample", y_label="gain")


def _kind_recurse(cfg, task, net, d, svg):
    layer = net.layers[0]
    try:
        trace = dg.recurse(layer, task.inputs[task.train_idx[0]], cfg.diag.max_iters, cfg.diag.tol)
    except DivergenceError as err:
        trace = err.record
    rows = [[t + 1, dl, e] for t, (dl, e) in enumerate(zip(trace.deltas, trace.energies))]
    write_csv(d / "recursion.csv", CSV_SCHEMAS["recursion"], rows)
    if svg and len(rows):
        t = np.arange(1, trace.deltas.size + 1)
        _svg(d, "recursion_delta", {"delta": (t, trace.deltas)}, title="Update magnitude",
             x_label="iteration", y_label="|x_t - x_(t-1)|", log_y=True)
        _svg(d, "recursion_energy", {"energy": (t, trace.energies)}, title="Surrogate energy",
             x_label="iteration", y_label="E_t", log_y=True)


def _kind_perturb(cfg, task, net, seed, d, svg):
    x = task.inputs[task.val_idx]
    rep = dg.perturbation_robustness(net, x, cfg.diag.sigmas, cfg.diag.trials, seed)
    write_csv(d / "robustness.csv", CSV_SCHEMAS["robustness"], zip(rep.sigmas, rep.mean, rep.std))
    write_csv(d / "robustness_summary.csv", CSV_SCHEMAS["robustness_summary"],
              [[rep.slope, rep.noise_norm, rep.amplification(), net.lipschitz_bound()]])
    if svg:
        _svg(d, "robustness", {"mean deviation": (rep.sigmas, rep.mean)},
             bands={"mean deviation": rep.std}, title="Output deviation under input noise",
             x_label="sigma", y_label="|f(x+noise) - f(x)|")


def _kind_depth(cfg, task, arch, seed, d, svg):
    recs = dg.depth_sweep(arch, cfg.diag.depths, task, build_train_config(cfg, seed))
    for r in recs:
        if r.log is not None and r.log.epochs:
            sub = d / f"depth_{r.depth:02d}"
            sub.mkdir(exist_ok=True)
            write_metrics(sub, r.log)
    write_csv(d / "depth.csv", CSV_SCHEMAS["depth"],
              [[r.depth, r.initial_loss, r.final_loss, r.diverged, r.diverged_epoch] for r in recs])
    if svg:
        dep = np.array([r.depth for r in recs], dtype=float)
        _svg(d, "depth", {"final loss": (dep, [r.final_loss for r in recs])},
             title="Final loss vs depth", x_label="layers", y_label="loss", log_y=True)


def _kind_ablate_projection(cfg, task, arch, seed, d, svg):
    tcfg = build_train_config(cfg, seed)
    res = dg.ablation_projection_variants(task, cfg.diag.variants, tcfg, arch,
                                          seeds=cfg.experiment.seeds)
    rows, summary, curves = [], [], {}
    for variant, info in res.items():
        for s, log, _, metric in info["runs"]:
            sub = d / f"{variant}_seed{s}"
            sub.mkdir(exist_ok=True)
            write_metrics(sub, log)
            rows.append([variant, s, log.loss[-1], metric])
        summary.append([variant, info["mean"], info["var"]])
        epochs = np.array(info["runs"][0][1].epochs, dtype=float)
        stack = np.array([(r[1].val_acc if task.classification else r[1].val_loss)
                          for r in info["runs"]])
        curves[variant] = (epochs, stack.mean(axis=0))
    write_csv(d / "projection.csv", CSV_SCHEMAS["projection"], rows)
    write_csv(d / "projection_summary.csv", CSV_SCHEMAS["projection_summary"], summary)
    if svg:
        _svg(d, "projection_variants", curves, title="Validation metric by projection variant",
             x_label="epoch", y_label="val accuracy" if task.classification else "val loss")


def _kind_ablate_residual(cfg, task, arch, seed, d, svg):
    pairs = dg.ablation_residual(task, build_train_config(cfg, seed), arch, seeds=[seed])
    _, on, off = pairs[0]
    rows = []
    for flag, log in (("on", on), ("off", off)):
        sub = d / f"correction_{flag}"
        sub.mkdir(exist_ok=True)
        write_metrics(sub, log)
        rows += [[flag, e, lo, float(np.mean(r))] for e, lo, r in
                 zip(log.epochs, log.loss, log.residual_norms)]
    write_csv(d / "residual_ablation.csv", CSV_SCHEMAS["residual_ablation"], rows)
    if svg:
        _svg(d, "residual_ablation",
             {"with correction": (np.array(on.epochs, float), on.loss),
              "without correction": (np.array(off.epochs, float), off.loss)},
             title="Training loss with and without correction", x_label="epoch",
             y_label="loss", log_y=True)


def _kind_multires(cfg, task, seed, d, svg):
    res = dg.multires_compose(task, build_train_config(cfg, seed), seed, cfg.arch.passband)
    rows = []
    for name, log in res["logs"].items():
        sub = d / name
        sub.mkdir(exist_ok=True)
        write_metrics(sub, log)
        rows += [[name, e, lo, vl] for e, lo, vl in zip(log.epochs, log.loss, log.val_loss)]
    write_csv(d / "multires.csv", CSV_SCHEMAS["multires"], rows)
    write_csv(d / "multires_params.csv", CSV_SCHEMAS["multires_params"], res["params"].items())
    if svg:
        _svg(d, "multires", {n: (np.array(l.epochs, float), l.loss) for n, l in res["logs"].items()},
             title="Training loss on multi-scale input", x_label="epoch", y_label="loss",
             log_y=True)


def run(cfg: ExperimentConfig, out_dir, svg=None):
    """Run every seed of ``cfg``; returns 0 (divergence counts as data)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    svg = cfg.experiment.svg if svg is None else svg
    kind = cfg.experiment.kind
    for seed in cfg.experiment.seeds:
        d = out / f"seed_{seed}"
        d.mkdir(exist_ok=True)
        (d / "config.echo").write_text(cfg.to_text())
        task = build_task(cfg, seed)
        arch = build_arch(cfg, task)
        if kind in ("train", "jacobian", "freq", "recurse", "perturb"):
            net, _ = _train_single(cfg, task, arch, seed, d, svg)
            if kind == "jacobian":
                _kind_jacobian(cfg, task, net, d, svg)
            elif kind == "freq":
                _kind_freq(cfg, task, net, d, svg)
            elif kind == "recurse":
                _kind_recurse(cfg, task, net, d, svg)
            elif kind == "perturb":
                _kind_perturb(cfg, task, net, seed, d, svg)
        elif kind == "depth":
            _kind_depth(cfg, task, arch, seed, d, svg)
        elif kind == "ablate-projection":
            _kind_ablate_projection(cfg, task, arch, seed, d, svg)
            break  # the seed list is consumed inside the ablation
        elif kind == "ablate-residual":
            _kind_ablate_residual(cfg, task, arch, seed, d, svg)
        elif kind == "multires":
            _kind_multires(cfg, task, seed, d, svg)
    return 0


def with_kind(cfg: ExperimentConfig, kind):
    return replace(cfg, experiment=replace(cfg.experiment, kind=kind))
