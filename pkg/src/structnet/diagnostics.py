"""Measurements on networks: Jacobian spectra, frequency response,
recursive dynamics, perturbation robustness, and the training sweeps
(depth, projection variants, correction ablation, two-branch composition).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DivergenceError, ValidationError
from .linalg import svd_values
from .net import (
    Architecture,
    CorrectionNet,
    Network,
    ParallelBranches,
    StructuredLayer,
    init_network,
    mlp_hidden_for_budget,
)
from .shaping import DCTBand, spectral_cap
from .tasks import add_gaussian_noise
from .train import TrainConfig, Trainer

COND_FLOOR = 1e-12
RECURSE_TOL = 1e-8
RECURSE_MAX_ITERS = 1000
DIVERGENCE_NORM = 1e12
DEFAULT_SIGMAS = (0.01, 0.05, 0.1, 0.2, 0.5)


def derive_seed(*ids):
    return int(np.random.SeedSequence([int(i) for i in ids]).generate_state(1)[0])


def condition_number(values):
    kept = values[values > COND_FLOOR]
    if kept.size == 0:
        return float("inf")
    return float(kept[0] / kept[-1])


@dataclass
class SpectrumReport:
    """``spectra[l]`` has shape ``(n_probes, k)``; index -1 is the whole net."""

    spectra: list
    network: np.ndarray

    @property
    def mean(self):
        return [s.mean(axis=0) for s in self.spectra]

    @property
    def condition(self):
        return [np.array([condition_number(v) for v in s]) for s in self.spectra]


def jacobian_spectrum(net: Network, probes):
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    per_layer = [[] for _ in net.layers]
    whole = []
    for x in probes:
        for l, (layer, xin) in enumerate(zip(net.layers, net.layer_inputs(x))):
            per_layer[l].append(svd_values(layer.jacobian(xin)))
        whole.append(svd_values(net.jacobian(x)))
    return SpectrumReport([np.array(s) for s in per_layer], np.array(whole))


@dataclass
class FrequencyResponse:
    frequencies: np.ndarray
    modes: np.ndarray
    gains: np.ndarray
    per_phase: np.ndarray

    def quartile_means(self, dim):
        """Mean gain over modes in the bottom (< dim/4) and top (>= 3 dim/4) quartiles."""
        low = self.modes < dim / 4
        high = self.modes >= 3 * dim / 4
        return float(self.gains[low].mean()), float(self.gains[high].mean())


def frequency_response(net, sweep):
    if net.in_dim != net.out_dim:
        raise ValidationError(f"frequency response needs a dim-preserving net, got "
                              f"{net.in_dim} -> {net.out_dim}")
    freqs, gains, per_phase = [], [], []
    for f, batch in sweep:
        if batch.shape[1] != net.in_dim:
            raise ValidationError(f"probe width {batch.shape[1]} != net width {net.in_dim}")
        out = net(batch)
        g = np.linalg.norm(out, axis=1) / np.linalg.norm(batch, axis=1)
        freqs.append(f)
        gains.append(g.mean())
        per_phase.append(g)
    freqs = np.array(freqs)
    modes = np.round(freqs * 2 * net.in_dim).astype(int)
    return FrequencyResponse(freqs, modes, np.array(gains), np.array(per_phase))


@dataclass
class RecursionTrace:
    iterates: list
    deltas: np.ndarray
    energies: np.ndarray
    converged: bool
    iterations: int

    def decay_rate(self, skip=0):
        """Geometric decay factor from a log-linear fit of the deltas."""
        d = self.deltas[skip:]
        keep = d > 0
        t = np.arange(d.size)[keep]
        if t.size < 2:
            return 0.0
        slope = np.polyfit(t, np.log(d[keep]), 1)[0]
        return float(np.exp(slope))


def recurse(layer, x0, max_iters=RECURSE_MAX_ITERS, tol=RECURSE_TOL):
    """Iterate ``x <- T(x)`` until the update norm drops below ``tol``."""
    if layer.in_dim != layer.out_dim:
        raise ValidationError("recursion needs a square module")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    x = np.asarray(x0, dtype=np.float64).copy()
    iterates = [x]
    deltas = []
    converged = False
    for _ in range(max_iters):
        nxt = layer.forward(x)[0]
        d = float(np.linalg.norm(nxt - x))
        deltas.append(d)
        iterates.append(nxt)
        x = nxt
        if not np.isfinite(d) or np.linalg.norm(x) > DIVERGENCE_NORM:
            deltas = np.array(deltas)
            trace = RecursionTrace(iterates, deltas, deltas ** 2, False, len(deltas))
            raise DivergenceError("recursion diverged", len(deltas), trace)
        if d < tol:
            converged = True
            break
    deltas = np.array(deltas)
    return RecursionTrace(iterates, deltas, deltas ** 2, converged, len(deltas))


@dataclass
class RobustnessReport:
    sigmas: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    slope: float
    noise_norm: float

    def amplification(self):
        """Slope per unit of input-noise norm."""
        return self.slope / self.noise_norm if self.noise_norm else 0.0


def perturbation_robustness(net, data, sigmas=DEFAULT_SIGMAS, trials=100, seed=0):
    """Monte Carlo ``|f(x + sigma z) - f(x)|`` over trials and samples.

    The same noise directions are reused at every sigma, and the slope is a
    least-squares fit of mean deviation against sigma through the origin.
    """
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if sigmas.ndim != 1 or sigmas.size == 0 or np.any(np.diff(sigmas) <= 0):
        raise ValidationError("sigmas must be a strictly increasing sequence")
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    x = np.atleast_2d(np.asarray(data, dtype=np.float64))
    base = net(x)
    z = [add_gaussian_noise(np.zeros_like(x), 1.0, seed, t) for t in range(trials)]
    noise_norm = float(np.mean([np.linalg.norm(zz, axis=1).mean() for zz in z]))
    means, stds = [], []
    for s in sigmas:
        devs = np.concatenate([np.linalg.norm(net(x + s * zz) - base, axis=1) for zz in z])
        means.append(devs.mean())
        stds.append(devs.std())
    means = np.array(means)
    denom = float(sigmas @ sigmas)
    slope = float(sigmas @ means / denom) if denom > 0 else 0.0
    return RobustnessReport(sigmas, means, np.array(stds), slope, noise_norm)


@dataclass
class DepthRecord:
    depth: int
    final_loss: float
    initial_loss: float
    diverged: bool
    diverged_epoch: int | None = None
    log: object = field(default=None, repr=False)


def depth_sweep(arch: Architecture, depths, task, cfg: TrainConfig):
    """Train one fresh net per depth on the same data; divergence is recorded."""
    width = task.in_dim
    records = []
    for depth in depths:
        if depth < 1:
            raise ValidationError("depths must be >= 1")
        dims = tuple([width] * depth + [task.out_dim])
        net = init_network(replace(arch, dims=dims), derive_seed(cfg.seed, depth))
        trainer = Trainer(net, task, cfg)
        try:
            log = trainer.run()
            records.append(DepthRecord(depth, log.loss[-1], log.loss[0], False, None, log))
        except DivergenceError as err:
            log = err.record
            init = log.loss[0] if log and log.loss else float("nan")
            records.append(DepthRecord(depth, float("nan"), init, True, err.index, log))
    return records


def _validation_metric(log, classification):
    return log.val_acc[-1] if classification else log.val_loss[-1]


def default_variant_layers(arch):
    dims = list(arch.dims)
    return [i for i in range(len(dims) - 1) if dims[i] == dims[i + 1]]


def ablation_projection_variants(task, variants, cfg: TrainConfig, arch: Architecture,
                                 seeds=(0, 1, 2, 3, 4), layers=None):
    """Train each shaping variant on identical data and init seeds.

    The variant replaces the shaping kind of the square layers (or of
    ``layers`` when given). Returns ``{variant: {"runs": [(seed, log, net,
    metric)], "mean": m, "var": v}}``; the metric is validation accuracy
    for classification tasks and validation loss otherwise.
    """
    layers = default_variant_layers(arch) if layers is None else list(layers)
    base = arch.layer_kinds()
    out = {}
    for variant in variants:
        kinds = [variant if i in layers else k for i, k in enumerate(base)]
        a = replace(arch, shaping=kinds)
        runs = []
        for s in seeds:
            net = init_network(a, s)
            log = Trainer(net, task, replace(cfg, seed=s)).run()
            runs.append((s, log, net, _validation_metric(log, task.classification)))
        metrics = np.array([r[3] for r in runs])
        out[variant] = {"runs": runs, "mean": float(metrics.mean()), "var": float(metrics.var())}
    return out


def ablation_residual(task, cfg: TrainConfig, arch: Architecture, seeds=(0, 1, 2, 3, 4)):
    """Paired runs that differ only in whether the correction path is on."""
    pairs = []
    for s in seeds:
        logs = {}
        for flag in (True, False):
            net = init_network(replace(arch, correction=flag), s)
            logs[flag] = Trainer(net, task, replace(cfg, seed=s)).run()
        pairs.append((s, logs[True], logs[False]))
    return pairs


def two_branch_network(dim, seed, passband=0.25, gamma=0.95, correction=True):
    """One layer made of a low-pass and a high-pass structured branch, summed."""
    rng = np.random.default_rng(seed)
    branches = []
    for op in (DCTBand.lowpass(dim, dim, passband), DCTBand.highpass(dim, dim, passband)):
        w = spectral_cap(op, rng.standard_normal((dim, dim)) / np.sqrt(dim), gamma)
        w1 = rng.standard_normal((dim, dim)) / np.sqrt(dim)
        corr = CorrectionNet(w1, np.zeros(dim), np.zeros((dim, dim)), np.zeros(dim))
        branches.append(StructuredLayer(w, op, corr, correction))
    return Network([ParallelBranches(branches)])


def multires_compose(task, cfg: TrainConfig, seed=0, passband=0.25):
    """Two-branch PGNN vs a one-hidden-layer ReLU MLP with matched parameter count."""
    dim = task.in_dim
    pgnn = two_branch_network(dim, seed, passband)
    hidden = mlp_hidden_for_budget(dim, dim, pgnn.n_params())
    mlp = init_network(Architecture(dims=(dim, hidden, dim), model="mlp"), seed)
    logs = {}
    for name, net in (("pgnn", pgnn), ("mlp", mlp)):
        logs[name] = Trainer(net, task, replace(cfg, seed=seed)).run()
    return {"logs": logs, "nets": {"pgnn": pgnn, "mlp": mlp},
            "params": {"pgnn": pgnn.n_params(), "mlp": mlp.n_params()}}
