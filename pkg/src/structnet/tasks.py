"""Deterministic synthetic datasets.

All randomness comes from counter-based Philox streams keyed by
``(seed, purpose, index)``, so any piece of a dataset can be regenerated
without replaying the draws that came before it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .linalg import dct_basis, graph_laplacian, solve_linear

# stream purposes
_SPLIT, _SIGNAL, _NOISE, _LABELS, _EDGES, _PHASE, _INPUT_NOISE = range(7)


def stream(seed, *ids):
    """A Philox generator keyed by ``seed`` and a tuple of integer ids."""
    key = np.random.SeedSequence([int(seed), *map(int, ids)])
    return np.random.Generator(np.random.Philox(key))


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    meta: dict
    extras: dict = field(default_factory=dict)

    @property
    def classification(self):
        return self.targets.ndim == 1 and np.issubdtype(self.targets.dtype, np.integer)

    @property
    def n_samples(self):
        return self.inputs.shape[0]

    @property
    def in_dim(self):
        return self.inputs.shape[1]

    @property
    def out_dim(self):
        if self.classification:
            return int(self.meta["params"]["n_classes"])
        return self.targets.shape[1]

    def to_csv(self, path):
        """One row per sample: split tag, input columns, target column(s)."""
        split = np.empty(self.n_samples, dtype=object)
        split[self.train_idx] = "train"
        split[self.val_idx] = "val"
        targets = self.targets[:, None] if self.targets.ndim == 1 else self.targets
        header = (["split"] + [f"x{i}" for i in range(self.in_dim)]
                  + [f"y{i}" for i in range(targets.shape[1])])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in range(self.n_samples):
                w.writerow([split[r]] + [repr(float(v)) for v in self.inputs[r]]
                           + [str(v) if self.classification else repr(float(v)) for v in targets[r]])


def _split(seed, n, val_fraction):
    if not 0 <= val_fraction < 1:
        raise ValidationError("val_fraction must lie in [0, 1)")
    perm = stream(seed, _SPLIT).permutation(n)
    n_val = int(round(val_fraction * n))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _meta(name, seed, **params):
    return {"generator": name, "seed": int(seed), "params": params}


def regenerate(meta):
    """Rebuild a dataset from its ``meta`` record."""
    gens = {
        "signal_recovery": gen_signal_recovery,
        "multiscale": gen_multiscale_signal,
        "graph_classification": gen_graph_classification,
    }
    return gens[meta["generator"]](meta["seed"], **meta["params"])


def lowband_size(dim):
    """Number of cosine modes strictly below ``dim / 4``."""
    return max(1, int(np.ceil(dim / 4)))


def gen_signal_recovery(seed, n_samples=512, dim=32, noise_std=0.1, val_fraction=0.2):
    """Denoise smooth signals built from random low-order cosine modes."""
    if dim < 2:
        raise ValidationError("signal recovery needs dim >= 2")
    m = lowband_size(dim)
    coeffs = np.zeros((n_samples, dim))
    coeffs[:, :m] = stream(seed, _SIGNAL).standard_normal((n_samples, m)) * np.sqrt(dim / m)
    targets = coeffs @ dct_basis(dim)
    noise = stream(seed, _NOISE).standard_normal((n_samples, dim))
    inputs = targets + noise_std * noise
    train_idx, val_idx = _split(seed, n_samples, val_fraction)
    meta = _meta("signal_recovery", seed, n_samples=n_samples, dim=dim,
                 noise_std=noise_std, val_fraction=val_fraction)
    return Dataset(inputs, targets, train_idx, val_idx, meta, {"coefficients": coeffs})


def multiscale_modes(dim):
    """Cosine-mode indices of the low and high component."""
    return 2, int(round(0.75 * dim))


def gen_multiscale_signal(seed, n_samples=512, dim=32, val_fraction=0.2):
    """Low-frequency plus high-frequency sinusoid with random phases.

    Inputs are the sampled composite signal and the target is the same
    signal, so a band-limited linear path can only recover part of it.
    ``extras`` holds the two components.
    """
    if dim < 8:
        raise ValidationError("multiscale signal needs dim >= 8")
    k_low, k_high = multiscale_modes(dim)
    grid = (2 * np.arange(dim) + 1) / (2 * dim)
    phases = stream(seed, _PHASE).uniform(-np.pi / 10, np.pi / 10, (n_samples, 2))
    amps = stream(seed, _SIGNAL).uniform(0.75, 1.25, (n_samples, 2))
    low = amps[:, :1] * np.cos(np.pi * k_low * grid + phases[:, :1])
    high_raw = amps[:, 1:] * np.cos(np.pi * k_high * grid + phases[:, 1:])
    targets = low + high_raw
    high = targets - low
    train_idx, val_idx = _split(seed, n_samples, val_fraction)
    meta = _meta("multiscale", seed, n_samples=n_samples, dim=dim, val_fraction=val_fraction)
    return Dataset(targets.copy(), targets, train_idx, val_idx, meta,
                   {"low": low, "high": high, "modes": (k_low, k_high)})


def _planted_partition(seed, n_nodes, n_classes, homophily, avg_degree):
    sub = 0
    while True:
        labels = stream(seed, _LABELS, sub).integers(n_classes, size=n_nodes)
        if len(np.unique(labels)) == n_classes:
            break
        sub += 1
    iu, ju = np.triu_indices(n_nodes, k=1)
    same = labels[iu] == labels[ju]
    n_edges = avg_degree * n_nodes / 2
    n_same = max(int(same.sum()), 1)
    n_diff = max(int((~same).sum()), 1)
    p_in = min(1.0, homophily * n_edges / n_same)
    p_out = min(1.0, (1.0 - homophily) * n_edges / n_diff)
    draw = stream(seed, _EDGES, sub).random(iu.shape[0])
    keep = draw < np.where(same, p_in, p_out)
    edges = [(int(i), int(j)) for i, j in zip(iu[keep], ju[keep])]
    return labels, edges, sub


def gen_graph_classification(seed, n_nodes=128, n_classes=4, homophily=0.9, n_samples=512,
                             noise_std=1.0, avg_degree=8.0, val_fraction=0.2):
    """Classify noisy graph signals by which planted community they light up.

    A planted-partition graph over ``n_nodes`` nodes splits them into
    ``n_classes`` communities. Class ``c``'s prototype is the community
    indicator diffused once through ``(I + L)^-1``; with perfect homophily
    the indicator is harmonic and survives unchanged, with mixing it bleeds
    into other communities. Each sample is a prototype plus Gaussian noise.
    ``extras["edges"]`` feeds the Laplacian shaping operator.
    """
    if n_classes < 2:
        raise ValidationError("graph classification needs n_classes >= 2")
    if not 0 <= homophily <= 1:
        raise ValidationError("homophily must lie in [0, 1]")
    node_labels, edges, sub = _planted_partition(seed, n_nodes, n_classes, homophily, avg_degree)
    lap = graph_laplacian(n_nodes, edges)
    indicators = (node_labels[None, :] == np.arange(n_classes)[:, None]).astype(np.float64)
    prototypes = solve_linear(np.eye(n_nodes) + lap, indicators.T).T * np.sqrt(n_classes)
    labels = stream(seed, _SIGNAL).integers(n_classes, size=n_samples)
    noise = stream(seed, _NOISE).standard_normal((n_samples, n_nodes))
    inputs = prototypes[labels] + noise_std * noise
    train_idx, val_idx = _split(seed, n_samples, val_fraction)
    meta = _meta("graph_classification", seed, n_nodes=n_nodes, n_classes=n_classes,
                 homophily=homophily, n_samples=n_samples, noise_std=noise_std,
                 avg_degree=avg_degree, val_fraction=val_fraction)
    extras = {"edges": edges, "node_labels": node_labels, "prototypes": prototypes,
              "partition_subseed": sub}
    return Dataset(inputs, labels.astype(np.int64), train_idx, val_idx, meta, extras)


def gen_freq_sweep(dim, n_freqs, phases=(0.0, np.pi)):
    """Unit-norm cosine probes at evenly spaced modes from 1 up to ``dim - 1``.

    Returns ``[(frequency, probes), ...]`` with frequency in cycles per
    sample (mode ``k`` is ``k / (2 dim)``) and ``probes`` of shape
    ``(len(phases), dim)``. Phases that are multiples of pi keep every probe
    inside a single cosine mode; other phases leak into neighbouring modes.
    """
    if n_freqs < 2:
        raise ValidationError("frequency sweep needs n_freqs >= 2")
    if n_freqs > dim - 1:
        raise ValidationError(f"at most {dim - 1} distinct modes for dim={dim}")
    modes = np.unique(np.round(np.linspace(1, dim - 1, n_freqs)).astype(int))
    grid = (2 * np.arange(dim) + 1) / (2 * dim)
    sweep = []
    for k in modes:
        batch = np.array([np.cos(np.pi * k * grid + ph) for ph in phases])
        batch /= np.linalg.norm(batch, axis=1, keepdims=True)
        sweep.append((k / (2 * dim), batch))
    return sweep


def sweep_modes(sweep, dim):
    return np.array([int(round(f * 2 * dim)) for f, _ in sweep])


def add_gaussian_noise(x, sigma, seed, index=0):
    """``x + sigma z`` with ``z`` standard normal, fixed by ``(seed, index)``."""
    if sigma < 0:
        raise ValidationError("sigma must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0:
        return x.copy()
    return x + sigma * stream(seed, _INPUT_NOISE, index).standard_normal(x.shape)
