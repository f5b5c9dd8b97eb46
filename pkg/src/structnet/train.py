"""Losses, optimisers and the mini-batch training loop.

Every logged epoch ends with a measurement pass over the full training
split at the current parameters. That pass produces the loss, the global
gradient norm (with the gradient kept as a snapshot), each layer's mean
correction norm and each layer's per-neuron output variance. Epoch 0 is
measured before the first update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ShapeError, ValidationError


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    loss: str = "mse"
    log_every: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ValidationError("learning_rate must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in ("mse", "cross_entropy"):
            raise ValidationError(f"unknown loss {self.loss!r}")
        if self.log_every < 1:
            raise ValidationError("log_every must be >= 1")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ValidationError(f"{name} must lie in [0, 1)")
        if not 0 <= self.momentum < 1:
            raise ValidationError("momentum must lie in [0, 1)")
        if not self.eps > 0:
            raise ValidationError("eps must be positive")


def mse_loss(pred, target):
    """Mean squared error over every entry, with its gradient."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def cross_entropy_loss(logits, cls):
    """Softmax cross-entropy averaged over the batch, with its gradient."""
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    z = logits[None, :] if single else logits
    labels = np.atleast_1d(np.asarray(cls))
    if labels.shape[0] != z.shape[0]:
        raise ShapeError(f"{labels.shape[0]} labels for {z.shape[0]} rows")
    if np.any(labels < 0) or np.any(labels >= z.shape[1]):
        raise ValidationError(f"class index out of range [0, {z.shape[1]})")
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(z.shape[0])
    loss = float(np.mean(logsum - shifted[rows, labels]))
    grad = np.exp(shifted - logsum[:, None])
    grad[rows, labels] -= 1.0
    grad /= z.shape[0]
    return loss, (grad[0] if single else grad)


def _check_aligned(params, grads):
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"parameter {i}: shape {p.shape} vs gradient {g.shape}")


def sgd_step(params, grads, state, lr, momentum=0.0):
    """In-place SGD with optional heavy-ball momentum."""
    _check_aligned(params, grads)
    if momentum:
        vel = state.setdefault("velocity", [np.zeros_like(p) for p in params])
        for p, g, v in zip(params, grads, vel):
            v *= momentum
            v += g
            p -= lr * v
    else:
        for p, g in zip(params, grads):
            p -= lr * g
    return params, state


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place Adam with bias-corrected moment estimates."""
    _check_aligned(params, grads)
    if "m" not in state:
        state["t"] = 0
        state["m"] = [np.zeros_like(p) for p in params]
        state["v"] = [np.zeros_like(p) for p in params]
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    activation_variance: list = field(default_factory=list)
    last_grads: list | None = None

    @property
    def n_layers(self):
        return len(self.residual_norms[0]) if self.residual_norms else 0

    def residual_matrix(self):
        """Records x layers array of mean correction norms."""
        return np.array(self.residual_norms)

    def variance_grid(self, layer):
        """Neurons x records array of output variances for one layer."""
        return np.array([v[layer] for v in self.activation_variance]).T

    def final_loss(self):
        return self.loss[-1]

    def tail(self, start_epoch):
        """Records from ``start_epoch`` onwards, as a new log."""
        keep = [i for i, e in enumerate(self.epochs) if e >= start_epoch]
        out = TrainLog()
        for name in ("epochs", "loss", "val_loss", "val_acc", "grad_norm",
                     "residual_norms", "activation_variance"):
            getattr(out, name).extend(getattr(self, name)[i] for i in keep)
        out.last_grads = self.last_grads
        return out


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


class Trainer:
    """Resumable training run over one network and one dataset."""

    def __init__(self, net, data, cfg: TrainConfig):
        if data.inputs.shape[1] != net.in_dim:
            raise ShapeError(f"task inputs have width {data.inputs.shape[1]}, net expects {net.in_dim}")
        self.net = net
        self.data = data
        self.cfg = cfg
        if cfg.loss == "cross_entropy" and not data.classification:
            raise ValidationError("cross_entropy loss needs a classification task")
        if cfg.loss == "mse" and data.classification:
            raise ValidationError("mse loss needs a regression task")
        self.rng = np.random.Generator(np.random.PCG64(cfg.seed))
        self.opt_state = {}
        self.epoch = 0
        self.log = TrainLog()

    def _loss(self, pred, target):
        if self.cfg.loss == "mse":
            return mse_loss(pred, target)
        return cross_entropy_loss(pred, target)

    def _step(self, params, grads):
        cfg = self.cfg
        if cfg.optimizer == "sgd":
            sgd_step(params, grads, self.opt_state, cfg.learning_rate, cfg.momentum)
        else:
            adam_step(params, grads, self.opt_state, cfg.learning_rate,
                      cfg.beta1, cfg.beta2, cfg.eps)

    def measure(self):
        """Record one TrainLog entry at the current parameters."""
        d = self.data
        x = d.inputs[d.train_idx]
        y, caches = self.net.forward(x)
        loss, dy = self._loss(y, d.targets[d.train_idx])
        _, grads = self.net.backward(caches, dy)
        res, var = [], []
        for c in caches:
            corr = c.correction
            res.append(0.0 if corr is None else float(np.mean(np.linalg.norm(corr, axis=1))))
            var.append(np.var(c.output, axis=0))
        val_loss = val_acc = float("nan")
        if len(d.val_idx):
            pred = self.net(d.inputs[d.val_idx])
            val_loss = self._loss(pred, d.targets[d.val_idx])[0]
            if d.classification:
                val_acc = float(np.mean(pred.argmax(axis=1) == d.targets[d.val_idx]))
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {self.epoch}", self.epoch, self.log)
        log = self.log
        log.epochs.append(self.epoch)
        log.loss.append(loss)
        log.val_loss.append(val_loss)
        log.val_acc.append(val_acc)
        log.grad_norm.append(global_norm(grads))
        log.residual_norms.append(res)
        log.activation_variance.append(var)
        log.last_grads = [g.copy() for g in grads]

    def run_epoch(self):
        d = self.data
        params = [p for _, p in self.net.params()]
        order = self.rng.permutation(d.train_idx)
        bs = self.cfg.batch_size
        for start in range(0, len(order), bs):
            idx = order[start:start + bs]
            y, caches = self.net.forward(d.inputs[idx])
            loss, dy = self._loss(y, d.targets[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {self.epoch + 1}",
                                      self.epoch + 1, self.log)
            _, grads = self.net.backward(caches, dy)
            self._step(params, grads)
        self.epoch += 1
        if not all(np.all(np.isfinite(p)) for p in params):
            raise DivergenceError(f"non-finite parameters at epoch {self.epoch}",
                                  self.epoch, self.log)

    def run(self, epochs=None):
        """Train until ``epochs`` more epochs have run (default: up to cfg.epochs)."""
        target = self.cfg.epochs if epochs is None else self.epoch + epochs
        with np.errstate(over="ignore", invalid="ignore"):
            if self.epoch == 0 and not self.log.epochs:
                self.measure()
            while self.epoch < target:
                self.run_epoch()
                if self.epoch % self.cfg.log_every == 0 or self.epoch == self.cfg.epochs:
                    self.measure()
        return self.log


def train(net, task, cfg: TrainConfig):
    return Trainer(net, task, cfg).run()
