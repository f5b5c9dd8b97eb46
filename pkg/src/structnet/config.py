"""Line-oriented experiment configuration.

Grammar (one statement per line)::

    # comment                      (blank lines and comments ignored)
    section.key = value

``value`` is a scalar (int, float, ``true``/``false``, bare string) or a
comma-separated list. Sections and keys are fixed; anything unknown is an
error that names the line and key. :meth:`ExperimentConfig.to_text` emits
the canonical form with every default filled in, and parsing that text
gives back an equal config.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from .errors import ConfigError, ValidationError
from .shaping import KINDS
from .train import TrainConfig

EXPERIMENT_KINDS = ("train", "jacobian", "freq", "recurse", "perturb", "depth",
                    "ablate-projection", "ablate-residual", "multires")
TASKS = ("signal_recovery", "multiscale", "graph_classification")


@dataclass
class ExperimentSection:
    kind: str = "train"
    seeds: list = field(default_factory=lambda: [0])
    train_first: bool = True
    svg: bool = True
    checkpoint: bool = False


@dataclass
class ArchSection:
    model: str = "structured"
    dims: list = field(default_factory=lambda: [32, 32, 32])
    shaping: list = field(default_factory=lambda: ["dct_band"])
    correction: bool = True
    gamma: float = 0.95
    hidden: int = 0
    outer_activation: str = "none"
    passband: float = 0.25
    band: str = "low"
    rank: int = 0
    alpha: float = 1.0
    density: float = 0.5
    scale: float = 1.0
    graph: str = "path"


@dataclass
class TaskSection:
    name: str = "signal_recovery"
    n_samples: int = 512
    dim: int = 32
    noise_std: float = 0.1
    n_nodes: int = 128
    n_classes: int = 4
    homophily: float = 0.9
    avg_degree: float = 8.0
    val_fraction: float = 0.2


@dataclass
class TrainSection:
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "mse"
    log_every: int = 1


@dataclass
class DiagSection:
    n_probes: int = 8
    n_freqs: int = 16
    sigmas: list = field(default_factory=lambda: [0.01, 0.05, 0.1, 0.2, 0.5])
    trials: int = 100
    max_iters: int = 1000
    tol: float = 1e-8
    depths: list = field(default_factory=lambda: [2, 3, 4, 5, 6, 7, 8, 9, 10])
    variants: list = field(default_factory=lambda: [
        "identity", "sparsity_mask", "dct_band", "laplacian_smooth", "learned_projection"])


SECTIONS = {
    "experiment": ExperimentSection,
    "arch": ArchSection,
    "task": TaskSection,
    "train": TrainSection,
    "diag": DiagSection,
}

# element types of list-valued keys
_LIST_TYPES = {
    ("experiment", "seeds"): int,
    ("arch", "dims"): int,
    ("arch", "shaping"): str,
    ("diag", "sigmas"): float,
    ("diag", "depths"): int,
    ("diag", "variants"): str,
}

_CHOICES = {
    ("experiment", "kind"): EXPERIMENT_KINDS,
    ("arch", "model"): ("structured", "mlp"),
    ("arch", "shaping"): KINDS,
    ("arch", "outer_activation"): ("none", "tanh", "relu"),
    ("arch", "band"): ("low", "high"),
    ("arch", "graph"): ("path", "task"),
    ("task", "name"): TASKS,
    ("train", "optimizer"): ("sgd", "adam"),
    ("train", "loss"): ("mse", "cross_entropy"),
    ("diag", "variants"): KINDS,
}


@dataclass
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    arch: ArchSection = field(default_factory=ArchSection)
    task: TaskSection = field(default_factory=TaskSection)
    train: TrainSection = field(default_factory=TrainSection)
    diag: DiagSection = field(default_factory=DiagSection)

    def to_text(self):
        lines = []
        for name in SECTIONS:
            section = getattr(self, name)
            for f in fields(section):
                lines.append(f"{name}.{f.name} = {_format(getattr(section, f.name))}")
        return "\n".join(lines) + "\n"

    def task_input_dim(self):
        return self.task.n_nodes if self.task.name == "graph_classification" else self.task.dim

    def task_output_dim(self):
        return self.task.n_classes if self.task.name == "graph_classification" else self.task.dim


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(raw, typ, line, key):
    try:
        if typ is bool:
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"expected {typ.__name__}, got {raw!r}", line, key) from None


def parse_config(text):
    cfg = ExperimentConfig()
    where = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'section.key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise ConfigError("key must be 'section.key'", lineno, key)
        sec_name, name = key.split(".", 1)
        if sec_name not in SECTIONS:
            raise ConfigError(f"unknown section {sec_name!r}", lineno, key)
        section = getattr(cfg, sec_name)
        if name not in {f.name for f in fields(section)}:
            raise ConfigError("unknown key", lineno, key)
        cur = getattr(section, name)
        if (sec_name, name) in _LIST_TYPES:
            elem = _LIST_TYPES[(sec_name, name)]
            items = [s.strip() for s in value.split(",") if s.strip()]
            if not items:
                raise ConfigError("empty list", lineno, key)
            parsed = [_coerce(s, elem, lineno, key) for s in items]
        else:
            parsed = _coerce(value, type(cur), lineno, key)
        choices = _CHOICES.get((sec_name, name))
        if choices is not None:
            for v in parsed if isinstance(parsed, list) else [parsed]:
                if v not in choices:
                    raise ConfigError(f"unknown value {v!r} (expected one of {', '.join(choices)})",
                                      lineno, key)
        setattr(section, name, parsed)
        where[key] = lineno
    _validate(cfg, where)
    return cfg


def _validate(cfg, where):
    def fail(msg, key):
        raise ConfigError(msg, where.get(key), key)

    dims = cfg.arch.dims
    if len(dims) < 2 or min(dims) < 1:
        fail("dims need at least two positive entries", "arch.dims")
    if len(cfg.arch.shaping) not in (1, len(dims) - 1):
        fail(f"{len(cfg.arch.shaping)} shaping kinds for {len(dims) - 1} layers", "arch.shaping")
    if dims[0] != cfg.task_input_dim():
        fail(f"first layer width {dims[0]} does not match task input width "
             f"{cfg.task_input_dim()}", "arch.dims")
    if dims[-1] != cfg.task_output_dim():
        fail(f"last layer width {dims[-1]} does not match task output width "
             f"{cfg.task_output_dim()}", "arch.dims")
    if not cfg.experiment.seeds:
        fail("seed list is empty", "experiment.seeds")
    if cfg.arch.gamma < 0:
        fail("gamma must be >= 0 (0 disables the cap)", "arch.gamma")
    train_fields = {f.name: getattr(cfg.train, f.name) for f in fields(cfg.train)}
    try:
        TrainConfig(**train_fields)
    except ValidationError as err:
        msg = str(err)
        names = [n for n in train_fields if msg.startswith(n) or f" {n}" in msg]
        fail(msg, f"train.{names[0]}" if names else "train")
    classification = cfg.task.name == "graph_classification"
    if classification != (cfg.train.loss == "cross_entropy"):
        fail("graph_classification pairs with cross_entropy, regression tasks with mse",
             "train.loss")
    if cfg.arch.graph == "task" and not classification:
        fail("graph = task needs the graph_classification task", "arch.graph")
    if cfg.diag.sigmas != sorted(set(cfg.diag.sigmas)):
        fail("sigmas must be strictly increasing", "diag.sigmas")


def replace_section(cfg, name, **changes):
    """Copy of ``cfg`` with fields of one section replaced."""
    return dataclasses.replace(cfg, **{name: dataclasses.replace(getattr(cfg, name), **changes)})
