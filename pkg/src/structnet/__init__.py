"""Structured neural layers: a shaped linear path plus a small learned
correction, trained with hand-written reverse mode, and the diagnostics
used to study them."""

from .checkpoint import Checkpoint, load_checkpoint, resume_trainer, save_checkpoint
from .config import ExperimentConfig, parse_config
from .diagnostics import (
    frequency_response,
    jacobian_spectrum,
    perturbation_robustness,
    recurse,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DivergenceError,
    NumericError,
    ShapeError,
    StaleCacheError,
    StructnetError,
    ValidationError,
)
from .linalg import (
    dct_basis,
    graph_laplacian,
    matmul,
    solve_linear,
    spectral_norm_estimate,
    svd_values,
)
from .net import Architecture, Network, StructuredLayer, init_network, jacobian
from .shaping import apply_shaping, make_shaping, shaping_vjp, spectral_cap
from .svg import emit_svg
from .tasks import (
    gen_freq_sweep,
    gen_graph_classification,
    gen_multiscale_signal,
    gen_signal_recovery,
)
from .train import TrainConfig, Trainer, train

__version__ = "0.1.0"
