"""Versioned little-endian checkpoint files.

Layout::

    magic    4 bytes   b"SNCK"
    version  u16
    count    u32       number of sections
    section  repeated:
        name_len u16, name (utf-8)
        kind     u8    0 = JSON text, 1 = float64 array, 2 = int64 array
        JSON:    length u64, utf-8 bytes (sorted keys, compact separators)
        array:   ndim u8, shape u64 * ndim, raw little-endian data

Sections are written in a fixed order: ``meta`` (format, epoch, network
structure, train config), ``rng`` (bit-generator state), then named arrays
``param/<registry name>``, ``shaping/<layer path>/<name>`` and
``optim/<slot>/<index>``. Equal checkpoints serialise to equal bytes.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError
from .net import CorrectionNet, DenseLayer, Network, ParallelBranches, StructuredLayer
from .shaping import shaping_from_state
from .train import TrainConfig, Trainer

MAGIC = b"SNCK"
VERSION = 1
_JSON, _F64, _I64 = 0, 1, 2


def _layer_spec(layer, path, arrays):
    if isinstance(layer, ParallelBranches):
        return {"type": "branches",
                "branches": [_layer_spec(b, f"{path}.branch{k}", arrays)
                             for k, b in enumerate(layer.branches)]}
    if isinstance(layer, DenseLayer):
        return {"type": "dense", "activation": layer.activation,
                "in": layer.in_dim, "out": layer.out_dim}
    op = layer.shaping
    for name, arr in op.arrays().items():
        if name != "p":
            arrays[f"shaping/{path}/{name}"] = arr
    return {"type": "structured", "in": layer.in_dim, "out": layer.out_dim,
            "kind": op.kind, "settings": op.settings(),
            "correction": layer.correction is not None,
            "hidden": None if layer.correction is None else layer.correction.w1.shape[0],
            "enabled": layer.correction_enabled, "outer": layer.outer_activation}


def network_structure(net):
    """JSON-able structure plus fixed shaping arrays (not trainable ones)."""
    arrays = {}
    layers = [_layer_spec(layer, str(i), arrays) for i, layer in enumerate(net.layers)]
    return {"layers": layers}, arrays


def _build_layer(spec, path, arrays):
    if spec["type"] == "branches":
        return ParallelBranches([_build_layer(b, f"{path}.branch{k}", arrays)
                                 for k, b in enumerate(spec["branches"])])
    n_in, n_out = spec["in"], spec["out"]
    if spec["type"] == "dense":
        return DenseLayer(np.zeros((n_out, n_in)), np.zeros(n_out), spec["activation"])
    prefix = f"shaping/{path}/"
    own = {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}
    if spec["kind"] == "learned_projection":
        own["p"] = np.eye(n_out)
    op = shaping_from_state(spec["kind"], n_out, n_in, spec["settings"], own)
    corr = None
    if spec["correction"]:
        h = spec["hidden"]
        corr = CorrectionNet(np.zeros((h, n_in)), np.zeros(h), np.zeros((n_out, h)), np.zeros(n_out))
    return StructuredLayer(np.zeros((n_out, n_in)), op, corr, spec["enabled"], spec["outer"])


def build_network(structure, arrays, params):
    """Rebuild a network and copy ``params`` (registry name -> array) into it."""
    net = Network([_build_layer(s, str(i), arrays) for i, s in enumerate(structure["layers"])])
    for name, p in net.params():
        if name not in params:
            raise CheckpointError(f"checkpoint lacks parameter {name!r}")
        if params[name].shape != p.shape:
            raise CheckpointError(f"parameter {name!r}: stored shape {params[name].shape} "
                                  f"!= expected {p.shape}")
        p[...] = params[name]
    return net


@dataclass
class Checkpoint:
    network: Network
    epoch: int = 0
    train_config: TrainConfig | None = None
    optimizer_state: dict | None = None
    rng_state: dict | None = None
    version: int = VERSION
    extra: dict | None = None


def checkpoint_from_trainer(trainer: Trainer, extra=None):
    return Checkpoint(trainer.net, trainer.epoch, trainer.cfg, trainer.opt_state,
                      trainer.rng.bit_generator.state, VERSION, extra)


def resume_trainer(ckpt: Checkpoint, data):
    """A Trainer positioned exactly where the checkpointed run stopped."""
    trainer = Trainer(ckpt.network, data, ckpt.train_config)
    trainer.epoch = ckpt.epoch
    trainer.opt_state = _copy_state(ckpt.optimizer_state or {})
    if ckpt.rng_state is not None:
        trainer.rng.bit_generator.state = ckpt.rng_state
    return trainer


def _copy_state(state):
    out = {}
    for k, v in state.items():
        out[k] = [a.copy() for a in v] if isinstance(v, list) else v
    return out


def _encode(ckpt: Checkpoint):
    structure, fixed = network_structure(ckpt.network)
    opt = ckpt.optimizer_state or {}
    meta = {
        "format": "structnet-checkpoint",
        "epoch": int(ckpt.epoch),
        "network": structure,
        "train_config": None if ckpt.train_config is None else dataclasses.asdict(ckpt.train_config),
        "optimizer": {k: v for k, v in opt.items() if not isinstance(v, list)},
        "optimizer_slots": sorted(k for k, v in opt.items() if isinstance(v, list)),
        "extra": ckpt.extra,
    }
    sections = [("meta", meta), ("rng", ckpt.rng_state)]
    sections += [(f"param/{n}", p) for n, p in ckpt.network.params()]
    sections += [(n, fixed[n]) for n in sorted(fixed)]
    for slot in meta["optimizer_slots"]:
        sections += [(f"optim/{slot}/{i}", a) for i, a in enumerate(opt[slot])]
    return sections


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def to_bytes(ckpt: Checkpoint):
    sections = _encode(ckpt)
    buf = [MAGIC, struct.pack("<HI", ckpt.version, len(sections))]
    for name, value in sections:
        raw = name.encode("utf-8")
        buf.append(struct.pack("<H", len(raw)) + raw)
        if isinstance(value, np.ndarray):
            arr = np.ascontiguousarray(value)
            kind = _I64 if np.issubdtype(arr.dtype, np.integer) else _F64
            arr = arr.astype("<i8" if kind == _I64 else "<f8")
            buf.append(struct.pack("<BB", kind, arr.ndim))
            buf.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            buf.append(arr.tobytes())
        else:
            data = _dumps(value)
            buf.append(struct.pack("<BQ", _JSON, len(data)) + data)
    return b"".join(buf)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def from_bytes(data):
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise CheckpointError("not a structnet checkpoint (bad magic bytes)")
    version, count = r.unpack("<HI")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    sections = {}
    for _ in range(count):
        (n,) = r.unpack("<H")
        name = r.take(n).decode("utf-8")
        (kind,) = r.unpack("<B")
        if kind == _JSON:
            (length,) = r.unpack("<Q")
            sections[name] = json.loads(r.take(length).decode("utf-8"))
        elif kind in (_F64, _I64):
            (ndim,) = r.unpack("<B")
            shape = r.unpack(f"<{ndim}Q") if ndim else ()
            size = int(np.prod(shape)) if ndim else 1
            dtype = "<f8" if kind == _F64 else "<i8"
            arr = np.frombuffer(r.take(8 * size), dtype=dtype).reshape(shape)
            sections[name] = arr.astype(np.float64 if kind == _F64 else np.int64)
        else:
            raise CheckpointError(f"section {name!r} has unknown kind {kind}")
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after last section")
    if "meta" not in sections:
        raise CheckpointError("checkpoint has no meta section")
    meta = sections["meta"]
    params = {k[len("param/"):]: v for k, v in sections.items() if k.startswith("param/")}
    fixed = {k: v for k, v in sections.items() if k.startswith("shaping/")}
    net = build_network(meta["network"], fixed, params)
    opt = dict(meta["optimizer"])
    for slot in meta["optimizer_slots"]:
        prefix = f"optim/{slot}/"
        items = sorted((int(k[len(prefix):]), v) for k, v in sections.items() if k.startswith(prefix))
        opt[slot] = [v.copy() for _, v in items]
    cfg = None if meta["train_config"] is None else TrainConfig(**meta["train_config"])
    return Checkpoint(net, meta["epoch"], cfg, opt, sections.get("rng"), version, meta["extra"])


def save_checkpoint(path, ckpt):
    if isinstance(ckpt, Trainer):
        ckpt = checkpoint_from_trainer(ckpt)
    with open(path, "wb") as fh:
        fh.write(to_bytes(ckpt))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
