"""Scratch, FeatureExtractor, FineTune and Hybrid networks over a named-block
backbone, plus the ``LFWT`` weights file format."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Sex
from .errors import DataError, FormatError, ShapeError
from .nn import Block, Concat, Conv2D, Dense, Dropout, Flatten, GlobalAvgPool2D, MaxPool2D, NetworkSpec, Rng
from .nn.network import init_params

HEAD = "head"
HEAD_UNITS = 1024
META = "meta"
FUSION = "fusion"
MODEL_IDS = ("scratch", "feature-extractor", "finetune", "hybrid")
REPORT_NAMES = {
    "scratch": "Scratch",
    "feature-extractor": "FeatureExtractor",
    "finetune": "FineTune",
    "hybrid": "Hybrid",
}


@dataclass(frozen=True)
class BackboneSpec:
    blocks: tuple[Block, ...]
    channels: int
    input_shape: tuple[int, int, int]
    provenance: str = "random"
    params: dict | None = field(default=None, compare=False, repr=False)
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.blocks) < 3:
            raise ShapeError(f"a backbone needs at least 3 blocks, got {len(self.blocks)}")
        if self.provenance not in ("random", "pretext_pretrained", "weights_file"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        out = self.network().output_shape()
        if len(out) != 3 or out[-1] != self.channels:
            raise ShapeError(f"backbone must end in an HxWx{self.channels} map, got {out}")

    @property
    def block_names(self):
        return [b.name for b in self.blocks]

    def network(self):
        return NetworkSpec({"image": self.input_shape}, self.blocks, "backbone")


def tiny_conv_backbone(input_shape=(32, 32, 3)) -> BackboneSpec:
    """Five blocks, C = 32: conv8-pool, conv16-pool, conv16, conv32-pool, conv32."""
    conv = lambda f: Conv2D(f, (3, 3), 1, "same", "relu")  # noqa: E731
    blocks = (
        Block("block1", (conv(8), MaxPool2D(2)), inputs=("image",)),
        Block("block2", (conv(16), MaxPool2D(2))),
        Block("block3", (conv(16),)),
        Block("block4", (conv(32), MaxPool2D(2))),
        Block("block5", (conv(32),)),
    )
    return BackboneSpec(blocks, 32, tuple(input_shape))


def head_block(trainable=True, truncated=False) -> Block:
    layers = (GlobalAvgPool2D(), Dense(HEAD_UNITS, "relu"))
    if not truncated:
        layers += (Dense(1, "sigmoid"),)
    return Block(HEAD, layers, trainable)


def head_param_count(channels: int) -> int:
    return HEAD_UNITS * channels + 2 * HEAD_UNITS + 1


def build_scratch(input_size=128, channels=1) -> NetworkSpec:
    """Four conv(3x3, same, relu)+pool(2) stages (32, 64, 128, 128 filters),
    then Flatten, Dense(256, relu), Dropout(0.5), Dense(1, sigmoid)."""
    blocks = [
        Block(f"conv{i}", (Conv2D(f, (3, 3), 1, "same", "relu"), MaxPool2D(2)))
        for i, f in enumerate((32, 64, 128, 128), start=1)
    ]
    blocks.append(Block("classifier", (Flatten(), Dense(256, "relu"), Dropout(0.5), Dense(1, "sigmoid"))))
    return NetworkSpec({"image": (input_size, input_size, channels)}, blocks, "scratch")


def build_feature_extractor(backbone: BackboneSpec) -> NetworkSpec:
    if len(backbone.blocks) < 3:
        raise ShapeError("a backbone needs at least 3 blocks")
    blocks = [replace(b, trainable=False) for b in backbone.blocks] + [head_block()]
    return NetworkSpec({"image": backbone.input_shape}, blocks, "feature-extractor")


def backbone_blocks(net: NetworkSpec):
    return [b.name for b in net.blocks if b.name not in (HEAD, META, FUSION)]


def finetune_trainable(net: NetworkSpec):
    """Last two backbone blocks plus every non-backbone block."""
    bb = backbone_blocks(net)
    return bb[-2:] + [n for n in net.block_names if n not in bb]


def build_finetune(net: NetworkSpec, trained):
    """Unfreeze the last two backbone blocks of a trained FeatureExtractor.

    ``trained`` is a training result carrying the best checkpoint; values
    are copied unchanged, only trainable flags move.
    """
    params = getattr(trained, "params", None)
    if trained is None or params is None or getattr(trained, "best_epoch", None) is None:
        raise DataError("fine-tuning needs a trained FeatureExtractor with a best checkpoint")
    if len(backbone_blocks(net)) < 3:
        raise ShapeError("a backbone needs at least 3 blocks")
    ft = net.with_trainable(finetune_trainable(net))
    ft = NetworkSpec(ft.input_shapes, ft.blocks, "finetune")
    return ft, {k: v.copy() for k, v in params.items()}


@dataclass(frozen=True)
class HybridSpec:
    hidden: tuple[int, ...] = (16, 16, 16)
    metadata_width: int = 4


def build_hybrid(backbone: BackboneSpec, spec: HybridSpec = HybridSpec()) -> NetworkSpec:
    """Image branch (backbone + head up to its 1024-unit layer) and a metadata
    perceptron, concatenated into one sigmoid unit. Backbone trainability
    follows the fine-tuning regime."""
    blocks = [replace(b, trainable=False) for b in backbone.blocks]
    blocks[0] = replace(blocks[0], inputs=("image",))
    blocks.append(head_block(truncated=True))
    blocks.append(Block(META, tuple(Dense(h, "relu") for h in spec.hidden), inputs=("metadata",)))
    blocks.append(Block(FUSION, (Concat(), Dense(1, "sigmoid")), inputs=(HEAD, META)))
    net = NetworkSpec({"image": backbone.input_shape, "metadata": (spec.metadata_width,)}, blocks, "hybrid")
    return net.with_trainable(finetune_trainable(net))


def encode_metadata(record) -> np.ndarray:
    """[age/100 or 0, is_male, is_female, is_unknown_sex]."""
    age = 0.0 if record.age_years is None else record.age_years / 100.0
    sex = record.sex
    return np.array(
        [age, sex == Sex.MALE, sex == Sex.FEMALE, sex not in (Sex.MALE, Sex.FEMALE)], dtype=np.float32
    )


def build(model_id: str, backbone: BackboneSpec | None = None, input_size=128) -> NetworkSpec:
    if model_id == "scratch":
        return build_scratch(input_size)
    if backbone is None:
        raise ValueError(f"model {model_id!r} needs a backbone")
    if model_id in ("feature-extractor", "finetune"):
        return build_feature_extractor(backbone)
    if model_id == "hybrid":
        return build_hybrid(backbone)
    raise ValueError(f"unknown model {model_id!r}")


def init_network(net: NetworkSpec, rng: Rng, *pretrained: dict):
    """Fresh parameters overlaid by any pretrained tensors whose names and
    shapes match the network."""
    params = init_params(net, rng)
    shapes = net.param_shapes()
    for source in pretrained:
        if not source:
            continue
        for name, arr in source.items():
            if name in shapes and tuple(arr.shape) == shapes[name]:
                params[name] = np.array(arr, dtype=params[name].dtype)
    return params


# weights file --------------------------------------------------------------

MAGIC = b"LFWT"
VERSION = 1


def params_to_bytes(store: dict) -> bytes:
    out = [MAGIC, struct.pack("<H", VERSION)]
    for name in sorted(store):
        arr = np.asarray(store[name], dtype="<f4")  # tobytes() is C-order; keeps rank 0
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF or arr.ndim > 0xFF:
            raise FormatError(f"parameter {name!r} cannot be encoded")
        out.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def params_from_bytes(data: bytes, source="<bytes>") -> dict:
    if data[:4] != MAGIC:
        raise FormatError(f"{source}: bad magic {data[:4]!r}")
    if len(data) < 6:
        raise FormatError(f"{source}: truncated header")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    pos = 6
    store = {}

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"{source}: truncated at byte {pos}")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    while pos < len(data):
        (n,) = struct.unpack("<H", take(2))
        name = take(n).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(dims, dtype=np.int64))
        arr = np.frombuffer(take(4 * count), dtype="<f4").reshape(dims).astype(np.float32)
        if name in store:
            raise FormatError(f"{source}: duplicate entry {name!r}")
        store[name] = arr
    return store


def check_params(net: NetworkSpec, store: dict, allow_extra=True, only=None):
    """Every declared parameter present with the declared shape."""
    for name, shape in net.param_shapes().items():
        if only is not None and name.split("/", 1)[0] not in only:
            continue
        if name not in store:
            raise FormatError(f"parameter {name} missing from weights")
        if tuple(store[name].shape) != shape:
            raise ShapeError(f"parameter {name} has shape {tuple(store[name].shape)}, network expects {shape}")
    if not allow_extra:
        extra = set(store) - set(net.param_shapes())
        if extra:
            raise ShapeError(f"weights hold parameters the network lacks: {sorted(extra)[:5]}")


def save_params(store: dict, path):
    Path(path).write_bytes(params_to_bytes(store))


def load_params(path, net: NetworkSpec | None = None) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: weights file not found")
    store = params_from_bytes(path.read_bytes(), str(path))
    if net is not None:
        check_params(net, store)
    return store


def load_backbone(path, template: BackboneSpec) -> BackboneSpec:
    """Import externally converted backbone weights in the LFWT format."""
    store = load_params(path)
    names = set(template.block_names)
    check_params(template.network(), store, only=names)
    mine = {k: v for k, v in store.items() if k.split("/", 1)[0] in names}
    return replace(template, provenance="weights_file", params=mine)


# pretext pretraining -------------------------------------------------------


def pretext_pretrain(backbone: BackboneSpec, images, classes, epochs=8, seed=0, holdout=0.2, batch_size=32,
                     learning_rate=1e-3) -> BackboneSpec:
    """Train the backbone on a multi-class pretext task under a throwaway
    one-vs-rest sigmoid head, then keep only the backbone weights.

    The held-out pretext accuracy is recorded in ``info["pretext_accuracy"]``.
    """
    from .nn import RMSprop
    from .train import LabeledData, TrainConfig, fit

    classes = np.asarray(classes)
    n_classes = int(classes.max()) + 1
    if n_classes < 2:
        raise DataError("pretext task needs at least 2 classes")
    onehot = np.eye(n_classes, dtype=np.float32)[classes]
    rng = Rng(seed).fork("pretext")
    order = rng.fork("holdout").permutation(len(classes))
    n_hold = max(1, int(round(holdout * len(classes))))
    hold, fit_idx = order[:n_hold], order[n_hold:]
    blocks = [replace(b, trainable=True) for b in backbone.blocks]
    blocks.append(Block("pretext_head", (GlobalAvgPool2D(), Dense(n_classes, "sigmoid"))))
    net = NetworkSpec({"image": backbone.input_shape}, blocks, "pretext")
    params = init_network(net, rng.fork("init"), backbone.params)
    config = TrainConfig(RMSprop(learning_rate=learning_rate), max_epochs=epochs, batch_size=batch_size, seed=seed)
    result = fit(net, params, LabeledData(images[fit_idx], onehot[fit_idx]),
                 LabeledData(images[hold], onehot[hold]), config)
    kept = {k: v for k, v in result.params.items() if not k.startswith("pretext_head/")}
    info = {"pretext_accuracy": result.best_val_acc, "pretext_epochs": len(result.history)}
    return replace(backbone, provenance="pretext_pretrained", params=kept, info=info)
