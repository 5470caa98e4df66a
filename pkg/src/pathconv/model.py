"""The full classification network and its configuration.

Architecture: a stack of graph convolution layers, a concatenation of all
their outputs, a sort-based pooling layer producing a fixed k x c tensor,
then a 1-D read-out (convolution over one node representation per step,
max-pooling, a second convolution) and two dense layers ending in a
softmax over the classes.  Graph convolutions use tanh, the read-out uses
rectified linear units.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .data import Graph
from .errors import ConfigError
from .layers import (
    Adam,
    Conv1D,
    Dense,
    DistanceConv,
    Dropout,
    JointConv,
    MaxPool1D,
    ReLU,
    SortPool,
    concat_layers,
    softmax,
    softmax_cross_entropy,
)
from .shortest_paths import SPTensor

MODES = ("parametric", "dgcnn_baseline")


@dataclass(frozen=True)
class ModelConfig:
    """All architecture and training hyper-parameters.

    In parametric mode every graph convolution layer carries r+1 weight
    matrices (one per shortest-path distance) and outputs (r+1) * channels
    columns; in dgcnn_baseline mode each layer carries a single weight
    matrix and outputs ``channels`` columns.  ``sortpool_k=None`` selects
    k at training time as the largest k such that at least 60% of the
    training graphs have at least k nodes (clamped to the smallest k the
    read-out supports).
    """

    r: int = 2
    conv_layers: int = 3
    channels: int = 32
    sortpool_k: int | None = None
    conv1_filters: int = 16
    conv2_filters: int = 32
    conv2_width: int = 5
    conv2_stride: int = 1
    dense_width: int = 128
    dropout_rate: float = 0.5
    mode: str = "parametric"
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 300
    batch_size: int = 50
    seed: int = 1

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.r < 0:
            raise ConfigError(f"r must be non-negative, got {self.r}")
        if self.conv_layers < 1:
            raise ConfigError("need at least one graph convolution layer")
        if self.channels < 1 or self.conv1_filters < 1 or self.conv2_filters < 1:
            raise ConfigError("channel and filter counts must be positive")
        if self.conv2_width < 1 or self.conv2_stride < 1:
            raise ConfigError("conv widths and strides must be positive")
        if self.sortpool_k is not None and self.sortpool_k < 1:
            raise ConfigError(f"sortpool_k must be positive, got {self.sortpool_k}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ConfigError("learning rate and epsilon must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("betas must lie in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch size >= 1")


def resolve_sortpool_k(config: ModelConfig, node_counts: list[int]) -> int:
    """Concrete pooling size for a training set.

    Explicit configuration wins; otherwise pick the largest k such that at
    least 60% of the given graphs have at least k nodes, clamped below so
    the read-out convolutions still fit.
    """
    if config.sortpool_k is not None:
        return config.sortpool_k
    if not node_counts:
        raise ConfigError("cannot derive sortpool_k from an empty training set")
    counts = sorted(node_counts, reverse=True)
    k = counts[math.ceil(0.6 * len(counts)) - 1]
    return max(k, 2 * config.conv2_width)


class Model:
    """Layer stack with parameters, forward cache, and gradient buffers.

    Construction is deterministic in ``config.seed``.  ``forward`` and
    ``backward`` never mutate parameters; only an optimizer step does.
    """

    def __init__(self, config: ModelConfig, feature_dim: int, num_classes: int):
        config.validate()
        if config.sortpool_k is None:
            raise ConfigError("sortpool_k must be resolved before building a model")
        if num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {num_classes}")
        self.config = config
        self.feature_dim = feature_dim
        self.num_classes = num_classes

        rng = np.random.default_rng(config.seed)
        self.graph_convs = []
        width = feature_dim
        for _ in range(config.conv_layers):
            if config.mode == "parametric":
                conv = DistanceConv(config.r, width, config.channels, rng)
            else:
                conv = JointConv(width, config.channels, rng)
            self.graph_convs.append(conv)
            width = conv.out_width
        self.concat_width = sum(c.out_width for c in self.graph_convs)

        k = config.sortpool_k
        self.sortpool = SortPool(k)
        # One node representation per step, then standard pool and conv.
        self.conv1 = Conv1D(1, config.conv1_filters, width=self.concat_width,
                            stride=self.concat_width, rng=rng)
        self.relu1 = ReLU()
        self.pool = MaxPool1D(width=2, stride=2)
        self.conv2 = Conv1D(config.conv1_filters, config.conv2_filters,
                            width=config.conv2_width, stride=config.conv2_stride,
                            rng=rng)
        self.relu2 = ReLU()

        pooled_len = self.pool.out_length(k) if k >= 2 else 0
        if k < 2 or pooled_len < config.conv2_width:
            raise ConfigError(
                f"sortpool_k={k} leaves a read-out signal shorter than the "
                f"second convolution kernel (width {config.conv2_width}); "
                f"need k >= {2 * config.conv2_width}"
            )
        conv2_len = self.conv2.out_length(pooled_len)
        self.dense1 = Dense(conv2_len * config.conv2_filters, config.dense_width, rng)
        self.relu3 = ReLU()
        self.dropout = Dropout(config.dropout_rate)
        self.dense2 = Dense(config.dense_width, num_classes, rng)

        self._named_layers = [(f"gconv{i}", c) for i, c in enumerate(self.graph_convs)]
        self._named_layers += [("conv1", self.conv1), ("conv2", self.conv2),
                               ("dense1", self.dense1), ("dense2", self.dense2)]

    # ---------------------------------------------------------------- forward

    def forward(self, sp: SPTensor, x: np.ndarray, train_mode: bool = False,
                rng: np.random.Generator | None = None):
        """Class probabilities for one graph, plus the cache backward needs."""
        if x.shape[1] != self.feature_dim:
            raise ValueError(
                f"feature dimension {x.shape[1]} does not match model ({self.feature_dim})"
            )
        conv_outs = []
        conv_caches = []
        h = x
        for conv in self.graph_convs:
            h, cache = conv.forward(sp, h)
            conv_outs.append(h)
            conv_caches.append(cache)
        hcat = concat_layers(conv_outs)

        pooled, record = self.sortpool.forward(hcat)
        signal = pooled.reshape(-1, 1)
        z1, c1 = self.conv1.forward(signal)
        a1, m1 = self.relu1.forward(z1)
        p1, cp = self.pool.forward(a1)
        z2, c2 = self.conv2.forward(p1)
        a2, m2 = self.relu2.forward(z2)
        flat = a2.reshape(-1)
        d1, cd1 = self.dense1.forward(flat)
        a3, m3 = self.relu3.forward(d1)
        dr, mdrop = self.dropout.forward(a3, train_mode, rng)
        logits, cd2 = self.dense2.forward(dr)
        probs = softmax(logits)

        cache = {
            "conv_caches": conv_caches,
            "conv_widths": [c.out_width for c in self.graph_convs],
            "record": record,
            "pooled_shape": pooled.shape,
            "c1": c1, "m1": m1, "cp": cp, "c2": c2, "m2": m2,
            "a2_shape": z2.shape, "cd1": cd1, "m3": m3, "mdrop": mdrop,
            "cd2": cd2, "logits": logits,
            # Pre-activations, kept for smoothness diagnostics.
            "z1": z1, "z2": z2, "d1": d1,
        }
        return probs, cache

    def backward(self, cache, dlogits: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients; returns the input-feature gradient."""
        dd = self.dense2.backward(cache["cd2"], dlogits)
        dd = self.dropout.backward(cache["mdrop"], dd)
        dd = self.relu3.backward(cache["m3"], dd)
        dd = self.dense1.backward(cache["cd1"], dd)
        da2 = dd.reshape(cache["a2_shape"])
        dz2 = self.relu2.backward(cache["m2"], da2)
        dp1 = self.conv2.backward(cache["c2"], dz2)
        da1 = self.pool.backward(cache["cp"], dp1)
        dz1 = self.relu1.backward(cache["m1"], da1)
        dsignal = self.conv1.backward(cache["c1"], dz1)
        dpooled = dsignal.reshape(cache["pooled_shape"])
        dhcat = self.sortpool.backward(cache["record"], dpooled)

        # Each conv output feeds both the concatenation and the next layer.
        widths = cache["conv_widths"]
        offsets = np.cumsum([0] + widths)
        dnext = None
        for i in reversed(range(len(self.graph_convs))):
            dout = dhcat[:, offsets[i]:offsets[i + 1]].copy()
            if dnext is not None:
                dout += dnext
            dnext = self.graph_convs[i].backward(cache["conv_caches"][i], dout)
        return dnext

    def loss_and_gradients(self, sp: SPTensor, x: np.ndarray, target: int,
                           train_mode: bool = False,
                           rng: np.random.Generator | None = None):
        """Forward, cross-entropy, backward; returns (loss, probs, dx)."""
        probs, cache = self.forward(sp, x, train_mode=train_mode, rng=rng)
        loss, dlogits = softmax_cross_entropy(cache["logits"], target)
        dx = self.backward(cache, dlogits)
        return loss, probs, dx

    def conv_activations(self, sp: SPTensor, x: np.ndarray) -> list[np.ndarray]:
        """Outputs of every graph convolution layer, in order."""
        outs = []
        h = x
        for conv in self.graph_convs:
            h, _ = conv.forward(sp, h)
            outs.append(h)
        return outs

    # ------------------------------------------------------------- parameters

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{lname}.{pname}", p)
                for lname, layer in self._named_layers
                for pname, p in layer.parameters()]

    def gradients(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{lname}.{pname}", g)
                for lname, layer in self._named_layers
                for pname, g in layer.gradients()]

    def zero_gradients(self) -> None:
        for _, g in self.gradients():
            g[...] = 0.0

    def scale_gradients(self, factor: float) -> None:
        for _, g in self.gradients():
            g *= factor

    def get_state(self) -> list[np.ndarray]:
        return [p.copy() for _, p in self.parameters()]

    def set_state(self, state: list[np.ndarray]) -> None:
        params = self.parameters()
        if len(state) != len(params):
            raise ValueError("state does not match parameter list")
        for (_, p), s in zip(params, state):
            np.copyto(p, s)

    def make_optimizer(self) -> Adam:
        return Adam(self.parameters(), lr=self.config.learning_rate,
                    beta1=self.config.beta1, beta2=self.config.beta2,
                    epsilon=self.config.epsilon)


def model_forward(graph: Graph, sp: SPTensor, model: Model,
                  train_mode: bool = False,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Class probabilities for one graph."""
    if graph.feature_dim != model.feature_dim:
        raise ValueError(
            f"graph feature dimension {graph.feature_dim} does not match "
            f"model ({model.feature_dim})"
        )
    if sp.node_count != graph.node_count:
        raise ValueError("shortest-path tensor does not match the graph")
    probs, _ = model.forward(sp, graph.features, train_mode=train_mode, rng=rng)
    return probs


def save_checkpoint(model: Model, path) -> None:
    """Self-describing container: configuration plus every parameter tensor."""
    meta = json.dumps({
        "config": asdict(model.config),
        "feature_dim": model.feature_dim,
        "num_classes": model.num_classes,
    })
    arrays = {name: p for name, p in model.parameters()}
    np.savez(path, __meta__=np.array(meta), **arrays)


def load_checkpoint(path) -> Model:
    """Rebuild a model from :func:`save_checkpoint` output, bit-exact in value."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        config = ModelConfig(**meta["config"])
        model = Model(config, meta["feature_dim"], meta["num_classes"])
        for name, p in model.parameters():
            stored = data[name]
            if stored.shape != p.shape:
                raise ValueError(f"checkpoint shape mismatch for {name}")
            np.copyto(p, stored)
    return model


def with_resolved_k(config: ModelConfig, node_counts: list[int]) -> ModelConfig:
    """Copy of ``config`` with ``sortpool_k`` made concrete."""
    return replace(config, sortpool_k=resolve_sortpool_k(config, node_counts))
