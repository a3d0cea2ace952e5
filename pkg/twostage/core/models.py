"""
Graph encoders, the learnable node-feature table and the MLP classifier head.

Each encoder maps one graph to an embedding h_G of length ``output_dim``:

- graphsage: mean-neighbor aggregation, concat with self, linear, relu
- gat: multi-head masked attention over N(v) and v itself
- diffpool: soft cluster assignment S, X' = S^T Z, A' = S^T A S, then one supernode
- sagpool: graph-convolution attention scores, top-k node selection per block,
  readout concat(mean, max) summed across blocks

Forward passes run per graph on dense tensors.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, ClassVar

import numpy as np

from .artifacts import read_json, write_json
from .exceptions import CheckpointError, ContractViolation, DomainError, InvalidConfigurationError
from .graph_data import Graph, GraphDataset
from .tensor import (
    Tensor,
    concat,
    constant,
    gather_rows,
    leaky_relu,
    matmul,
    parameter,
    reduce_max_axis,
    reduce_mean_axis,
    reduce_sum,
    relu,
    reshape,
    row_softmax,
    sigmoid,
    top_k_select,
    transpose,
)

ARCHITECTURES = ("graphsage", "gat", "diffpool", "sagpool")
DIMENSION_GRID = (16, 32, 64, 96, 128)
GLOBAL_POOLS = ("mean", "max")
MAX_CLASSIFIER_LAYERS = 3
DIFFPOOL_CLUSTER_FRACTION = 0.25

CHECKPOINT_FORMAT = "twostage-checkpoint"
CHECKPOINT_VERSION = 1


# ============================================================================
# Configuration
# ============================================================================


@dataclass(frozen=True)
class ModelConfig:
    """Encoder hyperparameters; dimensions come from the search grid."""

    architecture: str = "graphsage"
    num_layers: int = 3
    input_dim: int = 32
    hidden_dim: int = 32
    output_dim: int = 32
    global_pool: str = "mean"
    gat_heads: int = 4
    diffpool_clusters: int | None = None
    sagpool_ratio: float = 0.5

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise InvalidConfigurationError(
                f"Unknown architecture '{self.architecture}'",
                field="architecture",
                details=f"choose from {', '.join(ARCHITECTURES)}",
            )
        if self.num_layers < 1:
            raise InvalidConfigurationError("num_layers must be at least 1", field="num_layers")
        for name in ("input_dim", "hidden_dim", "output_dim"):
            value = getattr(self, name)
            if value not in DIMENSION_GRID:
                raise InvalidConfigurationError(
                    f"{name}={value} is outside {list(DIMENSION_GRID)}", field=name
                )
        if self.global_pool not in GLOBAL_POOLS:
            raise InvalidConfigurationError(f"Unknown global pool '{self.global_pool}'", field="global_pool")
        if self.gat_heads < 1:
            raise InvalidConfigurationError("gat_heads must be positive", field="gat_heads")
        if self.diffpool_clusters is not None and self.diffpool_clusters < 1:
            raise InvalidConfigurationError("diffpool_clusters must be positive", field="diffpool_clusters")
        if not 0.0 < self.sagpool_ratio <= 1.0:
            raise InvalidConfigurationError("sagpool_ratio must lie in (0, 1]", field="sagpool_ratio")


@dataclass(frozen=True)
class ClassifierConfig:
    """MLP head: up to three fully-connected layers with 2^h hidden units."""

    num_layers: int = 2
    hidden_dim: int = 16
    num_classes: int = 2

    def validate_for(self, embedding_dim: int) -> None:
        if not 1 <= self.num_layers <= MAX_CLASSIFIER_LAYERS:
            raise InvalidConfigurationError(
                f"classifier num_layers={self.num_layers} outside [1, {MAX_CLASSIFIER_LAYERS}]",
                field="classifier_layers",
            )
        allowed = allowed_classifier_hidden(embedding_dim)
        if self.num_layers > 1 and self.hidden_dim not in allowed:
            raise InvalidConfigurationError(
                f"classifier hidden_dim={self.hidden_dim} not in {allowed}", field="classifier_hidden"
            )
        if self.num_classes < 2:
            raise InvalidConfigurationError("classifier needs at least 2 classes", field="num_classes")


def allowed_classifier_hidden(embedding_dim: int) -> list[int]:
    """Powers of two 2^h with 1 <= h <= log2(embedding_dim)."""
    return [2**h for h in range(1, int(math.log2(embedding_dim)) + 1)]


# ============================================================================
# Parameter helpers
# ============================================================================


class ParameterBlock:
    """Named, ordered collection of trainable tensors with seeded Glorot init."""

    def __init__(self, rng: np.random.Generator, prefix: str = "") -> None:
        self.rng = rng
        self.prefix = prefix
        self.params: dict[str, Tensor] = {}

    def glorot(self, name: str, fan_in: int, fan_out: int, shape: tuple[int, ...] | None = None) -> Tensor:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        values = self.rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))
        return self._add(name, values)

    def zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self._add(name, np.zeros(shape))

    def _add(self, name: str, values: np.ndarray[Any, Any]) -> Tensor:
        full = f"{self.prefix}{name}"
        if full in self.params:
            raise ContractViolation(f"Duplicate parameter name {full}")
        tensor = parameter(values, name=full)
        self.params[full] = tensor
        return tensor


@dataclass
class Linear:
    weight: Tensor
    bias: Tensor

    @classmethod
    def create(cls, block: ParameterBlock, name: str, fan_in: int, fan_out: int) -> Linear:
        return cls(block.glorot(f"{name}.weight", fan_in, fan_out), block.zeros(f"{name}.bias", (fan_out,)))

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias


def global_pool(node_embeddings: Tensor, mode: str) -> Tensor:
    """Element-wise mean or max over the node axis.

    Raises:
        DomainError: no nodes
        InvalidConfigurationError: unknown mode
    """
    if node_embeddings.shape[0] == 0:
        raise DomainError("global_pool over a graph with no nodes")
    if mode == "mean":
        return reduce_mean_axis(node_embeddings, axis=0)
    if mode == "max":
        return reduce_max_axis(node_embeddings, axis=0)
    raise InvalidConfigurationError(f"Unknown global pool '{mode}'", field="global_pool")


def _layer_dims(config: ModelConfig, last: int | None = None) -> list[tuple[int, int]]:
    dims = [config.input_dim] + [config.hidden_dim] * (config.num_layers - 1) + [last or config.output_dim]
    return list(zip(dims[:-1], dims[1:], strict=True))


def _self_loop_mask(graph: Graph) -> np.ndarray[Any, np.dtype[np.bool_]]:
    return (graph.adjacency + np.eye(graph.node_count)) > 0


def _gcn_normalized(adjacency: np.ndarray[Any, Any]) -> np.ndarray[Any, Any]:
    """D^-1/2 (A + I) D^-1/2 with D the row sums of A + I."""
    a = adjacency + np.eye(adjacency.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


# ============================================================================
# Encoders
# ============================================================================


class Encoder:
    """Base class: maps node input features of one graph to h_G."""

    architecture: ClassVar[str] = ""

    def __init__(self, config: ModelConfig, block: ParameterBlock) -> None:
        self.config = config
        self.block = block

    def forward(self, graph: Graph, x: Tensor) -> Tensor:
        raise NotImplementedError


class SageStack:
    """GraphSAGE layers h' = W concat(h, mean_{u in N(v)} h_u) + b, relu between layers."""

    def __init__(self, block: ParameterBlock, name: str, dims: list[tuple[int, int]]) -> None:
        self.layers = [Linear.create(block, f"{name}.{i}", 2 * d_in, d_out) for i, (d_in, d_out) in enumerate(dims)]

    def __call__(self, aggregation: Tensor, h: Tensor, final_relu: bool = False) -> Tensor:
        for i, layer in enumerate(self.layers):
            h = layer(concat([h, matmul(aggregation, h)], axis=1))
            if final_relu or i < len(self.layers) - 1:
                h = relu(h)
        return h


class GraphSageEncoder(Encoder):
    architecture = "graphsage"

    def __init__(self, config: ModelConfig, block: ParameterBlock) -> None:
        super().__init__(config, block)
        self.stack = SageStack(block, "sage", _layer_dims(config))

    def forward(self, graph: Graph, x: Tensor) -> Tensor:
        h = self.stack(constant(graph.mean_adjacency), x)
        return global_pool(h, self.config.global_pool)


class GatEncoder(Encoder):
    """Multi-head attention; heads are concatenated in hidden layers and averaged in the last."""

    architecture = "gat"

    def __init__(self, config: ModelConfig, block: ParameterBlock) -> None:
        super().__init__(config, block)
        heads = config.gat_heads
        self.layers: list[tuple[list[tuple[Tensor, Tensor, Tensor]], Tensor]] = []
        d_in = config.input_dim
        for i in range(config.num_layers):
            last = i == config.num_layers - 1
            d_out = config.output_dim if last else config.hidden_dim
            head_params = [
                (
                    block.glorot(f"gat.{i}.head{k}.weight", d_in, d_out),
                    block.glorot(f"gat.{i}.head{k}.att_src", d_out, 1, shape=(d_out,)),
                    block.glorot(f"gat.{i}.head{k}.att_dst", d_out, 1, shape=(d_out,)),
                )
                for k in range(heads)
            ]
            width = d_out if last else d_out * heads
            self.layers.append((head_params, block.zeros(f"gat.{i}.bias", (width,))))
            d_in = width

    def forward(self, graph: Graph, x: Tensor) -> Tensor:
        n = graph.node_count
        mask = _self_loop_mask(graph)
        h = x
        for i, (head_params, bias) in enumerate(self.layers):
            last = i == len(self.layers) - 1
            outputs: list[Tensor] = []
            for weight, att_src, att_dst in head_params:
                wh = matmul(h, weight)
                src = reshape(matmul(wh, att_src), (1, n))
                dst = reshape(matmul(wh, att_dst), (n, 1))
                # scores[v, u] for the edge u -> v
                scores = leaky_relu(dst + src)
                alpha = row_softmax(scores, mask=mask)
                outputs.append(matmul(alpha, wh))
            if last:
                combined = outputs[0]
                for other in outputs[1:]:
                    combined = combined + other
                h = combined * (1.0 / len(outputs)) + bias
            else:
                h = relu(concat(outputs, axis=1) + bias)
        return global_pool(h, self.config.global_pool)


class DiffPoolEncoder(Encoder):
    """Convolution stack, one soft-assignment pooling layer, then a single supernode.

    The global_pool setting does not apply: the final level has one cluster,
    whose embedding is the sum of the coarsened node embeddings.
    """

    architecture = "diffpool"

    def __init__(self, config: ModelConfig, block: ParameterBlock) -> None:
        super().__init__(config, block)
        if config.diffpool_clusters is None:
            raise ContractViolation("diffpool_clusters must be resolved before building the encoder")
        self.clusters = config.diffpool_clusters
        embed_dims = _layer_dims(config, last=config.hidden_dim)
        assign_dims = _layer_dims(config, last=self.clusters)
        self.embed = SageStack(block, "diffpool.embed", embed_dims)
        self.assign = SageStack(block, "diffpool.assign", assign_dims)
        self.post = Linear.create(block, "diffpool.post", 2 * config.hidden_dim, config.output_dim)

    def assignment(self, graph: Graph, x: Tensor) -> Tensor:
        """Row-stochastic assignment S (n x clusters)."""
        return row_softmax(self.assign(constant(graph.mean_adjacency), x))

    def forward(self, graph: Graph, x: Tensor) -> Tensor:
        aggregation = constant(graph.mean_adjacency)
        z = self.embed(aggregation, x, final_relu=True)
        s = self.assignment(graph, x)
        s_t = transpose(s)
        pooled_x = matmul(s_t, z)
        pooled_a = matmul(matmul(s_t, constant(graph.adjacency)), s)
        h = self.post(concat([pooled_x, matmul(pooled_a, pooled_x)], axis=1))
        return reduce_sum(h, axis=0)


class SagPoolEncoder(Encoder):
    """Blocks of (graph convolution, self-attention top-k pooling, readout)."""

    architecture = "sagpool"

    def __init__(self, config: ModelConfig, block: ParameterBlock) -> None:
        super().__init__(config, block)
        dims = [config.input_dim] + [config.hidden_dim] * config.num_layers
        self.convs = [Linear.create(block, f"sagpool.conv{i}", dims[i], dims[i + 1]) for i in range(config.num_layers)]
        self.scores = [
            Linear.create(block, f"sagpool.score{i}", config.hidden_dim, 1) for i in range(config.num_layers)
        ]
        self.out = Linear.create(block, "sagpool.out", 2 * config.hidden_dim, config.output_dim)

    def forward(self, graph: Graph, x: Tensor) -> Tensor:
        adjacency = graph.adjacency
        h = x
        readout: Tensor | None = None
        for conv, score_layer in zip(self.convs, self.scores, strict=True):
            norm = constant(_gcn_normalized(adjacency))
            h = relu(conv(matmul(norm, h)))
            n = h.shape[0]
            score = reshape(score_layer(matmul(norm, h)), (n,))
            k = math.ceil(self.config.sagpool_ratio * n)
            selected, index = top_k_select(score, k)
            h = gather_rows(h, index) * reshape(sigmoid(selected), (k, 1))
            adjacency = adjacency[np.ix_(index, index)]
            level = concat([reduce_mean_axis(h, axis=0), reduce_max_axis(h, axis=0)], axis=0)
            readout = level if readout is None else readout + level
        assert readout is not None
        return self.out(readout)


ENCODERS: dict[str, type[Encoder]] = {
    cls.architecture: cls for cls in (GraphSageEncoder, GatEncoder, DiffPoolEncoder, SagPoolEncoder)
}


# ============================================================================
# Models
# ============================================================================


class GnnModel:
    """Feature table plus encoder; ``embed`` maps a graph to h_G."""

    def __init__(self, config: ModelConfig, num_feature_categories: int, seed: int = 0) -> None:
        if config.architecture == "diffpool" and config.diffpool_clusters is None:
            raise ContractViolation("use build_model() so that diffpool_clusters is resolved")
        self.config = config
        self.num_feature_categories = num_feature_categories
        self.seed = seed
        block = ParameterBlock(np.random.default_rng(seed))
        self.feature_table = block.glorot("features", num_feature_categories, config.input_dim)
        self.encoder = ENCODERS[config.architecture](config, block)
        self.params = block.params

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def embed(self, graph: Graph) -> Tensor:
        """Forward pass for one graph; recorded when a tape is active.

        Raises:
            DomainError: empty graph
            ContractViolation: node category outside the feature table
        """
        if graph.node_count == 0:
            raise DomainError(f"Cannot embed graph {graph.graph_id} with no nodes")
        if graph.node_categories.max() >= self.num_feature_categories:
            raise ContractViolation(
                f"Graph {graph.graph_id} has category {int(graph.node_categories.max())} "
                f"but the feature table has {self.num_feature_categories} rows"
            )
        x = gather_rows(self.feature_table, graph.node_categories)
        return self.encoder.forward(graph, x)

    def state_dict(self) -> dict[str, np.ndarray[Any, Any]]:
        return {name: t.values.copy() for name, t in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray[Any, Any]]) -> None:
        _load_into(self.params, state, "model")


def embed_graph(model: GnnModel, graph: Graph) -> Tensor:
    return model.embed(graph)


def build_model(config: ModelConfig, dataset: GraphDataset, seed: int = 0) -> GnnModel:
    """Resolve data-dependent defaults and initialize a model for ``dataset``."""
    if config.architecture == "diffpool" and config.diffpool_clusters is None:
        clusters = max(1, math.ceil(DIFFPOOL_CLUSTER_FRACTION * dataset.max_node_count))
        config = replace(config, diffpool_clusters=clusters)
    return GnnModel(config, dataset.num_feature_categories, seed)


class ClassifierHead:
    """MLP from h_G to class logits; the output layer starts at zero."""

    def __init__(self, config: ClassifierConfig, embedding_dim: int, seed: int = 0) -> None:
        config.validate_for(embedding_dim)
        self.config = config
        self.embedding_dim = embedding_dim
        block = ParameterBlock(np.random.default_rng(seed), prefix="head.")
        widths = [embedding_dim] + [config.hidden_dim] * (config.num_layers - 1)
        self.hidden = [Linear.create(block, f"fc{i}", widths[i], widths[i + 1]) for i in range(config.num_layers - 1)]
        self.output = Linear(
            block.zeros("out.weight", (widths[-1], config.num_classes)),
            block.zeros("out.bias", (config.num_classes,)),
        )
        self.params = block.params

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def logits(self, h: Tensor) -> Tensor:
        if h.shape != (self.embedding_dim,):
            raise ContractViolation(f"Classifier expects an embedding of length {self.embedding_dim}, got {h.shape}")
        for layer in self.hidden:
            h = relu(layer(h))
        return self.output(h)

    def state_dict(self) -> dict[str, np.ndarray[Any, Any]]:
        return {name: t.values.copy() for name, t in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray[Any, Any]]) -> None:
        _load_into(self.params, state, "classifier head")


def classify(model: GnnModel, head: ClassifierHead, h: Tensor) -> Tensor:
    """Class-probability vector for embedding ``h``.

    Raises:
        ContractViolation: ``h`` does not match the model's output_dim
    """
    if h.shape != (model.config.output_dim,):
        raise ContractViolation(f"Embedding of shape {h.shape} does not match output_dim {model.config.output_dim}")
    return row_softmax(head.logits(h))


def predict(model: GnnModel, head: ClassifierHead, graph: Graph) -> int:
    """Predicted class of ``graph``; ties go to the lower class index."""
    return int(np.argmax(classify(model, head, model.embed(graph)).values))


def _load_into(params: dict[str, Tensor], state: dict[str, np.ndarray[Any, Any]], owner: str) -> None:
    if set(params) != set(state):
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        raise ContractViolation(
            f"State does not match the {owner} parameters", details=f"missing={missing}, unexpected={unexpected}"
        )
    for name, tensor in params.items():
        values = np.asarray(state[name], dtype=np.float64)
        if values.shape != tensor.values.shape:
            raise ContractViolation(f"Shape mismatch for {name}: {values.shape} vs {tensor.values.shape}")
        tensor.values[...] = values


def parameter_digest(tensors: list[Tensor]) -> str:
    """SHA-256 over parameter shapes and raw float64 bytes."""
    digest = hashlib.sha256()
    for t in tensors:
        digest.update(repr(t.values.shape).encode("ascii"))
        digest.update(np.ascontiguousarray(t.values, dtype=np.float64).tobytes())
    return digest.hexdigest()


# ============================================================================
# Checkpoints
# ============================================================================


def checkpoint_payload(model: GnnModel, head: ClassifierHead | None = None, **extra: Any) -> dict[str, Any]:
    params = list(model.params.items()) + (list(head.params.items()) if head else [])
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": asdict(model.config),
        "num_feature_categories": model.num_feature_categories,
        "classifier_config": asdict(head.config) if head else None,
        "parameters": [
            {"name": name, "shape": list(t.values.shape), "values": t.values.reshape(-1).tolist()} for name, t in params
        ],
        **extra,
    }


def save_checkpoint(path: Path, model: GnnModel, head: ClassifierHead | None = None, **extra: Any) -> None:
    """Write every parameter as (name, shape, flat values); floats round-trip exactly."""
    write_json(path, checkpoint_payload(model, head, **extra))


def load_checkpoint(path: Path) -> tuple[GnnModel, ClassifierHead | None, dict[str, Any]]:
    """Rebuild model and head from a checkpoint.

    Returns:
        (model, head or None, the raw payload)

    Raises:
        CheckpointError: wrong format/version or inconsistent parameters
    """
    payload = read_json(path)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("Not a twostage checkpoint", file_path=path)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {payload.get('version')}", file_path=path)

    try:
        config = ModelConfig(**payload["model_config"])
        model = GnnModel(config, int(payload["num_feature_categories"]))
        head: ClassifierHead | None = None
        if payload.get("classifier_config"):
            head = ClassifierHead(ClassifierConfig(**payload["classifier_config"]), config.output_dim)
        state = {
            p["name"]: np.array(p["values"], dtype=np.float64).reshape(p["shape"]) for p in payload["parameters"]
        }
        model.load_state_dict({k: v for k, v in state.items() if k in model.params})
        if head is not None:
            head.load_state_dict({k: v for k, v in state.items() if k in head.params})
    except (KeyError, TypeError, ValueError, ContractViolation, InvalidConfigurationError) as e:
        raise CheckpointError("Checkpoint is inconsistent", file_path=path, details=str(e)) from e
    return model, head, payload
