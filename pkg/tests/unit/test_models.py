"""
Unit tests for encoders, pooling, the classifier head and checkpoints.
"""

import numpy as np
import pytest

from twostage.core.exceptions import CheckpointError, ContractViolation, DomainError, InvalidConfigurationError
from twostage.core.graph_data import Graph
from twostage.core.models import (
    ARCHITECTURES,
    ClassifierConfig,
    ClassifierHead,
    GnnModel,
    ModelConfig,
    allowed_classifier_hidden,
    build_model,
    classify,
    global_pool,
    load_checkpoint,
    parameter_digest,
    predict,
    save_checkpoint,
)
from twostage.core.optim import AdamState, adam_step
from twostage.core.tensor import (
    Tape,
    backward,
    constant,
    cross_entropy,
    max_relative_error,
    numerical_gradient,
    squared_l2_distance,
)


def small_config(architecture: str, **overrides) -> ModelConfig:
    fields = {
        "architecture": architecture,
        "num_layers": 2,
        "input_dim": 16,
        "hidden_dim": 16,
        "output_dim": 16,
        "gat_heads": 2,
        "diffpool_clusters": 2 if architecture == "diffpool" else None,
    }
    fields.update(overrides)
    return ModelConfig(**fields)


def random_graph(seed: int, n: int = 5) -> Graph:
    """Connected undirected graph on n nodes with distinct categories."""
    rng = np.random.default_rng(seed)
    pairs = {(i, i + 1) for i in range(n - 1)}
    for _ in range(n):
        u, v = rng.choice(n, size=2, replace=False)
        pairs.add((int(min(u, v)), int(max(u, v))))
    edges = [(u, v) for u, v in sorted(pairs)] + [(v, u) for u, v in sorted(pairs)]
    return Graph(n, np.array(edges), np.arange(n), 0, f"random-{seed}")


@pytest.mark.unit
class TestModelConfig:
    """Tests for ModelConfig and ClassifierConfig validation."""

    def test_unknown_architecture(self):
        """Only the four supported encoders are accepted."""
        with pytest.raises(InvalidConfigurationError) as exc_info:
            ModelConfig(architecture="gin")
        assert exc_info.value.field == "architecture"

    def test_dimension_outside_grid(self):
        """Dimensions come from the search grid."""
        with pytest.raises(InvalidConfigurationError) as exc_info:
            ModelConfig(input_dim=20)
        assert exc_info.value.field == "input_dim"

    def test_allowed_classifier_hidden(self):
        """Hidden widths are powers of two up to the embedding size."""
        assert allowed_classifier_hidden(16) == [2, 4, 8, 16]
        assert allowed_classifier_hidden(96) == [2, 4, 8, 16, 32, 64]

    def test_classifier_hidden_too_wide(self):
        """A hidden layer wider than the embedding is rejected."""
        with pytest.raises(InvalidConfigurationError):
            ClassifierHead(ClassifierConfig(num_layers=2, hidden_dim=64), embedding_dim=32)

    def test_diffpool_clusters_resolved_from_dataset(self, synthetic_dataset):
        """build_model sizes DiffPool clusters from the largest graph."""
        config = ModelConfig(architecture="diffpool", input_dim=16, hidden_dim=16, output_dim=16)
        model = build_model(config, synthetic_dataset)
        assert model.config.diffpool_clusters == 2
        with pytest.raises(ContractViolation):
            GnnModel(ModelConfig(architecture="diffpool"), 5)


@pytest.mark.unit
class TestGlobalPool:
    """Tests for global_pool."""

    def test_mean_and_max(self):
        """Element-wise mean and max over nodes."""
        h = constant([[1.0, 3.0], [3.0, 5.0]])
        np.testing.assert_allclose(global_pool(h, "mean").values, [2.0, 4.0])
        np.testing.assert_allclose(global_pool(h, "max").values, [3.0, 5.0])

    def test_single_row_identity(self):
        """One node pools to itself."""
        h = constant([[1.5, -2.0]])
        for mode in ("mean", "max"):
            np.testing.assert_allclose(global_pool(h, mode).values, [1.5, -2.0])

    def test_no_nodes(self):
        """Pooling an empty graph is a domain error."""
        with pytest.raises(DomainError):
            global_pool(constant(np.zeros((0, 2))), "mean")


@pytest.mark.unit
class TestEncoders:
    """Tests for embedding shapes and symmetries of every encoder."""

    @pytest.mark.parametrize("architecture", ARCHITECTURES)
    def test_embedding_shape_and_determinism(self, architecture, path_graph):
        """Same config and seed give the same embedding of length output_dim."""
        first = GnnModel(small_config(architecture), 4, seed=3).embed(path_graph)
        second = GnnModel(small_config(architecture), 4, seed=3).embed(path_graph)
        assert first.shape == (16,)
        np.testing.assert_array_equal(first.values, second.values)

    @pytest.mark.parametrize("architecture", ARCHITECTURES)
    def test_permutation_invariance(self, architecture, path_graph):
        """Relabeling nodes does not change h_G."""
        model = GnnModel(small_config(architecture), 4, seed=1)
        permuted = path_graph.permuted(np.array([2, 0, 3, 1]))
        np.testing.assert_allclose(model.embed(path_graph).values, model.embed(permuted).values, atol=1e-10)

    def test_gat_single_node_is_linear(self):
        """With only the self-loop, attention weight is 1 and heads average x W."""
        model = GnnModel(small_config("gat", num_layers=1), 1, seed=0)
        graph = Graph(1, np.zeros((0, 2)), np.array([0]), 0, "single")
        x = model.params["features"].values[0]
        expected = np.mean([x @ model.params[f"gat.0.head{k}.weight"].values for k in range(2)], axis=0)
        np.testing.assert_allclose(model.embed(graph).values, expected, atol=1e-12)

    def test_graphsage_symmetric_pair(self):
        """Two symmetric nodes get identical embeddings, so mean and max pooling agree."""
        graph = Graph(2, np.array([(0, 1), (1, 0)]), np.array([0, 0]), 0, "pair")
        mean = GnnModel(small_config("graphsage", global_pool="mean"), 1, seed=5).embed(graph)
        maxed = GnnModel(small_config("graphsage", global_pool="max"), 1, seed=5).embed(graph)
        np.testing.assert_allclose(mean.values, maxed.values, atol=1e-12)

    def test_diffpool_assignment_is_row_stochastic(self, path_graph):
        """Every node distributes a unit mass over the clusters."""
        model = GnnModel(small_config("diffpool"), 4, seed=0)
        x = constant(model.params["features"].values[path_graph.node_categories])
        s = model.encoder.assignment(path_graph, x)
        assert s.shape == (4, 2)
        np.testing.assert_allclose(s.values.sum(axis=1), np.ones(4))

    def test_empty_graph(self):
        """Graphs without nodes cannot be embedded."""
        model = GnnModel(small_config("graphsage"), 1)
        with pytest.raises(DomainError):
            model.embed(Graph(0, np.zeros((0, 2)), np.zeros(0), 0, "empty"))

    def test_category_outside_feature_table(self, path_graph):
        """Categories beyond the table are a contract violation."""
        model = GnnModel(small_config("graphsage"), 2)
        with pytest.raises(ContractViolation):
            model.embed(path_graph)


@pytest.mark.unit
class TestEncoderGradients:
    """Finite-difference checks of every encoder parameter."""

    @pytest.mark.parametrize("architecture", ARCHITECTURES)
    def test_gradients_match_finite_differences(self, architecture):
        graph = random_graph(seed=11)
        model = GnnModel(small_config(architecture), graph.node_count, seed=2)
        target = constant(np.random.default_rng(4).normal(size=16))

        def loss():
            return squared_l2_distance(model.embed(graph), target)

        with Tape():
            backward(loss())

        rng = np.random.default_rng(0)
        for name, param in model.params.items():
            coordinates = rng.choice(param.size, size=min(3, param.size), replace=False).tolist()
            numeric = numerical_gradient(loss, param, coordinates=coordinates)
            assert max_relative_error(param.grad, numeric) < 1e-3, name


@pytest.mark.unit
class TestClassifierHead:
    """Tests for ClassifierHead, classify and predict."""

    def test_zero_initialized_output_is_uniform(self, path_graph):
        """Fresh heads give uniform probabilities."""
        model = GnnModel(small_config("graphsage"), 4)
        head = ClassifierHead(ClassifierConfig(num_layers=2, hidden_dim=8), 16)
        probabilities = classify(model, head, model.embed(path_graph))
        np.testing.assert_allclose(probabilities.values, [0.5, 0.5])
        assert predict(model, head, path_graph) == 0

    def test_saturates_on_one_point(self):
        """Training on a single embedding drives its class probability above 0.99."""
        model = GnnModel(small_config("graphsage"), 4)
        head = ClassifierHead(ClassifierConfig(num_layers=1), 16)
        h = constant(np.random.default_rng(1).normal(size=16))
        state = AdamState(lr=0.1)
        for _ in range(200):
            with Tape():
                backward(cross_entropy(head.logits(h), 1))
            adam_step(state, head.parameters())
        assert classify(model, head, h).values[1] > 0.99

    def test_dimension_mismatch(self):
        """Embeddings of the wrong length are a contract violation."""
        model = GnnModel(small_config("graphsage"), 4)
        head = ClassifierHead(ClassifierConfig(num_layers=1), 16)
        with pytest.raises(ContractViolation):
            classify(model, head, constant(np.zeros(8)))


@pytest.mark.unit
class TestCheckpoints:
    """Tests for checkpoint save/load."""

    def test_restores_identical_parameters(self, tmp_path, path_graph):
        """Loaded models reproduce parameters and predictions exactly."""
        model = GnnModel(small_config("sagpool"), 4, seed=9)
        head = ClassifierHead(ClassifierConfig(num_layers=2, hidden_dim=4), 16, seed=9)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, model, head, trial_id="abc")

        loaded, loaded_head, payload = load_checkpoint(path)
        assert payload["trial_id"] == "abc"
        assert loaded_head is not None
        assert parameter_digest(loaded.parameters()) == parameter_digest(model.parameters())
        assert parameter_digest(loaded_head.parameters()) == parameter_digest(head.parameters())
        np.testing.assert_array_equal(loaded.embed(path_graph).values, model.embed(path_graph).values)

    def test_rejects_foreign_file(self, tmp_path):
        """Files that are not checkpoints raise CheckpointError."""
        path = tmp_path / "other.json"
        path.write_text('{"format": "something-else"}', encoding="utf-8")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
