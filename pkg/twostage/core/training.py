"""
Training regimes.

- original: GNN + MLP head trained end-to-end by cross-entropy
- 2stg: Stage 1 triplet-loss metric training of the GNN, then a classifier
  trained on frozen embeddings
- 2stg+: Stage 1, then GNN and classifier fine-tuned jointly

All regimes use per-example Adam steps in a seeded shuffled order, early
stopping with patience, and best-validation checkpoint selection (earliest
epoch on ties). Test accuracy is evaluated once, on the selected checkpoint.
"""

from __future__ import annotations

import itertools
import time
from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .analysis import aggregate_runs, analyze_embeddings, avg_abs_correlation
from .exceptions import ContractViolation, DomainError, InvalidConfigurationError
from .graph_data import GraphDataset, SplitPlan, make_splits
from .logging import Output, get_output
from .models import (
    ARCHITECTURES,
    DIMENSION_GRID,
    GLOBAL_POOLS,
    MAX_CLASSIFIER_LAYERS,
    ClassifierConfig,
    ClassifierHead,
    GnnModel,
    ModelConfig,
    allowed_classifier_hidden,
    build_model,
)
from .optim import AdamState, adam_step
from .tensor import Tape, Tensor, backward, constant, cross_entropy, relu, squared_l2_distance
from .utils import derive_seed, stable_digest

MODES = ("original", "2stg", "2stg+")
MODE_ALIASES = {"2stg_plus": "2stg+", "2stgplus": "2stg+"}
MARGIN_GRID = (0.5, 1.0, 1.5, 2.0, 2.5)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


def normalize_mode(mode: str) -> str:
    """Map accepted spellings onto ``original``, ``2stg`` or ``2stg+``."""
    canonical = MODE_ALIASES.get(mode.strip().lower(), mode.strip().lower())
    if canonical not in MODES:
        raise InvalidConfigurationError(f"Unknown training mode '{mode}'", field="mode", details=f"use {MODES}")
    return canonical


# ============================================================================
# Configuration
# ============================================================================


@dataclass(frozen=True)
class TrainConfig:
    """One trial's full configuration."""

    mode: str = "2stg"
    margin: float = 1.0
    lr: float = 1e-3
    max_epochs: int = 100
    stage1_max_epochs: int = 200
    patience: int = 20
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", normalize_mode(self.mode))
        if self.margin not in MARGIN_GRID:
            raise InvalidConfigurationError(f"margin={self.margin} outside {list(MARGIN_GRID)}", field="margin")
        if self.lr < 0:
            raise InvalidConfigurationError("lr must be non-negative", field="lr")
        if self.max_epochs < 1 or self.stage1_max_epochs < 1:
            raise InvalidConfigurationError("epoch limits must be at least 1", field="max_epochs")
        if not 1 <= self.patience < max(self.max_epochs, self.stage1_max_epochs):
            raise InvalidConfigurationError(
                f"patience={self.patience} must lie in [1, max_epochs)", field="patience"
            )
        self.classifier.validate_for(self.model.output_dim)

    def with_seed(self, seed: int) -> TrainConfig:
        return replace(self, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> TrainConfig:
        data = dict(payload)
        data["model"] = ModelConfig(**data["model"])
        data["classifier"] = ClassifierConfig(**data["classifier"])
        return cls(**data)

    def setting_key(self) -> str:
        """Digest of everything except mode and seed: groups the five splits of one grid point."""
        payload = self.to_dict()
        payload.pop("seed")
        payload.pop("mode")
        if self.mode == "original":
            payload.pop("margin")
        return stable_digest(payload)

    def stage1_key(self) -> str:
        """Digest of the inputs that determine the Stage-1 result."""
        payload = {
            "model": asdict(self.model),
            "margin": self.margin,
            "lr": self.lr,
            "stage1_max_epochs": self.stage1_max_epochs,
            "patience": self.patience,
            "seed": self.seed,
        }
        return stable_digest(payload)


# ============================================================================
# Triplets
# ============================================================================


@dataclass(frozen=True)
class Triplet:
    anchor: int
    positive: int
    negative: int


@dataclass(frozen=True)
class TripletSample:
    """Sampled triplets plus the anchors skipped for lack of a positive."""

    triplets: tuple[Triplet, ...]
    skipped: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.triplets)

    def __iter__(self) -> Iterator[Triplet]:
        return iter(self.triplets)

    def __getitem__(self, index: int) -> Triplet:
        return self.triplets[index]


def sample_triplets(
    labels: Sequence[int] | NDArray[np.int64],
    restricted_to: Sequence[int],
    seed: int,
) -> TripletSample:
    """One triplet per eligible anchor in ``restricted_to`` (each graph is anchor once).

    Positives are drawn uniformly from the anchor's other same-class members,
    negatives uniformly from every other class.

    Raises:
        DomainError: fewer than two classes among ``restricted_to``
    """
    indices = sorted(int(i) for i in restricted_to)
    by_class: dict[int, list[int]] = {}
    for i in indices:
        by_class.setdefault(int(labels[i]), []).append(i)
    if len(by_class) < 2:
        raise DomainError(
            "Triplet sampling needs at least two classes", details=f"classes present: {sorted(by_class)}"
        )

    others = {
        c: np.array(sorted(itertools.chain.from_iterable(m for k, m in by_class.items() if k != c)), dtype=np.int64)
        for c in by_class
    }
    position = {i: p for members in by_class.values() for p, i in enumerate(members)}

    rng = np.random.default_rng(seed)
    triplets: list[Triplet] = []
    skipped: list[int] = []
    for anchor in indices:
        members = by_class[int(labels[anchor])]
        if len(members) < 2:
            skipped.append(anchor)
            continue
        pick = int(rng.integers(len(members) - 1))
        if pick >= position[anchor]:
            pick += 1
        negatives = others[int(labels[anchor])]
        negative = int(negatives[int(rng.integers(len(negatives)))])
        triplets.append(Triplet(anchor, members[pick], negative))
    return TripletSample(tuple(triplets), tuple(skipped))


def triplet_loss(anchor: Tensor, positive: Tensor, negative: Tensor, margin: float) -> Tensor:
    """max(||a - p||^2 - ||a - n||^2 + margin, 0).

    Raises:
        ContractViolation: unequal embedding lengths or margin <= 0
    """
    if not anchor.shape == positive.shape == negative.shape:
        raise ContractViolation(
            "Triplet embeddings must have equal lengths",
            details=f"{anchor.shape}, {positive.shape}, {negative.shape}",
        )
    if margin <= 0:
        raise ContractViolation(f"Triplet margin must be positive, got {margin}")
    return relu(squared_l2_distance(anchor, positive) - squared_l2_distance(anchor, negative) + margin)


# ============================================================================
# Results
# ============================================================================


@dataclass
class Stage1Result:
    """Best-validation Stage-1 state and its training history."""

    state: dict[str, NDArray[np.float64]]
    train_losses: list[float]
    val_losses: list[float]
    best_epoch: int
    correlation_trace: list[float]
    skipped_anchors: int = 0
    seconds: float = 0.0
    optimizer_steps: int = 0


@dataclass
class TrialResult:
    """Outcome of one (config, seed, mode) trial."""

    config: TrainConfig
    train_losses: list[float]
    val_losses: list[float]
    val_accuracies: list[float]
    best_epoch: int
    val_accuracy: float
    test_accuracy: float
    initial_val_accuracy: float
    initial_val_loss: float
    correlation_trace: list[float]
    val_indices: list[int]
    val_labels: list[int]
    val_embeddings: NDArray[np.float64]
    intrinsic_dimension: float | None = None
    avg_abs_correlation: float | None = None
    separation_ratio: float | None = None
    stage1: Stage1Result | None = None
    seconds: float = 0.0
    model: GnnModel | None = field(default=None, repr=False)
    head: ClassifierHead | None = field(default=None, repr=False)

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def seed(self) -> int:
        return self.config.seed

    def to_record(self) -> dict[str, Any]:
        """Self-contained JSON-ready trial summary (no tensors)."""
        record: dict[str, Any] = {
            "config": self.config.to_dict(),
            "mode": self.mode,
            "seed": self.seed,
            "architecture": self.config.model.architecture,
            "setting_key": self.config.setting_key(),
            "train_losses": self.train_losses,
            "val_losses": self.val_losses,
            "val_accuracies": self.val_accuracies,
            "best_epoch": self.best_epoch,
            "val_accuracy": self.val_accuracy,
            "test_accuracy": self.test_accuracy,
            "initial_val_accuracy": self.initial_val_accuracy,
            "initial_val_loss": self.initial_val_loss,
            "correlation_trace": self.correlation_trace,
            "intrinsic_dimension": self.intrinsic_dimension,
            "avg_abs_correlation": self.avg_abs_correlation,
            "separation_ratio": self.separation_ratio,
            "timing": {"seconds": self.seconds},
        }
        if self.stage1 is not None:
            record["stage1"] = {
                "train_losses": self.stage1.train_losses,
                "val_losses": self.stage1.val_losses,
                "best_epoch": self.stage1.best_epoch,
                "correlation_trace": self.stage1.correlation_trace,
                "skipped_anchors": self.stage1.skipped_anchors,
            }
            record["timing"]["stage1_seconds"] = self.stage1.seconds
        return record


# ============================================================================
# Helpers
# ============================================================================


def _embed_all(model: GnnModel, dataset: GraphDataset, indices: Sequence[int]) -> NDArray[np.float64]:
    """Inference-mode embeddings of ``indices`` as an (n, d) array."""
    return np.stack([model.embed(dataset.graphs[i]).values for i in indices]) if indices else np.zeros((0, 0))


def _correlation(embeddings: NDArray[np.float64]) -> float | None:
    if embeddings.shape[0] < 2 or embeddings.shape[1] < 2:
        return None
    return avg_abs_correlation(embeddings)


def _require_two_classes(dataset: GraphDataset, split: SplitPlan) -> None:
    present = {int(dataset.graphs[i].label) for i in split.train_indices}
    if len(present) < 2:
        raise DomainError(
            f"Training set of {dataset.name} has a single class", details=f"classes present: {sorted(present)}"
        )


def _shuffled(indices: Sequence[int], seed: int) -> list[int]:
    order = np.random.default_rng(seed).permutation(len(indices))
    return [indices[i] for i in order]


# ============================================================================
# Stage 1
# ============================================================================


def train_stage1(
    model: GnnModel,
    dataset: GraphDataset,
    split: SplitPlan,
    config: TrainConfig,
    output: Output | None = None,
) -> Stage1Result:
    """Triplet-loss metric training of the shared encoder.

    Triplets are resampled each epoch from the training set; each triplet is
    one Adam step, zero-loss triplets included. Stops on validation
    triplet loss and restores the best-validation parameters, epoch 0
    included.
    """
    out = output or get_output()
    started = time.perf_counter()
    labels = dataset.labels
    params = model.parameters()
    optimizer = AdamState(lr=config.lr)

    try:
        val_triplets: TripletSample | None = sample_triplets(
            labels, split.val_indices, derive_seed(config.seed, "stage1-val")
        )
    except DomainError:
        val_triplets = None
        out.debug("Validation split has a single class; stopping on training triplet loss")

    def mean_loss(triplets: TripletSample) -> float:
        if not len(triplets):
            return 0.0
        total = 0.0
        for t in triplets:
            a, p, n = (model.embed(dataset.graphs[i]) for i in (t.anchor, t.positive, t.negative))
            total += triplet_loss(a, p, n, config.margin).item()
        return total / len(triplets)

    train_losses: list[float] = []
    val_losses: list[float] = []
    correlation_trace: list[float] = []
    skipped = 0

    initial_train = sample_triplets(labels, split.train_indices, derive_seed(config.seed, "stage1", 0))
    best_loss = mean_loss(val_triplets if val_triplets is not None else initial_train)
    best_epoch = 0
    best_state = model.state_dict()
    stale = 0

    for epoch in range(1, config.stage1_max_epochs + 1):
        sample = sample_triplets(labels, split.train_indices, derive_seed(config.seed, "stage1", epoch))
        skipped = len(sample.skipped)
        order = np.random.default_rng(derive_seed(config.seed, "stage1-order", epoch)).permutation(len(sample))

        total = 0.0
        for position in order:
            t = sample[int(position)]
            with Tape():
                a, p, n = (model.embed(dataset.graphs[i]) for i in (t.anchor, t.positive, t.negative))
                loss = triplet_loss(a, p, n, config.margin)
                backward(loss)
                adam_step(optimizer, params)
            total += loss.item()
        train_loss = total / len(sample) if len(sample) else 0.0
        train_losses.append(train_loss)

        val_loss = mean_loss(val_triplets) if val_triplets is not None else train_loss
        val_losses.append(val_loss)
        corr = _correlation(_embed_all(model, dataset, split.val_indices))
        if corr is not None:
            correlation_trace.append(corr)

        out.epoch("stage1", epoch, train=train_loss, val=val_loss)

        if val_loss < best_loss:
            best_loss, best_epoch, best_state, stale = val_loss, epoch, model.state_dict(), 0
        else:
            stale += 1
            if stale >= config.patience:
                out.early_stop("stage1", epoch, best_epoch)
                break

    model.load_state_dict(best_state)
    return Stage1Result(
        state=best_state,
        train_losses=train_losses,
        val_losses=val_losses,
        best_epoch=best_epoch,
        correlation_trace=correlation_trace,
        skipped_anchors=skipped,
        optimizer_steps=optimizer.step,
        seconds=time.perf_counter() - started,
    )


# ============================================================================
# Classifier training (Stage 2 and original)
# ============================================================================


@dataclass
class _FitOutcome:
    train_losses: list[float]
    val_losses: list[float]
    val_accuracies: list[float]
    best_epoch: int
    best_val_accuracy: float
    correlation_trace: list[float]


def _fit_classifier(
    model: GnnModel,
    head: ClassifierHead,
    dataset: GraphDataset,
    split: SplitPlan,
    config: TrainConfig,
    train_encoder: bool,
    out: Output,
    stage: str,
) -> _FitOutcome:
    """Cross-entropy training with epoch-0 evaluation and best-val restore.

    With ``train_encoder`` False the encoder is evaluated once and its
    embeddings are fed to the head as constants, so it receives no updates.
    """
    labels = dataset.labels
    params = head.parameters() + (model.parameters() if train_encoder else [])
    optimizer = AdamState(lr=config.lr)

    frozen: dict[int, NDArray[np.float64]] = {}
    if not train_encoder:
        every = list(split.train_indices) + list(split.val_indices) + list(split.test_indices)
        frozen = {i: model.embed(dataset.graphs[i]).values for i in every}

    def embedding(i: int) -> Tensor:
        if train_encoder:
            return model.embed(dataset.graphs[i])
        return constant(frozen[i])

    def evaluate(indices: Sequence[int]) -> tuple[float, float]:
        correct = 0
        loss = 0.0
        for i in indices:
            logits = head.logits(embedding(i))
            correct += int(np.argmax(logits.values) == labels[i])
            loss += cross_entropy(logits, int(labels[i])).item()
        return correct / len(indices), loss / len(indices)

    val_accuracy, val_loss = evaluate(split.val_indices)
    val_accuracies = [val_accuracy]
    val_losses = [val_loss]
    train_losses: list[float] = []
    trace: list[float] = []

    best_accuracy, best_epoch = val_accuracy, 0
    best_model = model.state_dict() if train_encoder else None
    best_head = head.state_dict()
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        total = 0.0
        for i in _shuffled(list(split.train_indices), derive_seed(config.seed, stage, "order", epoch)):
            with Tape():
                loss = cross_entropy(head.logits(embedding(i)), int(labels[i]))
                backward(loss)
                adam_step(optimizer, params)
            total += loss.item()
        train_losses.append(total / len(split.train_indices))

        val_accuracy, val_loss = evaluate(split.val_indices)
        val_accuracies.append(val_accuracy)
        val_losses.append(val_loss)
        if train_encoder:
            corr = _correlation(_embed_all(model, dataset, split.val_indices))
            if corr is not None:
                trace.append(corr)

        out.epoch(stage, epoch, train=train_losses[-1], val_loss=val_loss, val_acc=val_accuracy)

        if val_accuracy > best_accuracy:
            best_accuracy, best_epoch, stale = val_accuracy, epoch, 0
            best_head = head.state_dict()
            if train_encoder:
                best_model = model.state_dict()
        else:
            stale += 1
            if stale >= config.patience:
                out.early_stop(stage, epoch, best_epoch)
                break

    head.load_state_dict(best_head)
    if best_model is not None:
        model.load_state_dict(best_model)
    return _FitOutcome(train_losses, val_losses, val_accuracies, best_epoch, best_accuracy, trace)


def _finish_trial(
    model: GnnModel,
    head: ClassifierHead,
    dataset: GraphDataset,
    split: SplitPlan,
    config: TrainConfig,
    fit: _FitOutcome,
    correlation_trace: list[float],
    stage1: Stage1Result | None,
    started: float,
) -> TrialResult:
    labels = dataset.labels
    test_correct = sum(
        int(np.argmax(head.logits(model.embed(dataset.graphs[i])).values) == labels[i]) for i in split.test_indices
    )
    test_accuracy = test_correct / len(split.test_indices)

    val_indices = list(split.val_indices)
    val_embeddings = _embed_all(model, dataset, val_indices)
    val_labels = [int(labels[i]) for i in val_indices]
    intrinsic = correlation = separation = None
    if len(val_indices) >= 2:
        report = analyze_embeddings(val_embeddings, val_labels)
        intrinsic, correlation, separation = (
            report.intrinsic_dimension,
            report.avg_abs_correlation,
            report.separation_ratio,
        )

    return TrialResult(
        config=config,
        train_losses=fit.train_losses,
        val_losses=fit.val_losses,
        val_accuracies=fit.val_accuracies,
        best_epoch=fit.best_epoch,
        val_accuracy=fit.best_val_accuracy,
        test_accuracy=test_accuracy,
        initial_val_accuracy=fit.val_accuracies[0],
        initial_val_loss=fit.val_losses[0],
        correlation_trace=correlation_trace,
        val_indices=val_indices,
        val_labels=val_labels,
        val_embeddings=val_embeddings,
        intrinsic_dimension=intrinsic,
        avg_abs_correlation=correlation,
        separation_ratio=separation,
        stage1=stage1,
        seconds=time.perf_counter() - started,
        model=model,
        head=head,
    )


def train_stage2(
    model: GnnModel,
    dataset: GraphDataset,
    split: SplitPlan,
    config: TrainConfig,
    stage1: Stage1Result | None,
    head: ClassifierHead | None = None,
    output: Output | None = None,
) -> TrialResult:
    """Train the classifier on Stage-1 embeddings (2stg) or fine-tune everything (2stg+).

    Args:
        head: Optional warm-start head; a fresh zero-output head otherwise

    Raises:
        ContractViolation: mode is original, or no Stage-1 result is given
    """
    if config.mode == "original":
        raise ContractViolation("train_stage2 does not run the original mode; use train_original")
    if stage1 is None:
        raise ContractViolation("train_stage2 needs a Stage-1 result")

    out = output or get_output()
    started = time.perf_counter()
    model.load_state_dict(stage1.state)
    if head is None:
        head = ClassifierHead(
            replace(config.classifier, num_classes=dataset.num_classes),
            config.model.output_dim,
            seed=derive_seed(config.seed, "head"),
        )

    fine_tune = config.mode == "2stg+"
    fit = _fit_classifier(model, head, dataset, split, config, fine_tune, out, config.mode)
    trace = stage1.correlation_trace + fit.correlation_trace
    return _finish_trial(model, head, dataset, split, config, fit, trace, stage1, started)


def train_original(
    model: GnnModel,
    dataset: GraphDataset,
    split: SplitPlan,
    config: TrainConfig,
    head: ClassifierHead | None = None,
    output: Output | None = None,
) -> TrialResult:
    """End-to-end cross-entropy training of GNN + MLP head.

    Raises:
        ContractViolation: mode is not original
        DomainError: the dataset carries a single label
    """
    if config.mode != "original":
        raise ContractViolation(f"train_original runs only the original mode, got {config.mode}")
    if len(set(dataset.labels.tolist())) < 2:
        raise DomainError(f"Dataset {dataset.name} has a constant label")
    _require_two_classes(dataset, split)

    out = output or get_output()
    started = time.perf_counter()
    if head is None:
        head = ClassifierHead(
            replace(config.classifier, num_classes=dataset.num_classes),
            config.model.output_dim,
            seed=derive_seed(config.seed, "head"),
        )
    fit = _fit_classifier(model, head, dataset, split, config, True, out, "original")
    return _finish_trial(model, head, dataset, split, config, fit, fit.correlation_trace, None, started)


# ============================================================================
# Trials and search
# ============================================================================


def run_trial(
    dataset: GraphDataset,
    config: TrainConfig,
    stage1_cache: dict[str, Stage1Result] | None = None,
    output: Output | None = None,
) -> TrialResult:
    """Run one trial; 2stg and 2stg+ share Stage 1 through ``stage1_cache``."""
    split = make_splits(len(dataset), config.seed)
    model = build_model(config.model, dataset, seed=derive_seed(config.seed, "init"))
    if config.mode == "original":
        return train_original(model, dataset, split, config, output=output)

    _require_two_classes(dataset, split)
    key = config.stage1_key()
    stage1 = stage1_cache.get(key) if stage1_cache is not None else None
    if stage1 is None:
        stage1 = train_stage1(model, dataset, split, config, output=output)
        if stage1_cache is not None:
            stage1_cache[key] = stage1
    return train_stage2(model, dataset, split, config, stage1, output=output)


@dataclass(frozen=True)
class HyperparameterGrid:
    """Search space; every combination of the listed values is one setting."""

    input_dim: tuple[int, ...] = (32,)
    hidden_dim: tuple[int, ...] = (32,)
    output_dim: tuple[int, ...] = (32,)
    num_layers: tuple[int, ...] = (3,)
    global_pool: tuple[str, ...] = ("mean",)
    margin: tuple[float, ...] = (1.0,)
    classifier_layers: tuple[int, ...] = (2,)
    classifier_hidden: tuple[int, ...] = (16,)

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("input_dim", "hidden_dim", "output_dim"):
            self._check(name, DIMENSION_GRID)
        self._check("global_pool", GLOBAL_POOLS)
        self._check("margin", MARGIN_GRID)
        self._check("classifier_layers", tuple(range(1, MAX_CLASSIFIER_LAYERS + 1)))
        self._check("classifier_hidden", tuple(allowed_classifier_hidden(max(DIMENSION_GRID))))
        if any(k < 1 for k in self.num_layers):
            raise InvalidConfigurationError("grid.num_layers values must be at least 1", field="grid.num_layers")

    def _check(self, name: str, allowed: Sequence[Any]) -> None:
        bad = [v for v in getattr(self, name) if v not in allowed]
        if bad:
            raise InvalidConfigurationError(
                f"grid.{name} contains {bad}, allowed values are {list(allowed)}", field=f"grid.{name}"
            )

    def expand(self, mode: str, base: TrainConfig) -> list[TrainConfig]:
        """All valid TrainConfigs for ``mode``; margin is ignored for the original mode."""
        mode = normalize_mode(mode)
        margins = self.margin[:1] if mode == "original" else self.margin
        configs: list[TrainConfig] = []
        seen: set[str] = set()
        for d_in, d_hid, d_out, k, pool, margin, c_layers, c_hidden in itertools.product(
            self.input_dim,
            self.hidden_dim,
            self.output_dim,
            self.num_layers,
            self.global_pool,
            margins,
            self.classifier_layers,
            self.classifier_hidden,
        ):
            if c_layers > 1 and c_hidden not in allowed_classifier_hidden(d_out):
                continue
            model = replace(
                base.model, input_dim=d_in, hidden_dim=d_hid, output_dim=d_out, num_layers=k, global_pool=pool
            )
            hidden = c_hidden if c_layers > 1 else base.classifier.hidden_dim
            classifier = replace(base.classifier, num_layers=c_layers, hidden_dim=hidden)
            config = replace(base, mode=mode, margin=margin, model=model, classifier=classifier)
            key = config.setting_key()
            if key not in seen:
                seen.add(key)
                configs.append(config)
        return configs


@dataclass(frozen=True)
class SettingSummary:
    """Selected grid point of one (architecture, mode) with its split statistics."""

    mode: str
    architecture: str
    setting_key: str
    config: dict[str, Any]
    val_mean: float
    test_mean: float
    test_std: float
    test_accuracies: tuple[float, ...]


def select_setting(
    trials: Sequence[Mapping[str, Any]],
    expected: int = len(DEFAULT_SEEDS),
) -> SettingSummary | None:
    """Pick the setting with the highest mean validation accuracy.

    ``trials`` are trial records of one (architecture, mode); only settings
    with exactly ``expected`` seeds take part. Ties keep the first setting
    in record order.
    """
    groups: dict[str, list[Mapping[str, Any]]] = {}
    for record in trials:
        groups.setdefault(str(record["setting_key"]), []).append(record)

    best: SettingSummary | None = None
    for key, records in groups.items():
        records = sorted(records, key=lambda r: int(r["seed"]))
        if len({int(r["seed"]) for r in records}) != expected or len(records) != expected:
            continue
        val_mean = float(np.mean([float(r["val_accuracy"]) for r in records]))
        tests = [float(r["test_accuracy"]) for r in records]
        test_mean, test_std = aggregate_runs(tests, expected=expected)
        if best is None or val_mean > best.val_mean:
            best = SettingSummary(
                mode=str(records[0]["mode"]),
                architecture=str(records[0]["architecture"]),
                setting_key=key,
                config=dict(records[0]["config"]),
                val_mean=val_mean,
                test_mean=test_mean,
                test_std=test_std,
                test_accuracies=tuple(tests),
            )
    return best


def hyperparameter_search(
    dataset: GraphDataset,
    grid: HyperparameterGrid,
    base: TrainConfig,
    modes: Sequence[str] = MODES,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    on_trial: Callable[[TrialResult], None] | None = None,
    output: Output | None = None,
) -> dict[str, SettingSummary]:
    """Run every grid point x seed for each mode and select per mode by validation.

    Returns:
        Mapping mode -> summary of the selected setting

    Raises:
        DomainError: the grid expands to no configuration
    """
    out = output or get_output()
    if base.model.architecture not in ARCHITECTURES:
        raise InvalidConfigurationError(f"Unknown architecture {base.model.architecture}", field="architecture")
    if len(seeds) < 2:
        raise InvalidConfigurationError("hyperparameter search needs at least two seeds", field="seeds")

    summaries: dict[str, SettingSummary] = {}
    stage1_cache: dict[str, Stage1Result] = {}
    for mode in (normalize_mode(m) for m in modes):
        configs = grid.expand(mode, base)
        if not configs:
            raise DomainError(f"Hyperparameter grid is empty for mode {mode}")
        records: list[dict[str, Any]] = []
        total = len(configs) * len(seeds)
        for n, (config, seed) in enumerate(itertools.product(configs, seeds), 1):
            trial = run_trial(dataset, config.with_seed(seed), stage1_cache, output=out)
            summary_line = f"{mode} seed={seed} val={trial.val_accuracy:.3f} test={trial.test_accuracy:.3f}"
            out.step(n, total, "🎯", summary_line)
            records.append(trial.to_record())
            if on_trial is not None:
                on_trial(trial)
        summary = select_setting(records, expected=len(seeds))
        if summary is not None:
            summaries[mode] = summary
    return summaries