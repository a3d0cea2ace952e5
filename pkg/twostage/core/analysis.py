"""
Embedding diagnostics.

- PCA cumulative explained variance and the interpolated dimension needed
  to retain 99% of the variance
- average absolute pairwise Pearson correlation between embedding dimensions
- 2-D principal-component scatter with a deterministic sign convention
- five-split accuracy aggregation and a class-separation ratio
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .artifacts import write_csv, write_json
from .exceptions import ContractViolation, DomainError

Array = NDArray[np.float64]

RETAINED_VARIANCE = 0.99
EXPECTED_SPLITS = 5
MONOTONE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ExplainedVariance:
    """Cumulative explained variance V(1..d) with the underlying spectrum."""

    curve: Array
    eigenvalues: Array
    components: Array
    mean: Array
    degenerate: bool = False


@dataclass
class ScatterTable:
    pc1: Array
    pc2: Array
    labels: NDArray[np.int64] | None = None

    def rows(self) -> list[tuple[float, float, int | str]]:
        labels: Sequence[int | str] = self.labels.tolist() if self.labels is not None else [""] * len(self.pc1)
        return [(float(a), float(b), c) for a, b, c in zip(self.pc1, self.pc2, labels, strict=True)]


@dataclass
class AnalysisReport:
    """Capacity diagnostics for one embedding matrix."""

    n: int
    d: int
    intrinsic_dimension: float
    variance_curve: list[float]
    avg_abs_correlation: float | None
    degenerate: bool = False
    separation_ratio: float | None = None
    accuracy_mean: float | None = None
    accuracy_std: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _embedding_matrix(embeddings: ArrayLike) -> Array:
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2:
        raise ContractViolation(f"Embedding matrix must be 2-D, got shape {e.shape}")
    if e.shape[0] < 2:
        raise DomainError(f"Need at least 2 embeddings, got {e.shape[0]}")
    if not np.all(np.isfinite(e)):
        raise ContractViolation("Embedding matrix contains non-finite entries")
    return e


def pca_explained_variance(embeddings: ArrayLike) -> ExplainedVariance:
    """V(i) = sum of the i largest covariance eigenvalues / trace.

    Zero total variance (all rows identical) yields V == 1 with the
    ``degenerate`` flag set.
    """
    e = _embedding_matrix(embeddings)
    n, d = e.shape
    mean = e.mean(axis=0)
    centered = e - mean
    cov = centered.T @ centered / (n - 1)
    eigenvalues, vectors = np.linalg.eigh(cov)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    order = np.lexsort((np.arange(d), -eigenvalues))
    eigenvalues = eigenvalues[order]
    vectors = vectors[:, order]

    total = float(eigenvalues.sum())
    if total <= 0.0:
        return ExplainedVariance(np.ones(d), eigenvalues, vectors, mean, degenerate=True)
    curve = np.cumsum(eigenvalues) / total
    return ExplainedVariance(curve, eigenvalues, vectors, mean)


def intrinsic_dimension(curve: ArrayLike, retained: float = RETAINED_VARIANCE) -> float:
    """Interpolated dimension at which V crosses ``retained``, with V(0) = 0.

    For V(j) <= retained <= V(j+1) returns j + (retained - V(j)) / (V(j+1) - V(j)).

    Raises:
        ContractViolation: V decreases or never reaches ``retained``
    """
    v = np.concatenate([[0.0], np.asarray(curve, dtype=np.float64)])
    if np.any(np.diff(v) < -MONOTONE_TOLERANCE):
        raise ContractViolation("Explained-variance curve must be non-decreasing")
    for j in range(len(v) - 1):
        if v[j + 1] >= retained:
            return j + (retained - v[j]) / (v[j + 1] - v[j])
    raise ContractViolation(f"Explained-variance curve never reaches {retained}", details=f"V(d)={v[-1]}")


def avg_abs_correlation(embeddings: ArrayLike) -> float:
    """Mean |Pearson r| over the d(d-1)/2 column pairs.

    Pairs with a zero-variance column contribute 0.
    """
    e = _embedding_matrix(embeddings)
    d = e.shape[1]
    if d < 2:
        raise DomainError(f"Need at least 2 dimensions for pairwise correlation, got {d}")
    mean = e.mean(axis=0)
    centered = e - mean
    norms = np.sqrt((centered * centered).sum(axis=0))
    scale = np.sqrt(e.shape[0]) * (1.0 + np.abs(mean))
    constant_column = norms <= 1e-12 * scale
    safe = np.where(constant_column, 1.0, norms)
    unit = centered / safe
    corr = np.abs(unit.T @ unit)
    corr[constant_column, :] = 0.0
    corr[:, constant_column] = 0.0
    upper = corr[np.triu_indices(d, k=1)]
    return float(np.clip(upper, 0.0, 1.0).mean())


def export_scatter_2d(embeddings: ArrayLike, labels: ArrayLike | None = None) -> ScatterTable:
    """Project rows onto the top-2 principal components.

    Each component is signed so that its largest-magnitude loading is
    positive (lowest index on ties).

    Raises:
        DomainError: fewer than 2 dimensions
    """
    e = _embedding_matrix(embeddings)
    if e.shape[1] < 2:
        raise DomainError(f"Scatter export needs d >= 2, got {e.shape[1]}")
    pca = pca_explained_variance(e)
    components = pca.components[:, :2].copy()
    for k in range(2):
        pivot = int(np.argmax(np.abs(components[:, k])))
        if components[pivot, k] < 0:
            components[:, k] = -components[:, k]
    projected = (e - pca.mean) @ components
    label_array = None if labels is None else np.asarray(labels, dtype=np.int64)
    return ScatterTable(projected[:, 0].copy(), projected[:, 1].copy(), label_array)


def aggregate_runs(values: Sequence[float], expected: int = EXPECTED_SPLITS) -> tuple[float, float]:
    """Mean and sample (n - 1) standard deviation of per-split accuracies.

    Raises:
        ContractViolation: not exactly ``expected`` values
    """
    if len(values) != expected:
        raise ContractViolation(f"Expected {expected} split results, got {len(values)}")
    if expected < 2:
        raise ContractViolation("Sample standard deviation needs at least 2 results")
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=1))


def class_separation_ratio(embeddings: ArrayLike, labels: ArrayLike) -> float:
    """Mean inter-class over mean intra-class squared distance.

    Returns ``inf`` when every class collapses to a single point.

    Raises:
        DomainError: fewer than two classes or no same-class pair
    """
    e = _embedding_matrix(embeddings)
    y = np.asarray(labels)
    if len(np.unique(y)) < 2:
        raise DomainError("Separation ratio needs at least two classes")
    sq = (e * e).sum(axis=1)
    distances = np.clip(sq[:, None] + sq[None, :] - 2.0 * e @ e.T, 0.0, None)
    same = y[:, None] == y[None, :]
    off_diagonal = ~np.eye(len(y), dtype=bool)
    intra = distances[same & off_diagonal]
    inter = distances[~same]
    if intra.size == 0:
        raise DomainError("Separation ratio needs at least one same-class pair")
    intra_mean = float(intra.mean())
    inter_mean = float(inter.mean())
    if intra_mean == 0.0:
        return math.inf
    return inter_mean / intra_mean


def analyze_embeddings(
    embeddings: ArrayLike,
    labels: ArrayLike | None = None,
    accuracies: Sequence[float] | None = None,
) -> AnalysisReport:
    """Compute every diagnostic that applies to ``embeddings``."""
    e = _embedding_matrix(embeddings)
    pca = pca_explained_variance(e)
    correlation = avg_abs_correlation(e) if e.shape[1] >= 2 else None

    separation = None
    if labels is not None:
        try:
            separation = class_separation_ratio(e, labels)
        except DomainError:
            separation = None

    mean = std = None
    if accuracies is not None and len(accuracies) == EXPECTED_SPLITS:
        mean, std = aggregate_runs(accuracies)

    return AnalysisReport(
        n=e.shape[0],
        d=e.shape[1],
        intrinsic_dimension=intrinsic_dimension(pca.curve),
        variance_curve=[float(v) for v in pca.curve],
        avg_abs_correlation=correlation,
        degenerate=pca.degenerate,
        separation_ratio=separation,
        accuracy_mean=mean,
        accuracy_std=std,
    )


def write_analysis(
    report: AnalysisReport,
    scatter: ScatterTable | None,
    correlation_trace: Sequence[float],
    directory: Path,
) -> list[Path]:
    """Write ``report.json``, ``scatter.csv``, ``variance_curve.csv`` and ``correlation_trace.csv``."""
    directory.mkdir(parents=True, exist_ok=True)
    written = [directory / "report.json", directory / "variance_curve.csv", directory / "correlation_trace.csv"]
    write_json(written[0], report.to_dict())
    write_csv(written[1], ("i", "V"), [(i, v) for i, v in enumerate(report.variance_curve, 1)])
    write_csv(written[2], ("epoch", "avg_abs_corr"), [(i, v) for i, v in enumerate(correlation_trace, 1)])
    if scatter is not None:
        path = directory / "scatter.csv"
        write_csv(path, ("pc1", "pc2", "label"), scatter.rows())
        written.append(path)
    return written


def render_plots(
    scatter: ScatterTable | None,
    correlation_traces: dict[str, Sequence[float]],
    directory: Path,
    title: str = "",
) -> list[Path]:
    """Render ``scatter.png`` and ``correlation_trace.png`` with matplotlib."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if scatter is not None:
        fig, ax = plt.subplots(figsize=(5, 4))
        labels = scatter.labels if scatter.labels is not None else np.zeros(len(scatter.pc1), dtype=np.int64)
        for label in np.unique(labels):
            mask = labels == label
            ax.scatter(scatter.pc1[mask], scatter.pc2[mask], s=12, label=f"class {label}")
        ax.set_xlabel("PC 1")
        ax.set_ylabel("PC 2")
        ax.set_title(title)
        ax.legend(loc="best", fontsize="small")
        path = directory / "scatter.png"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    if correlation_traces:
        fig, ax = plt.subplots(figsize=(5, 4))
        for name, trace in correlation_traces.items():
            ax.plot(range(1, len(trace) + 1), list(trace), label=name)
        ax.set_xlabel("epoch")
        ax.set_ylabel("avg |correlation|")
        ax.set_ylim(0.0, 1.0)
        ax.set_title(title)
        ax.legend(loc="best", fontsize="small")
        path = directory / "correlation_trace.png"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    return written
