"""Confusion-matrix accumulation and the characteristic fractions derived
from it: sensitivity, specificity, and the predictive values.

Counts may be real-valued so that matrices averaged over resampling
iterations, or weighted by pooling, work exactly like integer count tables.
Metrics with an empty denominator raise UndefinedMetricError rather than
silently returning 0: with tiny test sets an empty cell is a design problem
the caller must see.

Predictive values depend on the class prevalences.  Matrices produced by
stratified designs (class sizes fixed by the experimenter) carry
``stratified=True`` and refuse to compute PPV/NPV unless prevalences are
supplied.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedMetricError

__all__ = [
    "ConfusionMatrix",
    "ClassMetrics",
    "accumulate",
    "sensitivity",
    "specificity",
    "ppv",
    "npv",
    "row_normalize",
    "class_metrics",
    "guessing_baseline",
]


@dataclass
class ConfusionMatrix:
    """Square count table indexed (reference class, predicted class)."""

    classes: list[str]
    counts: np.ndarray = None
    stratified: bool = False

    def __post_init__(self):
        self.classes = list(self.classes)
        if self.counts is None:
            self.counts = np.zeros((len(self.classes), len(self.classes)))
        else:
            self.counts = np.asarray(self.counts, dtype=float)
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValueError(
                f"counts must be {k}x{k} for {k} classes, got {self.counts.shape}"
            )
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    def _index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise ValueError(f"unknown class label {label!r}; classes are {self.classes}") from None

    def accumulate(self, reference: str, predicted: str, weight: float = 1.0) -> "ConfusionMatrix":
        """Add ``weight`` to the (reference, predicted) cell; returns self."""
        if weight <= 0:
            raise ValueError(f"weight must be positive, got {weight}")
        self.counts[self._index(reference), self._index(predicted)] += weight
        return self

    def accumulate_arrays(self, reference, predicted) -> "ConfusionMatrix":
        """Accumulate paired label arrays in one shot."""
        ref_idx = np.array([self._index(r) for r in np.asarray(reference).ravel()])
        pred_idx = np.array([self._index(p) for p in np.asarray(predicted).ravel()])
        if ref_idx.shape != pred_idx.shape:
            raise ValueError("reference and predicted must have equal length")
        np.add.at(self.counts, (ref_idx, pred_idx), 1.0)
        return self

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise ValueError("cannot merge matrices with different class lists")
        return ConfusionMatrix(
            self.classes,
            self.counts + other.counts,
            stratified=self.stratified or other.stratified,
        )

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def total(self) -> float:
        return float(self.counts.sum())

    def copy(self) -> "ConfusionMatrix":
        return ConfusionMatrix(self.classes, self.counts.copy(), self.stratified)

    # --- CSV round trip -------------------------------------------------

    def to_csv(self) -> str:
        """Header row/column of class labels, counts as decimals."""
        out = io.StringIO()
        out.write("," + ",".join(self.classes) + "\n")
        for label, row in zip(self.classes, self.counts):
            out.write(label + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, stratified: bool = False) -> "ConfusionMatrix":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        header = lines[0].split(",")
        classes = header[1:]
        counts = []
        for ln in lines[1:]:
            parts = ln.split(",")
            counts.append([float(v) for v in parts[1:]])
        return cls(classes, np.array(counts), stratified=stratified)


@dataclass
class ClassMetrics:
    """Per-class performance fractions plus the overall hit rate."""

    classes: list[str]
    sensitivity: dict[str, float]
    specificity: dict[str, float]
    ppv: dict[str, float] = field(default_factory=dict)
    npv: dict[str, float] = field(default_factory=dict)
    support: dict[str, float] = field(default_factory=dict)
    overall_accuracy: float = float("nan")


def accumulate(cm: ConfusionMatrix, reference: str, predicted: str, weight: float = 1.0) -> ConfusionMatrix:
    """Functional alias for ConfusionMatrix.accumulate."""
    return cm.accumulate(reference, predicted, weight)


def sensitivity(cm: ConfusionMatrix, label: str) -> float:
    """Diagonal cell over the row sum: recognized fraction of true cases."""
    i = cm._index(label)
    row = cm.counts[i].sum()
    if row <= 0:
        raise UndefinedMetricError(f"no test cases of class {label!r}: sensitivity undefined")
    return float(cm.counts[i, i] / row)


def specificity(cm: ConfusionMatrix, label: str) -> float:
    """Fraction of cases truly not of ``label`` that are not predicted as it."""
    i = cm._index(label)
    mask = np.arange(len(cm.classes)) != i
    denom = cm.counts[mask].sum()
    if denom <= 0:
        raise UndefinedMetricError(f"no test cases outside class {label!r}: specificity undefined")
    num = cm.counts[np.ix_(mask, mask)].sum()
    return float(num / denom)


def _weighted_counts(cm: ConfusionMatrix, prevalence) -> np.ndarray:
    """Rows reweighted so row masses are proportional to the prevalences."""
    if prevalence is None:
        if cm.stratified:
            raise ValueError(
                "matrix rows come from a stratified design and do not reflect "
                "class frequencies; predictive values cannot be calculated "
                "without prevalences"
            )
        return cm.counts
    prev = np.asarray([prevalence[c] for c in cm.classes], dtype=float) \
        if isinstance(prevalence, dict) else np.asarray(prevalence, dtype=float)
    if prev.shape != (len(cm.classes),) or np.any(prev < 0) or prev.sum() <= 0:
        raise ValueError("prevalence must be nonnegative per-class weights")
    rows = cm.row_sums()
    if np.any(rows[prev > 0] <= 0):
        raise UndefinedMetricError("prevalence given for a class with no test cases")
    scale = np.zeros_like(prev)
    nz = prev > 0
    scale[nz] = prev[nz] / rows[nz]
    return cm.counts * scale[:, None]


def ppv(cm: ConfusionMatrix, label: str, prevalence=None) -> float:
    """Positive predictive value: P(truly ``label`` | predicted ``label``)."""
    i = cm._index(label)
    w = _weighted_counts(cm, prevalence)
    col = w[:, i].sum()
    if col <= 0:
        raise UndefinedMetricError(f"nothing predicted as class {label!r}: PPV undefined")
    return float(w[i, i] / col)


def npv(cm: ConfusionMatrix, label: str, prevalence=None) -> float:
    """Negative predictive value: P(truly not ``label`` | predicted not ``label``)."""
    i = cm._index(label)
    w = _weighted_counts(cm, prevalence)
    mask = np.arange(len(cm.classes)) != i
    denom = w[:, mask].sum()
    if denom <= 0:
        raise UndefinedMetricError(f"everything predicted as class {label!r}: NPV undefined")
    num = w[np.ix_(mask, mask)].sum()
    return float(num / denom)


def row_normalize(cm: ConfusionMatrix) -> ConfusionMatrix:
    """Each row divided by its sum; the diagonal then equals the sensitivities."""
    rows = cm.row_sums()
    if np.any(rows <= 0):
        empty = [c for c, r in zip(cm.classes, rows) if r <= 0]
        raise UndefinedMetricError(f"empty rows for classes {empty}: cannot normalize")
    return ConfusionMatrix(cm.classes, cm.counts / rows[:, None], stratified=cm.stratified)


def overall_accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total()
    if total <= 0:
        raise UndefinedMetricError("empty confusion matrix")
    return float(np.trace(cm.counts) / total)


def class_metrics(cm: ConfusionMatrix, prevalence=None) -> ClassMetrics:
    """Bundle sensitivity/specificity (and predictive values when
    prevalences are available) for every class."""
    sens = {c: sensitivity(cm, c) for c in cm.classes}
    spez = {c: specificity(cm, c) for c in cm.classes}
    ppvs, npvs = {}, {}
    if prevalence is not None or not cm.stratified:
        for c in cm.classes:
            try:
                ppvs[c] = ppv(cm, c, prevalence)
                npvs[c] = npv(cm, c, prevalence)
            except UndefinedMetricError:
                pass
    support = dict(zip(cm.classes, cm.row_sums().tolist()))
    return ClassMetrics(
        classes=list(cm.classes),
        sensitivity=sens,
        specificity=spez,
        ppv=ppvs,
        npv=npvs,
        support=support,
        overall_accuracy=overall_accuracy(cm),
    )


def guessing_baseline(class_sizes) -> ClassMetrics:
    """Expected metrics when predictions are drawn with probability
    proportional to class prevalence, independent of the features.

    Guessing sensitivity equals the class prevalence; guessing specificity
    equals one minus the prevalence.  These are the reference points any
    reported performance should be read against.
    """
    if isinstance(class_sizes, dict):
        labels = list(class_sizes)
        sizes = np.asarray([class_sizes[c] for c in labels], dtype=float)
    else:
        sizes = np.asarray(class_sizes, dtype=float)
        labels = [f"c{i + 1}" for i in range(len(sizes))]
    if len(sizes) == 0 or np.any(sizes <= 0):
        raise ValueError("class sizes must be positive")
    prev = sizes / sizes.sum()
    return ClassMetrics(
        classes=labels,
        sensitivity={c: float(p) for c, p in zip(labels, prev)},
        specificity={c: float(1 - p) for c, p in zip(labels, prev)},
        ppv={c: float(p) for c, p in zip(labels, prev)},
        npv={c: float(1 - p) for c, p in zip(labels, prev)},
        support={c: float(s) for c, s in zip(labels, sizes)},
        overall_accuracy=float((prev**2).sum()),
    )
