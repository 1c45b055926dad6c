"""Iterated stratified k-fold cross-validation, large-test-set evaluation of
the surrogate models, and learning-curve construction.

Three views of a learning curve are produced:

``population``
    For each training size, many independent datasets are drawn, one model
    trained per dataset and evaluated on a large test set.  Mean and 5th-95th
    percentiles describe what data sets of that size can deliver.
``growing_truth``
    One nested, growing dataset; the surrogate models of iterated CV
    evaluated on the large test set.  Percentiles reflect model instability
    only (the large test set contributes almost no test uncertainty).
``growing_cv``
    The same surrogate models scored on their held-out folds: what the
    experimenter actually observes from within the small data set.

Per CV iteration, the k held-out fold predictions are pooled into a single
confusion matrix, so both growing views have one value per iteration.  The
growing views are recorded at the surrogate training size (k-1)/k times the
dataset size; the population view at the full dataset size.

Every stochastic step derives its RNG substream from the base seed plus the
job indices, so results are reproducible for any worker count.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .confusion import ConfusionMatrix, sensitivity
from .errors import SolverError
from .rng import RngSeed, as_rng_seed
from .simgen import GaussianClassSpec, LabeledDataset, growing_sequence, sample_problem, stratified_draw

__all__ = [
    "CvSpec",
    "CvResult",
    "LearningCurve",
    "stratified_folds",
    "iterated_cv",
    "learning_curve_growing",
    "learning_curve_population",
    "retrospective_curve",
    "percentile_band",
    "fit_inverse_power_law",
    "write_curves_csv",
    "read_curves_csv",
    "config_hash",
]

# substream namespaces, one per job family
_NS_ITER = 11
_NS_GROW = 12
_NS_POP = 13
_NS_RETRO = 14


@dataclass(frozen=True)
class CvSpec:
    k: int = 5
    iterations: int = 100
    seed: RngSeed = field(default_factory=lambda: RngSeed(0))
    stratified: bool = True

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be at least 1, got {self.iterations}")
        object.__setattr__(self, "seed", as_rng_seed(self.seed))


@dataclass
class CvResult:
    classes: list[str]
    iteration_matrices: list[ConfusionMatrix]
    external_matrices: list[ConfusionMatrix] | None
    k: int
    n_samples: int
    effective_train_per_class: dict[str, float]

    def cv_sensitivities(self, label: str) -> np.ndarray:
        return np.array([sensitivity(m, label) for m in self.iteration_matrices])

    def external_sensitivities(self, label: str) -> np.ndarray:
        if self.external_matrices is None:
            raise ValueError("no external test set was evaluated")
        return np.array([sensitivity(m, label) for m in self.external_matrices])


@dataclass
class LearningCurve:
    """Per-training-size performance statistics for one evaluation view."""

    view: str
    classes: list[str]
    sizes: list[float]      # training samples per class
    mean: np.ndarray        # (n_sizes, n_classes)
    p5: np.ndarray
    p95: np.ndarray

    def band_width(self, label: str) -> np.ndarray:
        j = self.classes.index(label)
        return self.p95[:, j] - self.p5[:, j]

    def check_band_order(self) -> bool:
        return bool(np.all(self.p5 <= self.mean + 1e-12) and np.all(self.mean <= self.p95 + 1e-12))


def stratified_folds(labels, k: int, rng: RngSeed | int) -> np.ndarray:
    """Fold assignment 0..k-1 per sample; per class the fold counts differ
    by at most one.  Deterministic per seed."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"k = {k} exceeds the number of samples {n}")
    gen = as_rng_seed(rng).generator()
    folds = np.empty(n, dtype=int)
    if k == n:
        # leave-one-out: one sample per fold regardless of stratification
        folds[:] = gen.permutation(n)
        return folds
    for label in dict.fromkeys(labels.tolist()):
        idx = np.flatnonzero(labels == label)
        offset = int(gen.integers(k))
        ids = (np.arange(idx.size) + offset) % k
        folds[idx] = gen.permutation(ids)
    return folds


def _plain_folds(n: int, k: int, gen) -> np.ndarray:
    ids = (np.arange(n) + int(gen.integers(k))) % k
    return gen.permutation(ids)


def _run_jobs(jobs, workers: int):
    if workers <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def _one_cv_iteration(data: LabeledDataset, fit_fn, k: int, stratified: bool,
                      rng: RngSeed, classes: list[str],
                      external_test: LabeledDataset | None):
    labels = data.labels
    if stratified:
        folds = stratified_folds(labels, k, rng)
    else:
        folds = _plain_folds(len(data), k, rng.generator())
    pooled = ConfusionMatrix(classes, stratified=True)
    external = ConfusionMatrix(classes, stratified=True) if external_test is not None else None
    for f in range(k):
        test_mask = folds == f
        if not np.any(test_mask):
            continue
        train = data.take(np.flatnonzero(~test_mask))
        present = set(train.labels.tolist())
        missing = [c for c in classes if c not in present]
        if missing:
            raise ValueError(
                f"training split for fold {f} is missing classes {missing}; "
                "use stratified folds or a smaller k"
            )
        model = fit_fn(train)
        held_out = data.take(np.flatnonzero(test_mask))
        pooled.accumulate_arrays(held_out.labels, model.predict(held_out.features))
        if external is not None:
            external.accumulate_arrays(
                external_test.labels, model.predict(external_test.features)
            )
    return pooled, external


def iterated_cv(
    data: LabeledDataset,
    fit_fn,
    cv: CvSpec,
    external_test: LabeledDataset | None = None,
    workers: int = 1,
) -> CvResult:
    """Iterated k-fold CV: fresh fold assignment per iteration, the k
    surrogates' held-out predictions pooled into one confusion matrix per
    iteration.

    With ``external_test`` given, every surrogate is additionally scored on
    it, pooled the same way, giving the matched large-test-set view of
    exactly the same models.
    """
    classes = data.classes
    counts = data.class_counts()
    jobs = [
        (lambda i=i: _one_cv_iteration(
            data, fit_fn, cv.k, cv.stratified,
            cv.seed.child(_NS_ITER, i), classes, external_test,
        ))
        for i in range(cv.iterations)
    ]
    results = _run_jobs(jobs, workers)
    effective = {c: (cv.k - 1) / cv.k * n for c, n in counts.items()}
    return CvResult(
        classes=classes,
        iteration_matrices=[r[0] for r in results],
        external_matrices=[r[1] for r in results] if external_test is not None else None,
        k=cv.k,
        n_samples=len(data),
        effective_train_per_class=effective,
    )


def percentile_band(values, lo: float = 5.0, hi: float = 95.0):
    """(p_lo, mean, p_hi) with linear interpolation between order statistics."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot take percentiles of an empty collection")
    return (
        float(np.percentile(values, lo, method="linear")),
        float(values.mean()),
        float(np.percentile(values, hi, method="linear")),
    )


def _band_curve(view: str, classes: list[str], sizes: list[float],
                per_size_values: list[dict[str, np.ndarray]]) -> LearningCurve:
    n_sizes, n_classes = len(sizes), len(classes)
    mean = np.zeros((n_sizes, n_classes))
    p5 = np.zeros((n_sizes, n_classes))
    p95 = np.zeros((n_sizes, n_classes))
    for si, values in enumerate(per_size_values):
        for ci, c in enumerate(classes):
            lo, mid, hi = percentile_band(values[c])
            p5[si, ci], mean[si, ci], p95[si, ci] = lo, mid, hi
    return LearningCurve(view=view, classes=classes, sizes=list(sizes),
                         mean=mean, p5=p5, p95=p95)


def learning_curve_growing(
    source,
    sizes: list[int],
    cv: CvSpec,
    large_test: LabeledDataset,
    fit_fn,
    workers: int = 1,
) -> tuple[LearningCurve, LearningCurve]:
    """CV estimate and matched large-test truth for one growing dataset.

    Returns (growing_cv, growing_truth), both indexed at the surrogate
    training size (k-1)/k of the dataset size.
    """
    grown = growing_sequence(source, list(sizes), cv.seed.child(_NS_GROW))
    classes = grown[0].classes
    cv_values, truth_values, eff_sizes = [], [], []
    for si, dataset in enumerate(grown):
        result = iterated_cv(
            dataset,
            fit_fn,
            CvSpec(cv.k, cv.iterations, cv.seed.child(_NS_GROW, si), cv.stratified),
            external_test=large_test,
            workers=workers,
        )
        cv_values.append({c: result.cv_sensitivities(c) for c in classes})
        truth_values.append({c: result.external_sensitivities(c) for c in classes})
        eff = result.effective_train_per_class
        eff_sizes.append(sum(eff.values()) / len(eff))
    return (
        _band_curve("growing_cv", classes, eff_sizes, cv_values),
        _band_curve("growing_truth", classes, eff_sizes, truth_values),
    )


def _population_one(specs, size, fit_fn, large_test, rng):
    dataset = sample_problem(specs, size, rng)
    model = fit_fn(dataset)
    cm = ConfusionMatrix(dataset.classes, stratified=True)
    cm.accumulate_arrays(large_test.labels, model.predict(large_test.features))
    return cm


def learning_curve_population(
    specs: list[GaussianClassSpec],
    sizes: list[int],
    fit_fn,
    large_test: LabeledDataset,
    n_datasets: int = 100,
    seed: RngSeed | int = 0,
    workers: int = 1,
) -> LearningCurve:
    """Unconditional learning curve: per size, ``n_datasets`` independent
    datasets, one model per dataset, all evaluated on the large test set."""
    if n_datasets < 1:
        raise ValueError(f"n_datasets must be at least 1, got {n_datasets}")
    base = as_rng_seed(seed)
    classes = [s.label for s in specs]
    per_size = []
    for si, size in enumerate(sizes):
        jobs = [
            (lambda si=si, j=j: _population_one(
                specs, sizes[si], fit_fn, large_test, base.child(_NS_POP, si, j)))
            for j in range(n_datasets)
        ]
        matrices = _run_jobs(jobs, workers)
        per_size.append({c: np.array([sensitivity(m, c) for m in matrices]) for c in classes})
    return _band_curve("population", classes, [float(s) for s in sizes], per_size)


def retrospective_curve(
    fixed_pool: LabeledDataset,
    sizes: list[int],
    fit_fn,
    large_test: LabeledDataset,
    n_redraws: int = 100,
    seed: RngSeed | int = 0,
    workers: int = 1,
) -> LearningCurve:
    """Population-style curve from redrawing subsets of one fixed pool.

    Lies between the population and growing views: many distinct subsets
    exist at small sizes, but as the size approaches the pool the redraws
    coincide and the band collapses.
    """
    base = as_rng_seed(seed)
    classes = fixed_pool.classes
    counts = fixed_pool.class_counts()
    for s in sizes:
        short = {c: n for c, n in counts.items() if n < s}
        if short:
            raise ValueError(f"sizes exceed the pool for classes {short} (requested {s})")

    def one(si, j):
        subset, _ = stratified_draw(fixed_pool, sizes[si], base.child(_NS_RETRO, si, j))
        model = fit_fn(subset)
        cm = ConfusionMatrix(classes, stratified=True)
        cm.accumulate_arrays(large_test.labels, model.predict(large_test.features))
        return cm

    per_size = []
    for si in range(len(sizes)):
        matrices = _run_jobs(
            [(lambda si=si, j=j: one(si, j)) for j in range(n_redraws)], workers
        )
        per_size.append({c: np.array([sensitivity(m, c) for m in matrices]) for c in classes})
    return _band_curve("retrospective", classes, [float(s) for s in sizes], per_size)


def fit_inverse_power_law(points):
    """Least-squares fit of p(n) = a - b * n**(-c) with a in [0, 1] and
    b, c >= 0.

    Returns (a, b, c, residual_norm).  An extrapolation aid for learning
    curves; never used as a gate.
    """
    points = [(float(n), float(p)) for n, p in points]
    if len(points) < 4:
        raise ValueError(f"at least 4 points required, got {len(points)}")
    ns = np.array([n for n, _ in points])
    ps = np.array([p for _, p in points])
    if len(np.unique(ns)) != len(ns):
        raise ValueError("training sizes must be distinct")

    def residuals(theta):
        a, b, c = theta
        return a - b * ns ** (-c) - ps

    a0 = min(1.0, max(ps.max(), 1e-6))
    b0 = max(ps.max() - ps.min(), 1e-3)
    x0 = np.array([a0, b0, 0.5])
    fit = least_squares(
        residuals, x0, bounds=([0.0, 0.0, 0.0], [1.0, np.inf, np.inf])
    )
    if not fit.success:
        raise SolverError(
            f"inverse power-law fit did not converge: {fit.message}; "
            f"best iterate a={fit.x[0]:.6f}, b={fit.x[1]:.6f}, c={fit.x[2]:.6f}"
        )
    a, b, c = fit.x
    return float(a), float(b), float(c), float(np.linalg.norm(fit.fun))


# --- persistence -----------------------------------------------------------


def config_hash(config: dict) -> str:
    """Stable short hash of a JSON-serializable configuration."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def write_curves_csv(curves, fh, seed: int, cfg_hash: str, precision: int = 4):
    """Tidy rows: view, class, train_size_per_class, statistic, value, seed,
    config_hash."""
    fh.write("view,class,train_size_per_class,statistic,value,seed,config_hash\n")
    for curve in curves:
        for si, size in enumerate(curve.sizes):
            for ci, label in enumerate(curve.classes):
                for stat, table in (("mean", curve.mean), ("p5", curve.p5), ("p95", curve.p95)):
                    fh.write(
                        f"{curve.view},{label},{size:g},{stat},"
                        f"{table[si, ci]:.{precision}f},{seed},{cfg_hash}\n"
                    )


def read_curves_csv(fh) -> list[LearningCurve]:
    """Rebuild LearningCurve objects from the tidy CSV."""
    header = fh.readline().strip().split(",")
    expected = ["view", "class", "train_size_per_class", "statistic", "value", "seed", "config_hash"]
    if header != expected:
        raise ValueError(f"unexpected curve CSV header {header}")
    cells = {}
    views, classes_by_view, sizes_by_view = [], {}, {}
    for line in fh:
        line = line.strip()
        if not line:
            continue
        view, label, size, stat, value, _seed, _hash = line.split(",")
        size = float(size)
        if view not in classes_by_view:
            views.append(view)
            classes_by_view[view] = []
            sizes_by_view[view] = []
        if label not in classes_by_view[view]:
            classes_by_view[view].append(label)
        if size not in sizes_by_view[view]:
            sizes_by_view[view].append(size)
        cells[(view, label, size, stat)] = float(value)
    curves = []
    for view in views:
        classes = classes_by_view[view]
        sizes = sizes_by_view[view]
        arrays = {stat: np.zeros((len(sizes), len(classes))) for stat in ("mean", "p5", "p95")}
        for si, size in enumerate(sizes):
            for ci, label in enumerate(classes):
                for stat in arrays:
                    arrays[stat][si, ci] = cells[(view, label, size, stat)]
        curves.append(
            LearningCurve(view=view, classes=classes, sizes=sizes,
                          mean=arrays["mean"], p5=arrays["p5"], p95=arrays["p95"])
        )
    return curves
