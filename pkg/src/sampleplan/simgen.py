"""Multivariate-Gaussian class populations and dataset drawing utilities.

Sampling follows the uniform -> inverse-normal-CDF -> matrix-root pipeline:
standard normal variates come from transforming uniform draws through the
normal quantile function, covariance structure from multiplying with the
symmetric matrix root of the covariance (eigendecomposition), and the class
mean is added.  Everything is deterministic given an `RngSeed`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .rng import RngSeed, as_rng_seed
from .special import norm_ppf

__all__ = [
    "GaussianClassSpec",
    "LabeledDataset",
    "matrix_root",
    "sample_mvn",
    "sample_problem",
    "estimate_class_moments",
    "make_problem",
    "stratified_draw",
    "growing_sequence",
    "save_csv",
    "load_csv",
    "save_npz",
    "load_npz",
]

EIG_CLIP_REL = 1e-8
SYM_TOL = 1e-10


@dataclass(frozen=True)
class GaussianClassSpec:
    """Mean vector and covariance matrix defining one simulated class."""

    label: str
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"covariance must be {mean.size}x{mean.size}, got {cov.shape}"
            )
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > SYM_TOL * scale:
            raise ValueError("covariance must be symmetric within 1e-10")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass
class LabeledDataset:
    """Feature matrix with one class label per row plus provenance."""

    features: np.ndarray
    labels: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("row count of features must equal label count")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> list[str]:
        seen = dict.fromkeys(self.labels.tolist())
        return [str(c) for c in seen]

    def class_counts(self) -> dict[str, int]:
        return {c: int(np.sum(self.labels == c)) for c in self.classes}

    def take(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.features[idx], self.labels[idx], dict(self.provenance))

    def concat(self, other: "LabeledDataset") -> "LabeledDataset":
        return LabeledDataset(
            np.vstack([self.features, other.features]),
            np.concatenate([self.labels, other.labels]),
            dict(self.provenance),
        )


def matrix_root(cov: np.ndarray) -> np.ndarray:
    """Symmetric PSD matrix root via eigendecomposition: R @ R.T == cov.

    Slightly negative eigenvalues down to -1e-8 relative to the largest one
    are clipped to zero (sample covariances of high-dimensional data are
    rank-deficient by construction); anything below that is an error.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be a square matrix")
    scale = max(1.0, float(np.abs(cov).max()))
    if np.abs(cov - cov.T).max() > SYM_TOL * scale:
        raise ValueError("covariance must be symmetric within 1e-10")
    eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
    top = float(eigvals.max(initial=0.0))
    clip = EIG_CLIP_REL * max(top, 0.0)
    if np.any(eigvals < -clip):
        raise ValueError(
            f"covariance is not positive semidefinite: smallest eigenvalue "
            f"{eigvals.min():.3e} is below the clip threshold {-clip:.3e}"
        )
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def sample_mvn(spec: GaussianClassSpec, n: int, rng: RngSeed | int) -> LabeledDataset:
    """Draw n rows from the class population; deterministic per seed."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    seed = as_rng_seed(rng)
    root = matrix_root(spec.covariance)
    gen = seed.generator()
    u = gen.random((n, spec.dim))
    z = norm_ppf(u)
    features = spec.mean + z @ root.T
    return LabeledDataset(
        features,
        np.repeat(np.asarray(spec.label), n),
        provenance={"generator": "gaussian-class", "seed": seed.seed,
                    "stream": list(seed.stream), "spec_hash": spec_hash([spec])},
    )


def sample_problem(specs: list[GaussianClassSpec], n_per_class: int,
                   rng: RngSeed | int) -> LabeledDataset:
    """Draw a stratified dataset with n_per_class rows from every class."""
    seed = as_rng_seed(rng)
    parts = [sample_mvn(spec, n_per_class, seed.child(i)) for i, spec in enumerate(specs)]
    data = parts[0]
    for part in parts[1:]:
        data = data.concat(part)
    data.provenance = {"generator": "gaussian-problem", "seed": seed.seed,
                       "stream": list(seed.stream), "spec_hash": spec_hash(specs)}
    return data


def estimate_class_moments(dataset: LabeledDataset) -> list[GaussianClassSpec]:
    """Per-class sample mean and unbiased sample covariance."""
    specs = []
    for label in dataset.classes:
        rows = dataset.features[dataset.labels == label]
        if rows.shape[0] < 2:
            raise ValueError(
                f"class {label!r} has {rows.shape[0]} sample(s); at least 2 "
                "are needed to estimate a covariance"
            )
        mean = rows.mean(axis=0)
        cov = np.cov(rows, rowvar=False, ddof=1)
        cov = np.atleast_2d(cov)
        specs.append(GaussianClassSpec(label=str(label), mean=mean, covariance=cov))
    return specs


def _simplex_means(n_classes: int, dim: int, separation: float) -> np.ndarray:
    """Class means at mutual distance ``separation``, centered at the origin."""
    if dim < n_classes - 1:
        raise ValueError(
            f"dim must be at least n_classes - 1 = {n_classes - 1} for a "
            f"simplex arrangement, got {dim}"
        )
    # regular simplex: unit vectors in K dims have pairwise distance sqrt(2);
    # project out the all-ones direction and rescale
    eye = np.eye(n_classes)
    centered = eye - eye.mean(axis=0)
    # orthonormal basis of the centered span
    q, _ = np.linalg.qr(centered.T)
    coords = centered @ q[:, : n_classes - 1]
    coords *= separation / np.sqrt(2.0)
    means = np.zeros((n_classes, dim))
    means[:, : n_classes - 1] = coords
    return means


def make_problem(
    n_classes: int,
    dim: int,
    separation: float,
    shared_cov: bool = True,
    rng: RngSeed | int = 0,
    labels: list[str] | None = None,
) -> list[GaussianClassSpec]:
    """Synthetic class populations with known difficulty.

    Means sit on a regular simplex with pairwise distance ``separation``;
    with the shared unit covariance, two classes at separation d have Bayes
    sensitivity Phi(d/2), giving closed-form anchors.  separation = 0 makes
    the classes indistinguishable (best possible accuracy 1/n_classes).
    With ``shared_cov=False`` every class gets a randomly rotated anisotropic
    covariance drawn from the rng.
    """
    if n_classes < 2:
        raise ValueError(f"n_classes must be at least 2, got {n_classes}")
    if dim < 1:
        raise ValueError(f"dim must be at least 1, got {dim}")
    if separation < 0:
        raise ValueError(f"separation must be nonnegative, got {separation}")
    if labels is None:
        labels = [f"c{i + 1}" for i in range(n_classes)]
    if len(labels) != n_classes:
        raise ValueError("labels must match n_classes")
    means = _simplex_means(n_classes, dim, separation)
    specs = []
    gen = as_rng_seed(rng).generator()
    for i in range(n_classes):
        if shared_cov:
            cov = np.eye(dim)
        else:
            scales = gen.uniform(0.5, 1.5, size=dim)
            basis, _ = np.linalg.qr(gen.standard_normal((dim, dim)))
            cov = (basis * scales) @ basis.T
        specs.append(GaussianClassSpec(label=labels[i], mean=means[i], covariance=cov))
    return specs


def stratified_draw(
    pool: LabeledDataset, n_per_class: int, rng: RngSeed | int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Sample n_per_class cases per class without replacement; returns the
    small set and the remaining pool."""
    seed = as_rng_seed(rng)
    gen = seed.generator()
    chosen = []
    for label in pool.classes:
        idx = np.flatnonzero(pool.labels == label)
        if idx.size < n_per_class:
            raise ValueError(
                f"class {label!r} has {idx.size} cases, cannot draw {n_per_class}"
            )
        chosen.append(gen.choice(idx, size=n_per_class, replace=False))
    chosen = np.sort(np.concatenate(chosen))
    mask = np.zeros(len(pool), dtype=bool)
    mask[chosen] = True
    small = pool.take(chosen)
    remainder = pool.take(np.flatnonzero(~mask))
    return small, remainder


def growing_sequence(
    source: LabeledDataset | list[GaussianClassSpec],
    sizes: list[int],
    rng: RngSeed | int,
) -> list[LabeledDataset]:
    """Nested datasets of the given per-class sizes: cases are only ever
    appended, simulating accumulating sample collection."""
    sizes = list(sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sizes must be strictly ascending, got {sizes}")
    if sizes[0] < 1:
        raise ValueError("sizes must be positive")
    seed = as_rng_seed(rng)

    if isinstance(source, LabeledDataset):
        gen = seed.generator()
        per_class_order = {}
        for label in source.classes:
            idx = np.flatnonzero(source.labels == label)
            if idx.size < sizes[-1]:
                raise ValueError(
                    f"class {label!r} has {idx.size} cases, cannot grow to {sizes[-1]}"
                )
            per_class_order[label] = gen.permutation(idx)
        out = []
        for s in sizes:
            take = np.sort(np.concatenate([per_class_order[c][:s] for c in source.classes]))
            out.append(source.take(take))
        return out

    # generator source: draw the largest set once, expose nested prefixes
    specs = list(source)
    full = {spec.label: sample_mvn(spec, sizes[-1], seed.child(i)).features
            for i, spec in enumerate(specs)}
    out = []
    for s in sizes:
        feats = np.vstack([full[spec.label][:s] for spec in specs])
        labels = np.concatenate([np.repeat(np.asarray(spec.label), s) for spec in specs])
        out.append(LabeledDataset(feats, labels, provenance={
            "generator": "gaussian-growing", "seed": seed.seed,
            "stream": list(seed.stream), "spec_hash": spec_hash(specs),
            "n_per_class": s,
        }))
    return out


# --- persistence ---------------------------------------------------------


def spec_hash(specs: list[GaussianClassSpec]) -> str:
    """Stable hash of the generating populations."""
    h = hashlib.sha256()
    for spec in specs:
        h.update(str(spec.label).encode())
        h.update(np.ascontiguousarray(spec.mean).tobytes())
        h.update(np.ascontiguousarray(spec.covariance).tobytes())
    return h.hexdigest()[:16]


def save_csv(dataset: LabeledDataset, path):
    """Write `label,f1..fd` rows; lossless via repr of each float."""
    with open(path, "w") as fh:
        fh.write("label," + ",".join(f"f{i + 1}" for i in range(dataset.dim)) + "\n")
        for label, row in zip(dataset.labels, dataset.features):
            fh.write(str(label) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def load_csv(path) -> LabeledDataset:
    labels, rows = [], []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "label":
            raise ValueError(f"expected 'label' header column, got {header[0]!r}")
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            labels.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    return LabeledDataset(np.array(rows), np.array(labels), provenance={"source": str(path)})


def save_npz(dataset: LabeledDataset, path):
    """Compact binary container with embedded provenance; exact round trip."""
    np.savez_compressed(
        path,
        features=dataset.features,
        labels=dataset.labels.astype(str),
        provenance=np.array(json.dumps(dataset.provenance)),
        format_version=np.array(1),
    )


def load_npz(path) -> LabeledDataset:
    with np.load(path, allow_pickle=False) as archive:
        version = int(archive["format_version"])
        if version != 1:
            raise ValueError(f"unsupported dataset container version {version}")
        return LabeledDataset(
            archive["features"],
            archive["labels"],
            provenance=json.loads(str(archive["provenance"])),
        )
