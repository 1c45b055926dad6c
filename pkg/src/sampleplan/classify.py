"""Linear discriminant analysis on an optional partial-least-squares score
projection: the restrictive small-sample pipeline used for the learning
curves.

LDA fits class means and a pooled within-class covariance (ridge-stabilized)
and predicts by the largest linear discriminant score.  The PLS projection
reduces the feature space to a handful of latent variables first, which is
what keeps the pipeline usable at a few training samples per class; the
number of latent variables is capped at half the total training sample
count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .simgen import LabeledDataset

__all__ = [
    "LdaModel",
    "PlsProjection",
    "PipelineModel",
    "fit_lda",
    "predict_lda",
    "fit_pls",
    "fit_pls_lda",
    "predict",
    "save_model",
    "load_model",
]

DEFAULT_RIDGE = 1e-8
DEFAULT_LATENT = 10
_PLS_MAX_ITER = 500
_PLS_TOL = 1e-10
_PLS_ACCEPT_DRIFT = 1e-2


@dataclass
class LdaModel:
    classes: list[str]
    class_means: np.ndarray        # (K, d)
    pooled_covariance: np.ndarray  # (d, d), after regularization
    priors: np.ndarray             # (K,)
    weights: np.ndarray            # (d, K) discriminant directions
    biases: np.ndarray             # (K,)
    ridge: float = 0.0

    @property
    def dim(self) -> int:
        return self.class_means.shape[1]

    def predict(self, features: np.ndarray) -> np.ndarray:
        return predict_lda(self, features)[0]

    def scores(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim == 1:
            features = features[None, :]
        if features.shape[1] != self.dim:
            raise ValueError(
                f"feature dimension {features.shape[1]} does not match model "
                f"dimension {self.dim}"
            )
        return features @ self.weights + self.biases


@dataclass
class PlsProjection:
    x_mean: np.ndarray     # (d,)
    weights: np.ndarray    # (d, L) NIPALS weight vectors
    loadings: np.ndarray   # (d, L) X loadings
    rotation: np.ndarray   # (d, L), scores = (X - mean) @ rotation

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]

    def transform(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim == 1:
            features = features[None, :]
        if features.shape[1] != self.x_mean.size:
            raise ValueError(
                f"feature dimension {features.shape[1]} does not match "
                f"projection dimension {self.x_mean.size}"
            )
        return (features - self.x_mean) @ self.rotation


@dataclass
class PipelineModel:
    projection: PlsProjection
    lda: LdaModel

    def predict(self, features: np.ndarray) -> np.ndarray:
        return predict(self, features)


def _class_order(labels: np.ndarray) -> list[str]:
    # declaration order = first appearance; ties in scores break by this order
    return [str(c) for c in dict.fromkeys(labels.tolist())]


def fit_lda(
    train: LabeledDataset,
    ridge: float = DEFAULT_RIDGE,
    empirical_priors: bool = False,
) -> LdaModel:
    """Fit LDA with a pooled within-class covariance.

    The pooled covariance is regularized to Sigma + ridge*trace(Sigma)/d*I,
    which keeps the fit deterministic and smooth when the sample count is
    close to the dimension.  Priors are equal by default (stratified
    designs); ``empirical_priors`` switches to training frequencies.
    """
    if ridge < 0:
        raise ValueError(f"ridge must be nonnegative, got {ridge}")
    X = train.features
    labels = train.labels
    classes = _class_order(labels)
    if len(classes) < 2:
        raise ValueError("at least 2 classes required")
    n, d = X.shape

    means = np.zeros((len(classes), d))
    scatter = np.zeros((d, d))
    counts = np.zeros(len(classes))
    for i, c in enumerate(classes):
        rows = X[labels == c]
        counts[i] = rows.shape[0]
        means[i] = rows.mean(axis=0)
        centered = rows - means[i]
        scatter += centered.T @ centered
    dof = max(n - len(classes), 1)
    pooled = scatter / dof
    if ridge > 0:
        tr = np.trace(pooled)
        bump = ridge * (tr / d) if tr > 0 else ridge
        pooled = pooled + bump * np.eye(d)
    try:
        chol = np.linalg.cholesky(pooled)
    except np.linalg.LinAlgError:
        raise SolverError(
            "pooled covariance is singular; increase ridge or provide more "
            f"training samples (n={n}, d={d}, ridge={ridge})"
        ) from None

    priors = counts / n if empirical_priors else np.full(len(classes), 1.0 / len(classes))
    # w_c = Sigma^{-1} mu_c ; b_c = -mu_c' Sigma^{-1} mu_c / 2 + log prior_c
    half = np.linalg.solve(chol, means.T)          # (d, K): L^{-1} mu
    weights = np.linalg.solve(chol.T, half)        # Sigma^{-1} mu
    biases = -0.5 * np.einsum("dk,dk->k", half, half) + np.log(priors)
    return LdaModel(
        classes=classes,
        class_means=means,
        pooled_covariance=pooled,
        priors=priors,
        weights=weights,
        biases=biases,
        ridge=ridge,
    )


def predict_lda(model: LdaModel, features: np.ndarray):
    """Labels and discriminant scores; ties break by class declaration order."""
    scores = model.scores(features)
    idx = np.argmax(scores, axis=1)  # argmax takes the first maximum
    labels = np.array(model.classes, dtype=object)[idx]
    return labels, scores


def fit_pls(X: np.ndarray, Y: np.ndarray, n_components: int) -> PlsProjection:
    """Multi-response iterative PLS on centered X and Y, deflating X only.

    Each component comes from the NIPALS power iteration on the current
    residual; training score vectors are mutually orthogonal.  Raises
    SolverError when the inner iteration fails to converge or the residual
    rank is exhausted.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d = X.shape
    if n_components < 1:
        raise ValueError(f"n_components must be at least 1, got {n_components}")
    if n_components > min(d, n - 1):
        raise ValueError(
            f"n_components must be <= min(d, n-1) = {min(d, n - 1)}, got {n_components}"
        )

    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    Yc = Y - Y.mean(axis=0)
    x_scale = float(np.linalg.norm(Xc))
    if x_scale == 0.0:
        raise SolverError("training features are constant; nothing to project")

    W = np.zeros((d, n_components))
    P = np.zeros((d, n_components))
    for comp in range(n_components):
        u = Yc[:, [np.argmax(np.einsum("ij,ij->j", Yc, Yc))]]
        w_old = np.zeros((d, 1))
        diff = np.inf
        for _ in range(_PLS_MAX_ITER):
            w = Xc.T @ u
            norm = np.linalg.norm(w)
            if norm <= 1e-14 * x_scale:
                raise SolverError(
                    f"PLS residual rank exhausted at component {comp + 1}; "
                    f"requested {n_components}"
                )
            w /= norm
            t = Xc @ w
            tt = float(np.vdot(t, t))
            if tt == 0.0:
                raise SolverError(f"zero score vector at component {comp + 1}")
            q = Yc.T @ t / tt
            if Y.shape[1] == 1:
                break
            u = Yc @ q / float(np.vdot(q, q))
            diff = float(np.linalg.norm(w - w_old))
            if diff < _PLS_TOL:
                break
            w_old = w
        else:
            # near-tied leading directions make the iterate wander slowly
            # inside the tied subspace; any direction there is valid, so
            # accept slow drift and reject only genuine divergence
            if diff > _PLS_ACCEPT_DRIFT:
                raise SolverError(
                    f"PLS inner iteration did not converge within "
                    f"{_PLS_MAX_ITER} steps at component {comp + 1} "
                    f"(weight drift {diff:.2e})"
                )
        p = Xc.T @ t / tt
        Xc = Xc - t @ p.T
        W[:, comp] = w[:, 0]
        P[:, comp] = p[:, 0]

    rotation = W @ np.linalg.pinv(P.T @ W)
    return PlsProjection(x_mean=x_mean, weights=W, loadings=P, rotation=rotation)


def effective_latent_count(requested: int, n_total: int, dim: int) -> int:
    """Latent-variable cap for small samples: at most half the total number
    of training rows (and never more than the feature count allows)."""
    if requested < 1:
        raise ValueError(f"requested latent count must be >= 1, got {requested}")
    if n_total < 2:
        raise ValueError(f"at least 2 training samples required, got {n_total}")
    return max(1, min(requested, n_total // 2, dim, n_total - 1))


def fit_pls_lda(
    train: LabeledDataset,
    requested_latent: int = DEFAULT_LATENT,
    ridge: float = DEFAULT_RIDGE,
    empirical_priors: bool = False,
) -> PipelineModel:
    """Fit the PLS score projection and an LDA on the projected scores.

    All classes are trained jointly; the response matrix is the one-column-
    per-class indicator coding.
    """
    X = train.features
    labels = train.labels
    classes = _class_order(labels)
    if len(classes) < 2:
        raise ValueError("at least 2 classes required")
    n, d = X.shape
    latent = effective_latent_count(requested_latent, n, d)
    indicator = np.zeros((n, len(classes)))
    for i, c in enumerate(classes):
        indicator[labels == c, i] = 1.0
    projection = fit_pls(X, indicator, latent)
    scores = projection.transform(X)
    lda = fit_lda(
        LabeledDataset(scores, labels), ridge=ridge, empirical_priors=empirical_priors
    )
    return PipelineModel(projection=projection, lda=lda)


def predict(pipeline: PipelineModel, features: np.ndarray) -> np.ndarray:
    """Project and classify; deterministic."""
    return predict_lda(pipeline.lda, pipeline.projection.transform(features))[0]


# --- model container ------------------------------------------------------

_FORMAT_VERSION = 1


def save_model(model: LdaModel | PipelineModel, path):
    """Versioned binary container; loading reproduces bit-identical
    predictions."""
    if isinstance(model, LdaModel):
        payload = {"kind": "lda", **_lda_arrays(model, "")}
    elif isinstance(model, PipelineModel):
        payload = {
            "kind": "pls_lda",
            "pls_x_mean": model.projection.x_mean,
            "pls_weights": model.projection.weights,
            "pls_loadings": model.projection.loadings,
            "pls_rotation": model.projection.rotation,
            **_lda_arrays(model.lda, "lda_"),
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    kind = payload.pop("kind")
    np.savez_compressed(
        path,
        kind=np.array(kind),
        format_version=np.array(_FORMAT_VERSION),
        **payload,
    )


def _lda_arrays(model: LdaModel, prefix: str) -> dict:
    return {
        f"{prefix}classes": np.array(model.classes, dtype=str),
        f"{prefix}class_means": model.class_means,
        f"{prefix}pooled_covariance": model.pooled_covariance,
        f"{prefix}priors": model.priors,
        f"{prefix}weights": model.weights,
        f"{prefix}biases": model.biases,
        f"{prefix}ridge": np.array(model.ridge),
    }


def _lda_from_arrays(archive, prefix: str) -> LdaModel:
    return LdaModel(
        classes=[str(c) for c in archive[f"{prefix}classes"]],
        class_means=archive[f"{prefix}class_means"],
        pooled_covariance=archive[f"{prefix}pooled_covariance"],
        priors=archive[f"{prefix}priors"],
        weights=archive[f"{prefix}weights"],
        biases=archive[f"{prefix}biases"],
        ridge=float(archive[f"{prefix}ridge"]),
    )


def load_model(path) -> LdaModel | PipelineModel:
    with np.load(path, allow_pickle=False) as archive:
        version = int(archive["format_version"])
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported model container version {version}")
        kind = str(archive["kind"])
        if kind == "lda":
            return _lda_from_arrays(archive, "")
        if kind == "pls_lda":
            projection = PlsProjection(
                x_mean=archive["pls_x_mean"],
                weights=archive["pls_weights"],
                loadings=archive["pls_loadings"],
                rotation=archive["pls_rotation"],
            )
            return PipelineModel(projection=projection, lda=_lda_from_arrays(archive, "lda_"))
        raise ValueError(f"unknown model kind {kind!r}")
