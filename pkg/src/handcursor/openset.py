"""Scikit-learn estimator wrapping the nearest-reference open-set gate.

`OpenSetNearestMean` makes the reference-vector machinery compose with the
wider sklearn ecosystem (pipelines, grid search over `threshold_scale`,
cross-validation on embeddings). `fit` learns the class-mean references,
`calibrate` freezes the per-class acceptance radii from held-out samples,
and `predict` answers a known class or ``"unknown"``.

Note the asymmetry with the full pipeline: there the accepted label comes
from a separate classifier head and the gate only validates it. This
estimator has no second head, so an accepted query is labeled by its
nearest reference.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

UNKNOWN = "unknown"


class OpenSetNearestMean(BaseEstimator, ClassifierMixin):
    """Nearest-class-mean classifier with per-class rejection radii.

    Parameters
    ----------
    threshold_scale : float, default=1.0
        Multiplier on the calibrated per-class thresholds. Larger values
        accept more; at 0+ every query at positive distance is rejected.

    Attributes
    ----------
    classes_ : ndarray of shape (n_classes,)
        Known class labels, in sorted order.
    means_ : ndarray of shape (n_classes, n_features)
        Per-class mean of the fitted samples.
    thresholds_ : ndarray of shape (n_classes,)
        Max calibration distance per class; +inf before `calibrate`, which
        makes the estimator a plain nearest-mean classifier.
    """

    def __init__(self, threshold_scale=1.0):
        self.threshold_scale = threshold_scale

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, indices = np.unique(y, return_inverse=True)
        if len(self.classes_) < 1:
            raise ValueError("need at least one class")
        self.means_ = np.stack(
            [X[indices == i].mean(axis=0) for i in range(len(self.classes_))]
        )
        self.thresholds_ = np.full(len(self.classes_), np.inf)
        self.calibration_counts_ = np.zeros(len(self.classes_), dtype=int)
        return self

    def calibrate(self, X, y):
        """Set each class threshold to its max calibration distance.

        Every fitted class must appear in `y`; samples should come from
        held-out splits, not the fit data.
        """
        check_is_fitted(self, "means_")
        X, y = check_X_y(X, y)
        thresholds = np.empty(len(self.classes_))
        counts = np.empty(len(self.classes_), dtype=int)
        for i, cls in enumerate(self.classes_):
            mask = y == cls
            if not mask.any():
                raise ValueError(f"no calibration samples for class {cls!r}")
            distances = np.linalg.norm(X[mask] - self.means_[i], axis=1)
            thresholds[i] = distances.max()
            counts[i] = int(mask.sum())
        self.thresholds_ = thresholds
        self.calibration_counts_ = counts
        return self

    def transform(self, X):
        """Distances to every class reference, shape (n_samples, n_classes)."""
        check_is_fitted(self, "means_")
        X = check_array(X)
        diffs = X[:, None, :] - self.means_[None, :, :]
        return np.sqrt((diffs**2).sum(axis=2))

    def predict(self, X):
        """Nearest class when strictly inside its radius, else "unknown"."""
        distances = self.transform(X)
        nearest = distances.argmin(axis=1)
        nearest_distance = distances[np.arange(len(distances)), nearest]
        effective = self.thresholds_[nearest] * self.threshold_scale
        labels = self.classes_[nearest].astype(object)
        labels[~(nearest_distance < effective)] = UNKNOWN
        return labels
