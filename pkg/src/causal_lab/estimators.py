"""scikit-learn front end for the identification pipeline.

Each sample is one experiment's counts flattened in ``(j1, k1, j2, k2)``
row-major order: 16 columns for binary step-1 data, or 80 columns when the
four step-2 tables (pairs 11, 12, 21, 22) are appended.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .identifier import LABELS, MEMORY_PENDING, identify
from .statistics import DEFAULT_ALPHA, PRIMITIVES, CountsTable, chi2_condition

STEP1_SHAPE = (2, 2, 2, 2)
STEP1_WIDTH = 16
FULL_WIDTH = STEP1_WIDTH * 5
PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))


def check_counts_matrix(X, allow_step2: bool = True) -> np.ndarray:
    """Validate a 2-d array of flattened count tables and return it as ``int64``."""
    X = check_array(X, dtype=None, ensure_2d=True)
    widths = (STEP1_WIDTH, FULL_WIDTH) if allow_step2 else (STEP1_WIDTH,)
    if X.shape[1] not in widths:
        raise ValueError(f"expected {' or '.join(map(str, widths))} columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X)) or np.any(X < 0) or not np.all(np.equal(np.mod(X, 1), 0)):
        raise ValueError("counts must be nonnegative integers")
    X = X.astype(np.int64)
    if np.any(X[:, :STEP1_WIDTH].sum(axis=1) == 0):
        raise ValueError("a sample has no step-1 counts")
    return X


def check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def split_row(row: np.ndarray):
    step1 = CountsTable(row[:STEP1_WIDTH].reshape(STEP1_SHAPE))
    if row.shape[0] == STEP1_WIDTH:
        return step1, None
    step2 = {
        pair: CountsTable(row[STEP1_WIDTH * (i + 1): STEP1_WIDTH * (i + 2)].reshape(STEP1_SHAPE))
        for i, pair in enumerate(PAIRS)
    }
    return step1, step2


class MarkovChi2Transformer(TransformerMixin, BaseEstimator):
    """Map step-1 counts to the six χ² statistics (columns ①..⑥).

    Stateless apart from recording the input width in ``fit``.
    """

    def __init__(self, alpha: float = DEFAULT_ALPHA):
        self.alpha = alpha

    def fit(self, X, y=None):
        X = check_counts_matrix(X)
        check_alpha(self.alpha)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_counts_matrix(X)
        alpha = check_alpha(self.alpha)
        out = np.zeros((X.shape[0], len(PRIMITIVES)))
        for i, row in enumerate(X):
            step1, _ = split_row(row)
            for j, tag in enumerate(PRIMITIVES):
                out[i, j] = chi2_condition(step1, tag, alpha).statistic
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array([f"chi2_{t}" for t in PRIMITIVES], dtype=object)


class StrategyClassifier(ClassifierMixin, BaseEstimator):
    """Predict the strategy class label of each experiment.

    Nothing is learned: ``fit`` only validates inputs and fixes ``classes_``
    to the full label set, so the estimator composes with pipelines and
    scoring utilities.  Step-1-only rows with a memory verdict predict the
    pending step-1 label.
    """

    def __init__(self, alpha: float = DEFAULT_ALPHA, chsh_margin: float = 0.0):
        self.alpha = alpha
        self.chsh_margin = chsh_margin

    def fit(self, X, y=None):
        X = check_counts_matrix(X)
        check_alpha(self.alpha)
        if float(self.chsh_margin) < 0:
            raise ValueError("chsh_margin must be nonnegative")
        self.classes_ = np.array(LABELS + MEMORY_PENDING, dtype=object)
        self.n_features_in_ = X.shape[1]
        return self

    def verdicts(self, X) -> list:
        check_is_fitted(self, "classes_")
        X = check_counts_matrix(X)
        alpha = check_alpha(self.alpha)
        out = []
        for row in X:
            step1, step2 = split_row(row)
            out.append(identify(step1, step2, alpha, float(self.chsh_margin), allow_pending=True))
        return out

    def predict(self, X):
        return np.array([v.label for v in self.verdicts(X)], dtype=object)
