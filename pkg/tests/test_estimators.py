import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from causal_lab.estimators import MarkovChi2Transformer, StrategyClassifier, check_counts_matrix
from causal_lab.settings import table_e1_setting, table_e2_setting
from causal_lab.statistics import chi2_condition, sample_counts
from causal_lab.strategies import builtin_strategy, simulate_distribution


def row(name, n=1, seed=0, step2=False, samples=1_000_000):
    spec = builtin_strategy(name)
    parts = [sample_counts(simulate_distribution(spec, table_e1_setting(n)), samples, seed).counts.ravel()]
    if step2:
        pairs = table_e2_setting(n).pairs()
        for i, key in enumerate(sorted(pairs)):
            d = simulate_distribution(spec, pairs[key])
            parts.append(sample_counts(d, samples, seed + 100 + i).counts.ravel())
    return np.concatenate(parts)


def test_transformer_matches_statistics():
    X = np.stack([row("si", seed=1), row("sq", seed=2)])
    t = MarkovChi2Transformer().fit(X)
    out = t.transform(X)
    assert out.shape == (2, 6)
    ref = chi2_condition(X[1].reshape(2, 2, 2, 2), "1").statistic
    assert out[1, 0] == ref
    assert list(t.get_feature_names_out()) == [f"chi2_{i}" for i in range(1, 7)]


def test_classifier_predicts_labels():
    X = np.stack([row("si", seed=1, step2=True), row("sq", seed=2, step2=True), row("sc12", 3, seed=3, step2=True)])
    clf = StrategyClassifier().fit(X)
    assert list(clf.predict(X)) == ["S_I", "S_Q", "S_C,1->2"]
    assert "S_Q" in clf.classes_
    assert clf.score(X, ["S_I", "S_Q", "S_C,1->2"]) == 1.0


def test_classifier_step1_only_is_pending():
    X = np.stack([row("sq", seed=3), row("sn12", seed=5)])
    assert list(StrategyClassifier().fit(X).predict(X)) == ["parallel-memory", "S_N,1->2"]


def test_sklearn_composition():
    X = np.stack([row("si", seed=1), row("sn12", seed=2)])
    pipe = make_pipeline(MarkovChi2Transformer(alpha=0.01))
    assert pipe.fit_transform(X).shape == (2, 6)
    c = clone(StrategyClassifier(alpha=0.01, chsh_margin=2.0))
    assert c.get_params() == {"alpha": 0.01, "chsh_margin": 2.0}


def test_input_validation():
    with pytest.raises(ValueError):
        check_counts_matrix(np.ones((1, 15)))
    with pytest.raises(ValueError):
        check_counts_matrix(-np.ones((1, 16)))
    with pytest.raises(ValueError):
        check_counts_matrix(np.full((1, 16), 0.5))
    with pytest.raises(ValueError):
        check_counts_matrix(np.zeros((1, 16)))
    with pytest.raises(ValueError):
        StrategyClassifier(alpha=2).fit(np.ones((1, 16)))
    with pytest.raises(ValueError):
        StrategyClassifier(chsh_margin=-1).fit(np.ones((1, 16)))
