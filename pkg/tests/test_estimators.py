import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from pmcv.catalog import from_id
from pmcv.estimators import FEATURES, BiharmonicClassifier, ExtrinsicFeatures
from pmcv.sampling import halton_points


@pytest.fixture
def cyl_points():
    return halton_points(from_id("cyl:c=1:kappa=1").spec, 10)


class TestFeatures:
    def test_values(self, cyl_points):
        F = ExtrinsicFeatures("cyl:c=1:kappa=1").fit().transform(cyl_points)
        assert F.shape == (10, len(FEATURES))
        np.testing.assert_allclose(F[:, 0], 0.5, atol=1e-12)
        np.testing.assert_allclose(F[:, 1], 1.0, atol=1e-12)
        np.testing.assert_allclose(F[:, 2], 1.0, atol=1e-12)
        assert np.max(F[:, -1]) <= 1e-8

    def test_selected_columns(self, cyl_points):
        est = ExtrinsicFeatures("sphere:c=1:cprime=2", features=("H_norm",))
        pts = halton_points(est.fit().immersion_, 3)
        np.testing.assert_allclose(est.transform(pts)[:, 0], 1.0, atol=1e-12)
        assert list(est.get_feature_names_out()) == ["H_norm"]

    def test_unknown_feature(self):
        with pytest.raises(ValueError):
            ExtrinsicFeatures("slice:c=1", features=("volume",)).fit()

    def test_not_fitted(self, cyl_points):
        with pytest.raises(NotFittedError):
            ExtrinsicFeatures("slice:c=1").transform(cyl_points)

    def test_pipeline(self, cyl_points):
        pipe = make_pipeline(ExtrinsicFeatures("pcyl:c=1:kappa=1:eps=0.1", features=("H_norm", "T_norm")), StandardScaler())
        Z = pipe.fit_transform(halton_points(from_id("pcyl:c=1:kappa=1:eps=0.1").spec, 12))
        np.testing.assert_allclose(Z.mean(axis=0), 0, atol=1e-12)

    def test_clone_params(self):
        est = ExtrinsicFeatures("slice:c=1", h=2e-3)
        twin = clone(est)
        assert twin.get_params() == est.get_params()
        assert not hasattr(twin, "immersion_")


class TestClassifier:
    def test_predict(self, cyl_points):
        clf = BiharmonicClassifier("cyl:c=1:kappa=1").fit()
        assert set(clf.predict(cyl_points)) == {"proper_biharmonic"}
        assert np.max(clf.decision_function(cyl_points)) <= 1e-8

    def test_routes(self):
        spec = from_id("cyl:c=1:kappa=0.5").spec
        u = halton_points(spec, 4)
        for route in ("auto", "pmc", "tau2"):
            assert set(BiharmonicClassifier(spec, route=route).fit().predict(u)) == {"neither"}

    def test_score(self, cyl_points):
        clf = BiharmonicClassifier("cyl:c=1:kappa=1").fit()
        y = np.array(["proper_biharmonic"] * 10)
        assert clf.score(cyl_points, y) == 1.0
        assert clf.score(cyl_points, np.array(["neither"] * 10)) == 0.0

    def test_classes(self):
        clf = BiharmonicClassifier("slice:c=1").fit()
        assert list(clf.classes_) == sorted(clf.classes_)
        assert "inconclusive" in clf.classes_

    def test_validation(self, cyl_points):
        with pytest.raises(ValueError):
            BiharmonicClassifier("slice:c=1", route="x").fit()
        with pytest.raises(ValueError):
            BiharmonicClassifier("slice:c=1", h=0).fit()
        with pytest.raises(ValueError):
            BiharmonicClassifier("slice:c=1").fit().predict(np.zeros((2, 3)))
