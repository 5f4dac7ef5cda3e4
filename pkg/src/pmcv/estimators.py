"""scikit-learn adapters: chart points in, geometric features or verdicts out.

Both estimators are unsupervised in substance; ``fit`` only resolves and
validates the immersion so that they compose with pipelines and
``clone``/``get_params``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .biharmonic import HARMONIC, INCONCLUSIVE, NEITHER, PROPER, biharmonic_residuals, classify_point
from .extrinsic import extrinsic_data, normal_connection
from .validation import check_chart_points, check_immersion, check_step

__all__ = ["ExtrinsicFeatures", "BiharmonicClassifier"]

FEATURES = ("H_norm", "T_norm", "sigma_norm_sq", "A_H_norm_sq", "pseudo_umbilical_defect", "pmc_defect")


class ExtrinsicFeatures(TransformerMixin, BaseEstimator):
    """Pointwise extrinsic scalars of an immersion.

    Parameters
    ----------
    source : ImmersionSpec, CatalogEntry or str
        The immersion, or a catalog id such as ``"cyl:c=1:kappa=1"``.
    features : tuple of str
        Columns to emit, a subset of ``FEATURES``.
    h : float
        Step for the one derivative feature, ``pmc_defect``.
    """

    def __init__(self, source=None, features=FEATURES, h=1e-3):
        self.source = source
        self.features = features
        self.h = h

    def fit(self, X=None, y=None):
        self.immersion_ = check_immersion(self.source)
        unknown = [f for f in self.features if f not in FEATURES]
        if unknown:
            raise ValueError(f"unknown features {unknown}")
        self.h_ = check_step(self.h)
        if X is not None:
            check_chart_points(X, self.immersion_)
        self.n_features_in_ = self.immersion_.m
        return self

    def transform(self, X):
        check_is_fitted(self, "immersion_")
        X = check_chart_points(X, self.immersion_)
        ext = extrinsic_data(self.immersion_, X)
        cols = []
        for f in self.features:
            if f == "pmc_defect":
                nH = normal_connection(self.immersion_, X, "H", self.h_, True, ext)
                cols.append(np.sqrt(np.sum(nH**2, axis=(-2, -1))))
            elif f == "pseudo_umbilical_defect":
                cols.append(ext.pseudo_umbilical_defect())
            else:
                cols.append(getattr(ext, f))
        return np.stack(cols, axis=1)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.features, dtype=object)


class BiharmonicClassifier(ClassifierMixin, BaseEstimator):
    """Per-point verdict: harmonic, proper_biharmonic, neither or inconclusive.

    ``route`` is ``"auto"`` (algebraic conditions where H is parallel,
    refined bitension elsewhere), ``"pmc"`` or ``"tau2"``.
    """

    def __init__(self, source=None, h=1e-3, tol=1e-8, fd_tol=5e-3, route="auto"):
        self.source = source
        self.h = h
        self.tol = tol
        self.fd_tol = fd_tol
        self.route = route

    def fit(self, X=None, y=None):
        self.immersion_ = check_immersion(self.source)
        self.h_ = check_step(self.h)
        if self.route not in ("auto", "pmc", "tau2"):
            raise ValueError(f"unknown route {self.route!r}")
        if X is not None:
            check_chart_points(X, self.immersion_)
        self.classes_ = np.array(sorted([HARMONIC, INCONCLUSIVE, NEITHER, PROPER]))
        self.n_features_in_ = self.immersion_.m
        return self

    def _classify(self, X):
        check_is_fitted(self, "immersion_")
        X = check_chart_points(X, self.immersion_)
        res = biharmonic_residuals(self.immersion_, X, self.h_, with_bitension=self.route != "pmc")
        return classify_point(res, self.tol, self.fd_tol, self.route)

    def predict(self, X):
        return self._classify(X).verdict

    def decision_function(self, X):
        """The residual the verdict was based on (smaller means more biharmonic)."""
        return self._classify(X).residual
