"""scikit-learn style facade: fit a mean-field model to a network, predict the endemic level."""

import numpy as np
from sklearn.base import BaseEstimator

from .config import ValidationError
from .derivation import sis_rates
from .network_models import NetworkSpec, SubgraphCensus, census_for_spec
from .odesys import leading_eigenvalue_trivial, locate_threshold, steady_states
from .pipeline import mean_field_model


class MeanFieldModel(BaseEstimator):
    """SIS moment-closure model of a given order.

    ``fit`` takes a network (spec string, NetworkSpec or per-node SubgraphCensus)
    and builds the closed system; ``predict`` maps beta/gamma values to the
    stable endemic infected fraction (0 where only the trivial state is stable).

    Attributes set by fit: ``system_``, ``census_``, ``threshold_``,
    ``n_equations_``.
    """

    def __init__(self, order=2, route="auto", targets=None, gamma=1.0, degree_homogeneous=None, seed=0):
        self.order = order
        self.route = route
        self.targets = targets
        self.gamma = gamma
        self.degree_homogeneous = degree_homogeneous
        self.seed = seed

    def fit(self, X, y=None):
        homogeneous = self.degree_homogeneous
        if isinstance(X, SubgraphCensus):
            census = X
            homogeneous = True if homogeneous is None else homogeneous
        else:
            spec = X if isinstance(X, NetworkSpec) else NetworkSpec.parse(str(X))
            census = census_for_spec(spec, self.order + 1, self.seed)
            if homogeneous is None:
                homogeneous = spec.kind in ("lattice", "random_regular", "complete")
        self.census_ = census
        self.system_ = mean_field_model(self.order, sis_rates(), census, homogeneous, self.route, self.targets)
        self.n_equations_ = len(self.system_.variables)
        self._infected = next(i for i, m in enumerate(self.system_.variables) if m.order == 1 and m.labels == (1,))
        self.threshold_ = self._threshold()
        return self

    def _params(self, ratio):
        return {"beta": float(ratio) * self.gamma, "gamma": float(self.gamma)}

    def _threshold(self):
        grid = np.geomspace(1e-3, 1e2, 61)
        signs = [leading_eigenvalue_trivial(self.system_, self._params(r)) > 0 for r in grid]
        for i in range(1, len(grid)):
            if signs[i] != signs[i - 1]:
                return locate_threshold(self.system_, {"gamma": self.gamma}, grid[i - 1], grid[i])
        return float("nan")

    def steady_state(self, beta_over_gamma):
        """Stable admissible fixed point with the largest infected fraction."""
        if not hasattr(self, "system_"):
            raise ValidationError("call fit before predict")
        pts = [f for f in steady_states(self.system_, self._params(beta_over_gamma)) if f.admissible and f.stable]
        if not pts:
            return None
        return max(pts, key=lambda f: f.state[self._infected])

    def predict(self, X):
        ratios = np.asarray(X, float).ravel()
        out = np.zeros(len(ratios))
        for t, r in enumerate(ratios):
            fp = self.steady_state(r)
            out[t] = 0.0 if fp is None else max(fp.state[self._infected], 0.0)
        return out
