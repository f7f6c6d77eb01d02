"""scikit-learn style front end over :mod:`liftembed.trainer`.

The training data are generated from the registered problem, so ``fit``
ignores its arguments; ``predict`` maps space-time rows ``(x_1, ..., x_d, t)``
to the projected solution.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import UsageError
from .problems import check_in_domain, get_problem
from .trainer import TrainConfig, project_batch, relative_l2, train


class LiftEmbedRegressor(RegressorMixin, BaseEstimator):
    """Lifted surrogate for one registered conservation law.

    Parameters left as None take the problem's defaults.
    """

    def __init__(self, problem="burgers_shock", epochs=None, depth=None, width=None, beta_s=None,
                 beta_b=None, beta_i=None, w_int=None, n_intrr=None, n_shock=None, n_bndry=None,
                 n_initl=None, lr=0.01, fraction=1.0, s_init=None, seed=0, strict_determinism=False,
                 test_nx=None, test_nt=None):
        self.problem = problem
        self.epochs = epochs
        self.depth = depth
        self.width = width
        self.beta_s = beta_s
        self.beta_b = beta_b
        self.beta_i = beta_i
        self.w_int = w_int
        self.n_intrr = n_intrr
        self.n_shock = n_shock
        self.n_bndry = n_bndry
        self.n_initl = n_initl
        self.lr = lr
        self.fraction = fraction
        self.s_init = s_init
        self.seed = seed
        self.strict_determinism = strict_determinism
        self.test_nx = test_nx
        self.test_nt = test_nt

    def _config(self):
        params = self.get_params()
        name = params.pop("problem")
        return TrainConfig.for_problem(name, **params)

    def fit(self, X=None, y=None):
        """Train on collocation data drawn from the problem; ``X`` and ``y`` are unused."""
        result = train(self._config())
        self.result_ = result
        self.network_ = result.network
        self.geometry_ = result.geometry
        self.best_loss_ = result.best_loss
        self.relative_l2_ = result.relative_l2
        self.s_hat_ = result.speeds
        self.n_features_in_ = get_problem(self.problem).spatial_dim + 1
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise UsageError(f"expected {self.n_features_in_} columns (x..., t), got {X.shape[1]}")
        prob = get_problem(self.problem)
        check_in_domain(prob, X[:, :-1], X[:, -1])
        return project_batch(self.network_, self.geometry_, X[:, :-1], X[:, -1])

    def relative_error(self, nx=None, nt=None):
        """Relative L2 error of the fitted model on the uniform test grid."""
        check_is_fitted(self, "network_")
        return relative_l2(self.network_, self.geometry_, self.problem, nx, nt)
