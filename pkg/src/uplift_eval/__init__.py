"""Variance-reduced evaluation of uplift (CATE) models on randomized-trial data."""

from .data import ColumnSpec, RctDataset, ScoredTestSet, Split, load_csv, split, write_csv
from .errors import CrossFittingError, DataValidationError, DegenerateSegmentError, SchemaError, UpliftEvalError
from .learners import BaggedTrees, KnnRegressor, LinearRegressor, MeanRegressor, TLearner, fit_t_learner, make_regressor
from .metrics import (DecisionPolicy, MseReport, QiniCurve, ate_hat_s, auuc, decision_value, delta_mse_w, gain_hat,
                      mse_mu, mse_pi, mse_tau, mse_w, qini_ci, qini_curve, qini_values, uplift_per_decile)
from .sim import SimWorld, batch_runs, calibrate, generate
from .transform import AdjustmentFn, adjust_outcomes, fit_adjustment, ht_transform, nuisance_truth

__version__ = "0.1.0"
