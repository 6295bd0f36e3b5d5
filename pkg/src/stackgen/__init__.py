"""stackgen: stacked generalization for regression and binary classification.

Base learners are cross-fitted over K folds; their out-of-fold predictions
are combined by a final estimator (by default least squares constrained to
the probability simplex). The package also works as a plain machine-learning
toolkit: every base learner can be fit and used on its own.
"""

from .data import (CLASSIFY, REGRESS, Dataset, FoldAssignment, HoldoutMask,
                   assign_folds, folds_from_column, load_csv, split_holdout)
from .errors import (ConvergenceWarning, DataError, FitError, ModelFileError,
                     PipelineError, SpecError, StackgenError)
from .learners import (FittedLearner, LearnerSpec, default_options, fit,
                       predict)
from .optim import (FinalFit, solve_ls1, solve_nnls0, solve_nnls1,
                    solve_ols_final, solve_ridge_final, solve_singlebest)
from .pipeline import (FittedPipeline, PipelineSpec, fit_transform,
                       knn_impute, parse_pipeline, transform)
from .report import (EvalReport, confusion_table, default_holdout, emit_plots,
                     rmspe_table, roc_curve, weights_table)
from .stacking import (StackModel, StackSpec, cross_fit, fit_stack,
                       load_model, predict_base, predict_stack, save_model)

__version__ = "0.1.0"
