"""Spike-and-slab variational Bayes for sparse linear regression.

Two solvers share one model: a component-wise coordinate-ascent scheme
and a batch scheme that updates all coefficients through a single
linear solve, with truncation, coordinate freezing, and an optional
Woodbury-accelerated inverse for large feature counts. Companion
modules supply the variational objective, post-fit inference and
prediction, cross-validated slab-scale tuning, simulation benchmarks,
and large-sample consistency checks.
"""

from .batch import (BatchConfig, WoodburyCache, compute_a_n, fit_batch,
                    init_woodbury_cache, resolve_a_n, update_mu_batch,
                    update_mu_woodbury, update_phi_batch,
                    update_sigma2_batch, update_sigma_j_batch)
from .cavi import (ComponentwiseConfig, InitPolicy, fit_componentwise,
                   inclusion_logit, update_coordinate, update_sigma2_map,
                   update_theta)
from .elbo import ElboValue, bernoulli_entropy, compute_elbo
from .exceptions import (AllZeroSpectrumError, ConstantColumnError,
                         DegeneratePriorError, DimensionMismatchError,
                         MismatchBeyondToleranceError, NonFiniteError,
                         RankDeficientRefitWarning, SingularSystemError,
                         SsvbError, TooFewSamplesError, ZeroOlsError)
from .inference import (FitResult, ModelIndex, fit_result_to_dict,
                        fit_result_to_json, max_entropy_change,
                        model_probability, predict_sparse,
                        predict_two_stage, selected_set, sparse_beta)
from .model import (Hyperparameters, RawDataset, StandardizedDataset,
                    VariationalState, load_csv, standardize)
from .tuning import CvConfig, CvRow, cv_select_v1, cv_table_to_csv, \
    default_v1_grid, kfold_splits
from .simgen import (MetricsReport, SimScenario, ar1_covariance,
                     gen_example1, gen_example2, gen_example3,
                     gen_noise_augmented, model_error, mrme,
                     selection_counts)
from .consistency import (OrthogonalProbe, bayesian_consistency_experiment,
                          closed_form_one_step_logits, gap_experiment,
                          make_orthogonal_design, one_step_logits,
                          probe_dataset, truth_lower_bound)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
