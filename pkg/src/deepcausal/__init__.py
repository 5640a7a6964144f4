"""Neural structural causal models on numpy.

A causal graph binds one unit per node (fixed-distribution heads or
conditional normalizing flows) and provides sampling, exact or
Monte-Carlo log-likelihood with latent confounders, interventions,
abduct-intervene-predict counterfactuals, and counterfactual-fairness
auditing and training for downstream predictors.
"""

from deepcausal.autodiff import ParamStore, Tape
from deepcausal.data import (DataError, Dataset, GraphSpec, NodeSpec,
                             SalaryGenConfig, complete_graph_spec,
                             dataset_rows, gen_salary, load_csv,
                             salary_graph_spec)
from deepcausal.fairness import (FairnessError, FairnessReport,
                                 FunctionPredictor, MLPPredictor, audit,
                                 cu_k, explain_sample, load_predictor,
                                 save_predictor, train_fair,
                                 train_predictor)
from deepcausal.graph import (CausalGraph, CounterfactualSet, GraphError,
                              InferenceConfig, expectation_under)
from deepcausal.training import (TrainConfig, TrainError, cross_validate,
                                 evaluate_nll, fit, load_checkpoint,
                                 save_checkpoint, warm_start)
from deepcausal.units import UnitError

__version__ = "0.1.0"

__all__ = [
    "CausalGraph", "CounterfactualSet", "DataError", "Dataset",
    "FairnessError", "FairnessReport", "FunctionPredictor", "GraphError",
    "GraphSpec", "InferenceConfig", "MLPPredictor", "NodeSpec",
    "ParamStore", "SalaryGenConfig", "Tape", "TrainConfig", "TrainError",
    "UnitError", "audit", "complete_graph_spec", "cross_validate", "cu_k",
    "dataset_rows", "evaluate_nll", "expectation_under", "explain_sample",
    "fit", "gen_salary", "load_checkpoint", "load_csv", "load_predictor",
    "salary_graph_spec", "save_checkpoint", "save_predictor", "train_fair",
    "train_predictor", "warm_start",
]
