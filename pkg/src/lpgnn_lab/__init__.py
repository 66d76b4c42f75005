"""Attacks and defenses for GNNs trained on locally privatized node data."""

from .attacks import (
    LabelFlipConfig,
    NodeInjectionConfig,
    PoisonConfig,
    apply_poison,
    compute_poison,
    cosine_similarity,
    flip_labels,
    infer_features_mean,
    inject_nodes,
    mean_feature_difference,
    poison_inference,
)
from .gnn import ModelConfig, TrainConfig, TrainedModel, evaluate, grad_check, kprop, train
from .graph import Dataset, Graph, SyntheticConfig, generate_synthetic, load_dataset, save_dataset
from .harness import ExperimentConfig, run_experiment, run_sweep
from .kernels import BACKEND as KERNEL_BACKEND
from .ldp import (
    MbmParams,
    RrParams,
    bernoulli_param,
    empirical_ldp_ratio,
    multibit_encode,
    multibit_rectify,
    randomized_response,
    validate_feature_domain,
)

__version__ = "0.1.0"
