"""Open-set recognition trained against reweighted generated samples.

The package trains a C+1-way classifier from known-class data alone:
uniform auxiliary samples are drawn around the encoded training
features, weighted by how much they look like known data (kernel
least-squares density-ratio fit or isolation forest), and the open-set
head is penalized for not rejecting the low-weight ones.
"""

from .dataio import (
    Box,
    Dataset,
    bounding_box,
    gen_double_moon,
    gen_gaussian_blob,
    gen_unknown_uniform,
    load_dataset,
    save_dataset,
)
from .errors import (
    Divergence,
    InfeasibleRegion,
    InvalidArgument,
    NumericalFailure,
    ParseError,
    UndefinedNormalizer,
)
from .evalmetrics import ConfusionMatrix, accuracy, confusion, macro_f1, sweep_error_curve
from .net import MlpModel, TrainConfig, encode, forward, mlp_init, predict, train
from .pipeline import (
    AosrConfig,
    AosrModel,
    aosr_predict,
    load_aosr_model,
    run_aosr,
    save_aosr_model,
)
from .ratio import (
    IforestModel,
    KulsifModel,
    gaussian_gram,
    iforest_anomaly_score,
    iforest_fit,
    kulsif_fit,
    kulsif_objective,
    median_bandwidth,
    ratio_predict,
    weights_from_iforest,
)
from .reweight import (
    IadParams,
    WeightParams,
    estimate_u_zero_mass,
    gamma,
    gamma_prime,
    l0_transform,
    l_minus_transform,
    l_transform,
    mu_schedule,
    select_tau,
)
from .risk import (
    RiskReport,
    auxiliary_risk,
    compute_risk_report,
    delta,
    empirical_risk_s,
    empirical_risk_s_unknown,
    empirical_risk_t_unknown,
    proxy_auxiliary_risk,
    proxy_unknown_risk,
    training_objective,
)
from .rng import Rng
from .theorylab import (
    HypothesisPool,
    RateExperimentConfig,
    SyntheticTask,
    alpha_risk_empirical,
    combined_risk_empirical,
    disparity_discrepancy_empirical,
    iad_weight,
    mc_iad_risk,
    mc_iad_weight_mass,
    rate_gap_experiment,
    uniform_gap_task,
)

__version__ = "0.1.0"
