"""Error exponents and finite-length simulation for random Gilbert-Varshamov codes."""

from ._validation import (
    ConstructionInfeasibleError,
    InstanceTooLargeError,
    InvalidParameterError,
)
from .channel import Channel, DecodingMetric, make_bsc, make_z_channel, metric_value
from .distance import DistanceSpec
from .exponents import (
    ExponentProblem,
    ExponentValue,
    KeycondResult,
    alpha,
    check_keycond,
    e0_min,
    expurgated,
    expurgated_rgv,
    gamma,
    random_coding,
    trc_cc,
    trc_rgv,
)
from .measures import (
    JointType,
    cond_kl,
    cond_mutual_information,
    entropy,
    enumerate_joint_types,
    kl_divergence,
    log_type_class_size,
    mutual_information,
    type_class_exponent,
)
from .rgv import (
    MCEstimate,
    RgvCodebook,
    RgvParams,
    exact_error_prob,
    generate_codebook,
    lemma_checks,
    mc_error_prob,
    type_enumerator,
)
from .tails import (
    TailProblem,
    TailValue,
    beta_fn,
    e_tilde,
    lambda_fn,
    lower_tail_lower,
    lower_tail_upper,
    tail_condition_report,
    upper_tail_lower,
    upper_tail_upper,
)

__version__ = "0.1.0"
