"""Sketch-based frequency and distinct-count recovery with smoothed estimators."""

from .cardinality import (
    CardinalityEstimate,
    estimate_card_dp,
    estimate_card_nggp,
    good_turing,
)
from .datagen import GroundTruth, PrefixRetainer, gen_pyp, gen_zipf, replay
from .errors import (
    CounterOverflowError,
    DegenerateAggregateError,
    EnumerationSizeError,
    IncompatibleSketchError,
    NonIdentifiableError,
    NumericError,
    SkrecoverError,
)
from .fitting import (
    FitResult,
    PrefixSample,
    dp_loglik_sketch,
    fit_dp,
    fit_nggp_minwass,
    fit_nggp_prefix,
    nggp_loglik_prefix,
    nggp_urn_sample,
    wasserstein1_counts,
)
from .hashing import HashFunction, draw_hash, key_to_u64
from .intervals import (
    CalibrationSet,
    ConformalAdjuster,
    conformal_calibrate,
    conformal_interval,
    smoothed_interval,
)
from .multiview import (
    MultiViewEstimate,
    aggregate_min,
    aggregate_poe,
    dp_multihash_pmf,
    estimate_freq_multiview,
)
from .oracle import (
    DiscreteDist,
    card_worstcase_bound,
    enumerate_conditional,
    minimax_grid_check,
    pi_known_p,
    risk_freq_exact,
    sketch_pmf,
)
from .sketch import MultiSketch, Sketch, read_sketch, write_sketch
from .smoothing import (
    FreqDistribution,
    MonteCarloConfig,
    SmoothingParams,
    estimate_freq_cms,
    estimate_freq_dp,
    estimate_freq_nggp,
    pi_dp,
    pi_nggp,
    total_variation,
)
from .specfun import QuadratureConfig, digamma, exp_integral, log_gamma, sample_v_nggp

__version__ = "0.1.0"

__all__ = [
    "CalibrationSet",
    "CardinalityEstimate",
    "ConformalAdjuster",
    "CounterOverflowError",
    "DegenerateAggregateError",
    "DiscreteDist",
    "EnumerationSizeError",
    "FitResult",
    "FreqDistribution",
    "GroundTruth",
    "HashFunction",
    "IncompatibleSketchError",
    "MonteCarloConfig",
    "MultiSketch",
    "MultiViewEstimate",
    "NonIdentifiableError",
    "NumericError",
    "PrefixRetainer",
    "PrefixSample",
    "QuadratureConfig",
    "Sketch",
    "SkrecoverError",
    "SmoothingParams",
    "aggregate_min",
    "aggregate_poe",
    "card_worstcase_bound",
    "conformal_calibrate",
    "conformal_interval",
    "digamma",
    "dp_loglik_sketch",
    "dp_multihash_pmf",
    "draw_hash",
    "enumerate_conditional",
    "estimate_card_dp",
    "estimate_card_nggp",
    "estimate_freq_cms",
    "estimate_freq_dp",
    "estimate_freq_multiview",
    "estimate_freq_nggp",
    "exp_integral",
    "fit_dp",
    "fit_nggp_minwass",
    "fit_nggp_prefix",
    "gen_pyp",
    "gen_zipf",
    "good_turing",
    "key_to_u64",
    "log_gamma",
    "minimax_grid_check",
    "nggp_loglik_prefix",
    "nggp_urn_sample",
    "pi_dp",
    "pi_known_p",
    "pi_nggp",
    "read_sketch",
    "replay",
    "risk_freq_exact",
    "sample_v_nggp",
    "sketch_pmf",
    "smoothed_interval",
    "total_variation",
    "wasserstein1_counts",
    "write_sketch",
]
