"""Drift-vs-selection detection for two-variant frequency time series.

The package covers the full pipeline: Wright-Fisher null-model simulation,
multi-source corpus ingestion with cross-corpus scaling, equal-count
binning, the frequency increment test with post-hoc power analysis, and a
simulation-trained neural time-series classifier.
"""

from .binning import (
    BinnedSeries,
    bin_equal_count,
    read_binned_series,
    series_from_trajectory,
    write_binned_series,
)
from .classifier import (
    Classification,
    NeuralTscClassifier,
    TrainingConfig,
    TrainingSet,
    TscLabel,
    classify,
    generate_dataset,
    resample_to_length,
    train_classifier,
)
from .corpus import (
    CountRecord,
    RelFreqRecord,
    ScalingEstimate,
    Source,
    Variant,
    estimate_scaling_constant,
    load_counts,
    load_lemma_list,
    load_rel_freqs,
    merge_sources,
    scale_to_counts,
    select_target_verbs,
    write_counts,
)
from .errors import (
    ConfigError,
    DegenerateSeriesError,
    DriftselError,
    ParameterError,
    RecordFormatError,
    ScalingError,
    SeriesTooSmallError,
    TrainingError,
)
from .increment_test import (
    FitReport,
    Verdict,
    fit_test,
    noncentral_t_power,
    post_hoc_power,
    rescaled_increments,
    write_fit_reports,
)
from .wright_fisher import (
    FixationEstimate,
    Trajectory,
    WfParams,
    estimate_fixation_prob,
    simulate,
    simulate_batch,
    substream,
    wf_step,
    write_trajectory,
)

__version__ = "0.1.0"
