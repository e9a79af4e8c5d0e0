"""DCE-MRI motion correction: groupwise PCA and pairwise MI B-spline registration."""

from ._core import (
    ConfigError,
    Geometry,
    Mask,
    Method,
    MetricUndefined,
    Phantom,
    PhantomTruth,
    RegistrationAborted,
    RegistrationConfig,
    Series,
    TransformStack,
    Volume,
    d_pca,
    dice,
    evaluate,
    generate_phantom,
    groupwise_dice,
    read_mask,
    read_volume,
    register_series,
    resample_series,
    residual_alignment_error,
    run_cli,
    subtract_baseline,
    temporal_smoothness_sd,
    write_mask,
    write_volume,
)

__version__ = "0.1.0"
