"""Low-rank Hankel matrix denoising: structured approximation, singular value
shrinkage and the iterative shrink-and-project denoiser."""
from .exceptions import (
    DegenerateInputError,
    HankelDenoiseError,
    InvalidDimensionError,
    InvalidRankError,
    PoleProximityError,
    SingularInputError,
)
from .hankel_core import (
    HankelShape,
    Transform,
    TransformKind,
    build_hankel,
    build_mosaic,
    build_transform,
    check_rank,
    hankel_project,
    hankel_signal,
)
from .shrinkage import (
    ShrinkagePolicy,
    SpectralMeasure,
    apply_shrinkage,
    data_driven_shrinker,
    dtransform,
    estimate_noise_level,
    hard_threshold_value,
    mp_median,
    optimal_shrinker,
    soft_threshold_value,
    tsvd_estimate,
)
from .slra import IterationConfig, IterationTrace, lrhd, nuclear_norm_denoise, slra_iterative

__version__ = "0.1.0"
