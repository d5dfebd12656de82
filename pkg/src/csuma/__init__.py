"""Compressed-sensing phase of an unsourced multiple-access system.

Message prefixes are one-hot encoded, mapped through a subsampled DCT
sensing matrix and summed over a Gaussian multiple-access channel; greedy
decoders (OMP, gOMP, CoSaMP, SP) recover the set of transmitted prefixes.
"""
from .model import (
    ConfigError,
    DimensionError,
    InfeasibleError,
    ParameterError,
    SensingMatrix,
    SupportSet,
    SystemConfig,
    add_noise,
    build_sensing_matrix,
    encode_message,
    sample_supports,
    transmit,
)
from .recovery import (
    ALGORITHMS,
    RecoveryOutput,
    RecoveryParams,
    correlate_select,
    cosamp,
    gomp,
    least_squares,
    omp,
    recover,
    recover_thresholded,
    sp,
)
from .metrics import detection_rate, false_alarm_rate, roc_sweep, wilson_interval

__version__ = "0.1.0"
