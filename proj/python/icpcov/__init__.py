"""Python bindings for the icpcov C++ library."""

from ._icpcov import (
    IcpcovError,
    Model,
    __version__,
    adjoint,
    cli,
    estimate_normals,
    exp_se3,
    extract_features,
    huber,
    icp,
    kl_divergence,
    log_se3,
    mc_covariance,
    metric_ape,
    metric_kl,
    metric_rpe,
    run_filter,
    sampling_weights,
    synth_scene,
    voxel_downsample,
)

__all__ = [
    "IcpcovError",
    "Model",
    "__version__",
    "adjoint",
    "cli",
    "estimate_normals",
    "exp_se3",
    "extract_features",
    "huber",
    "icp",
    "kl_divergence",
    "log_se3",
    "mc_covariance",
    "metric_ape",
    "metric_kl",
    "metric_rpe",
    "run_filter",
    "sampling_weights",
    "synth_scene",
    "voxel_downsample",
]
