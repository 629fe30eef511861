"""hyperrestore: adaptive image restoration driven by a scalar-conditioned hypernetwork.

A single compact model restores images across a continuous range of
degradation severities (Gaussian noise, JPEG artifacts, downscaling): an
affine hypernetwork maps one conditioning scalar to the convolution kernels
of a residual restoration network whose head and tail are shared across all
severities.
"""

__version__ = "0.1.0"

from .tensor import (
    ContractViolation,
    Tensor,
    clip01,
    conv2d,
    l1_loss,
    matmul,
    no_grad,
    pixel_unshuffle,
    pixelshuffle,
    relu,
    reshape,
    tmean,
    tsum,
)
from .hypernet import HyperNetwork, MetaBlock, generate_kernel, generate_network_weights
from .network import (
    ArchConfig,
    HyperRestoreModel,
    SharedWeights,
    build_model,
    count_total_parameters,
    forward,
    restore_image,
)
from .degrade import (
    DegradationSpec,
    add_gaussian_noise,
    jpeg_degrade,
    normalize_level,
    sr_degrade,
)
from .metrics import QualityReport, psnr, ssim

__all__ = [
    "ArchConfig",
    "ContractViolation",
    "DegradationSpec",
    "HyperNetwork",
    "HyperRestoreModel",
    "MetaBlock",
    "QualityReport",
    "SharedWeights",
    "Tensor",
    "add_gaussian_noise",
    "build_model",
    "clip01",
    "conv2d",
    "count_total_parameters",
    "forward",
    "generate_kernel",
    "generate_network_weights",
    "jpeg_degrade",
    "l1_loss",
    "matmul",
    "no_grad",
    "normalize_level",
    "pixel_unshuffle",
    "pixelshuffle",
    "psnr",
    "relu",
    "reshape",
    "restore_image",
    "sr_degrade",
    "ssim",
    "tmean",
    "tsum",
]
