"""The main restoration network assembled around hypernetwork kernels.

Pipeline: stride-2 head conv + relu -> residual blocks (conv-relu-conv with
identity skips, kernels generated per conditioning scalar) -> global skip
adding the post-head features -> expansion conv -> pixelshuffle x2 -> output
conv. The head and tail are ordinary trainable weights shared by every
generated network; only the residual-block kernels come from the
hypernetwork, and those carry no biases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import degrade as _degrade
from .hypernet import HyperNetwork, build_hypernet, count_parameters, generate_network_weights
from .tensor import ContractViolation, Tensor, clip01, conv2d, no_grad, pixelshuffle, relu, uniform_init


@dataclass
class ArchConfig:
    """Shape of the restoration network."""

    channels: int = 64
    num_resblocks: int = 16
    kernel_size: int = 3
    upscale_internal: int = 2  # matches the stride-2 head

    def __post_init__(self):
        if self.num_resblocks < 1:
            raise ContractViolation(f"num_resblocks must be >= 1, got {self.num_resblocks}")
        if self.channels < 1:
            raise ContractViolation(f"channels must be >= 1, got {self.channels}")

    @property
    def num_generated_kernels(self) -> int:
        return 2 * self.num_resblocks


# desk-scale default used by the toy experiments; full size is ArchConfig()
DESK_ARCH = dict(channels=8, num_resblocks=4)


@dataclass
class SharedWeights:
    """Head/tail parameters common to every generated network.

    The same object is referenced by all severities during training; there
    are no per-severity copies.
    """

    head_kernel: Tensor        # (C, 3, K, K), stride 2
    head_bias: Tensor          # (C,)
    tail_expand_kernel: Tensor  # (4C, C, K, K), feeds pixelshuffle r=2
    tail_expand_bias: Tensor   # (4C,)
    tail_out_kernel: Tensor    # (3, C, K, K)
    tail_out_bias: Tensor      # (3,)

    def parameters(self) -> List[Tensor]:
        return [self.head_kernel, self.head_bias,
                self.tail_expand_kernel, self.tail_expand_bias,
                self.tail_out_kernel, self.tail_out_bias]


def build_shared(cfg: ArchConfig, rng: np.random.Generator, dtype=np.float32) -> SharedWeights:
    c, k = cfg.channels, cfg.kernel_size

    def conv_init(cout, cin):
        fan_in = cin * k * k
        kernel = Tensor(uniform_init(rng, (cout, cin, k, k), fan_in, dtype=dtype),
                        requires_grad=True, dtype=dtype)
        bias = Tensor(uniform_init(rng, (cout,), fan_in, dtype=dtype),
                      requires_grad=True, dtype=dtype)
        return kernel, bias

    head_k, head_b = conv_init(c, 3)
    exp_k, exp_b = conv_init(4 * c, c)
    out_k, out_b = conv_init(3, c)
    return SharedWeights(head_kernel=head_k, head_bias=head_b,
                         tail_expand_kernel=exp_k, tail_expand_bias=exp_b,
                         tail_out_kernel=out_k, tail_out_bias=out_b)


def forward(image: Tensor, generated_kernels: List[Tensor],
            shared: SharedWeights, cfg: ArchConfig) -> Tensor:
    """Run one generated network on a (3, H, W) or (N, 3, H, W) image.

    H and W must be even; output shape equals input shape. The output is NOT
    clamped here so losses see the raw values; clamp to [0, 1] only at the
    final image boundary (see :func:`restore_image`).
    """
    if len(generated_kernels) != cfg.num_generated_kernels:
        raise ContractViolation(
            f"expected {cfg.num_generated_kernels} generated kernels "
            f"(2 per residual block), got {len(generated_kernels)}")
    h, w = image.data.shape[-2:]
    if h % 2 or w % 2:
        raise ContractViolation(f"image height/width must be even, got {h}x{w}")
    pad = cfg.kernel_size // 2

    # the head stays linear: an activation here throttles the stride-2
    # bottleneck and measurably hurts low-severity restoration
    f0 = conv2d(image, shared.head_kernel, shared.head_bias,
                stride=2, padding=pad)
    feat = f0
    for i in range(cfg.num_resblocks):
        k1 = generated_kernels[2 * i]
        k2 = generated_kernels[2 * i + 1]
        t = relu(conv2d(feat, k1, padding=pad))
        t = conv2d(t, k2, padding=pad)
        feat = feat + t
    feat = feat + f0  # global skip over the residual blocks
    up = conv2d(feat, shared.tail_expand_kernel, shared.tail_expand_bias, padding=pad)
    up = pixelshuffle(up, cfg.upscale_internal)
    return conv2d(up, shared.tail_out_kernel, shared.tail_out_bias, padding=pad)


def count_total_parameters(shared: SharedWeights, hnet: HyperNetwork) -> Tuple[int, Dict[str, int]]:
    """Deployed parameter count with a head / resblock-meta / tail breakdown."""
    head = shared.head_kernel.size + shared.head_bias.size
    tail_expand = shared.tail_expand_kernel.size + shared.tail_expand_bias.size
    tail_out = shared.tail_out_kernel.size + shared.tail_out_bias.size
    meta = count_parameters(hnet)
    breakdown = {
        "head": head,
        "resblock_meta": meta,
        "tail_expand": tail_expand,
        "tail_out": tail_out,
    }
    return head + meta + tail_expand + tail_out, breakdown


def parameter_breakdown(cfg: ArchConfig) -> Tuple[int, Dict[str, int]]:
    """Arithmetic parameter counts straight from the architecture config."""
    k2 = cfg.kernel_size ** 2
    c = cfg.channels
    breakdown = {
        "head": 3 * c * k2 + c,
        "resblock_meta": 2 * cfg.num_generated_kernels * c * c * k2,
        "tail_expand": c * 4 * c * k2 + 4 * c,
        "tail_out": c * 3 * k2 + 3,
    }
    return sum(breakdown.values()), breakdown


@dataclass
class HyperRestoreModel:
    """All learnable state plus the config needed to rebuild it."""

    cfg: ArchConfig
    hypernet: HyperNetwork
    shared: SharedWeights
    task: str = "noise"
    level_range: Tuple[float, float] = (0.0, 1.0)

    def parameters(self) -> List[Tensor]:
        return self.hypernet.parameters() + self.shared.parameters()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def normalize_level(self, level: float) -> float:
        lo, hi = self.level_range
        spec = _degrade.DegradationSpec(task=self.task, level=level, level_range=(lo, hi))
        return _degrade.normalize_level(spec).c


def build_model(cfg: ArchConfig, task: str = "noise",
                level_range: Tuple[float, float] = (0.0, 1.0),
                seed: int = 0, dtype=np.float32) -> HyperRestoreModel:
    """Deterministically initialize a model from a seed."""
    rng = np.random.default_rng(seed)
    hnet = build_hypernet(cfg.num_generated_kernels, cfg.channels,
                          cfg.kernel_size, rng, dtype=dtype)
    shared = build_shared(cfg, rng, dtype=dtype)
    return HyperRestoreModel(cfg=cfg, hypernet=hnet, shared=shared,
                             task=task, level_range=level_range)


def restore_image(model: HyperRestoreModel, image: np.ndarray,
                  level: Optional[float] = None,
                  c: Optional[float] = None) -> np.ndarray:
    """Restore a [0,1] image array at a raw level (or directly at scalar c).

    Generates the single network for the conditioning scalar, runs it with
    the tape off, and clamps the result to [0, 1].
    """
    if c is None:
        if level is None:
            raise ContractViolation("restore_image needs a level or a conditioning scalar")
        c = model.normalize_level(level)
    with no_grad():
        kernels = generate_network_weights(model.hypernet, c)
        out = forward(Tensor(image), kernels, model.shared, model.cfg)
    return clip01(out.data)
