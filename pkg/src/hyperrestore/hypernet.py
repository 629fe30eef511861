"""Affine hypernetwork: one conditioning scalar generates a full kernel set.

Each meta block stores a slope/offset pair (w, b) of the same size as the
convolution kernel it targets. For conditioning scalar c, the generated
kernel is ``k = c * w + b``, so the set of generated networks is an affine
family in c: distinct scalars yield genuinely different kernels (not scalar
multiples of each other) whenever b is nonzero, and the whole family costs
exactly twice the kernel parameters of one generated network, no matter how
many severities it serves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .tensor import ContractViolation, Tensor, reshape, uniform_init


@dataclass
class MetaBlock:
    """Slope/offset pair generating one convolution kernel.

    ``w`` and ``b`` are flat trainable tensors of length Cout*Cin*K*K;
    ``target_slot`` is the index of the kernel this block generates in the
    main network's residual blocks.
    """

    w: Tensor
    b: Tensor
    target_slot: int
    kernel_shape: Tuple[int, int, int, int]

    def __post_init__(self):
        expected = int(np.prod(self.kernel_shape))
        if self.w.size != expected or self.b.size != expected:
            raise ContractViolation(
                f"meta block {self.target_slot}: w/b length "
                f"({self.w.size}/{self.b.size}) does not match kernel shape "
                f"{self.kernel_shape} ({expected} values)")


@dataclass
class HyperNetwork:
    """Ordered collection of meta blocks, one per generated kernel."""

    meta_blocks: List[MetaBlock] = field(default_factory=list)

    def __post_init__(self):
        slots = [blk.target_slot for blk in self.meta_blocks]
        if len(set(slots)) != len(slots):
            raise ContractViolation(f"duplicate meta block target slots: {slots}")
        self.meta_blocks = sorted(self.meta_blocks, key=lambda blk: blk.target_slot)

    @property
    def num_kernels(self) -> int:
        return len(self.meta_blocks)

    def parameters(self) -> List[Tensor]:
        params = []
        for blk in self.meta_blocks:
            params.append(blk.w)
            params.append(blk.b)
        return params


def generate_kernel(block: MetaBlock, c: float) -> Tensor:
    """Generate one kernel: c * w + b, reshaped to the target kernel shape.

    Differentiable in w and b (dk/dw = c, dk/db = 1), so training losses
    flow straight back into the meta block.
    """
    if not math.isfinite(c):
        raise ContractViolation(f"conditioning scalar must be finite, got {c!r}")
    flat = block.w * float(c) + block.b
    return reshape(flat, block.kernel_shape)


def generate_network_weights(hnet: HyperNetwork, c: float) -> List[Tensor]:
    """Generate every kernel of one main network, in target-slot order."""
    return [generate_kernel(blk, c) for blk in hnet.meta_blocks]


def count_parameters(hnet: HyperNetwork) -> int:
    """Total stored parameters: 2x the kernel count of one generated network.

    Constant in the number of severities served; a bank of k dedicated
    networks would instead grow its residual-block kernel count k-fold.
    """
    return sum(2 * int(np.prod(blk.kernel_shape)) for blk in hnet.meta_blocks)


def build_hypernet(num_kernels: int, channels: int, kernel_size: int,
                   rng: np.random.Generator, dtype=np.float32) -> HyperNetwork:
    """Initialize meta blocks for ``num_kernels`` C->C square kernels.

    Offsets b follow a standard fan-in uniform scheme; slopes w use the same
    scheme scaled by 0.1, so at conditioning scalars inside [0, 1] the
    generated kernels start near a conventional initialization with a small
    level-dependent perturbation.
    """
    fan_in = channels * kernel_size * kernel_size
    shape = (channels, channels, kernel_size, kernel_size)
    n = int(np.prod(shape))
    blocks = []
    for slot in range(num_kernels):
        w = Tensor(uniform_init(rng, (n,), fan_in, scale=0.1, dtype=dtype),
                   requires_grad=True, dtype=dtype)
        b = Tensor(uniform_init(rng, (n,), fan_in, dtype=dtype),
                   requires_grad=True, dtype=dtype)
        blocks.append(MetaBlock(w=w, b=b, target_slot=slot, kernel_shape=shape))
    return HyperNetwork(meta_blocks=blocks)
