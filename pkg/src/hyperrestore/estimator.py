"""Blind degradation-level estimator: a small CNN regressing the raw level.

Five convolution layers (stride 2 from the third onward) followed by three
fully connected layers ending in one scalar. Inputs are fixed 64x64 crops;
the output is in raw task units (sigma for the noise task) and is converted
to the conditioning scalar by the caller. Trained with L1 on the raw level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .datasets import PatchSource
from .degrade import apply_degradation, stable_seed
from .tensor import (
    ContractViolation,
    Tensor,
    conv2d,
    l1_loss,
    matmul,
    no_grad,
    relu,
    reshape,
    uniform_init,
)

INPUT_SIZE = 64
_CONV_CHANNELS = (8, 8, 16, 16, 16)
_CONV_STRIDES = (1, 1, 2, 2, 2)
_FC_WIDTHS = (64, 32)


@dataclass
class EstimatorNet:
    """Trainable weights of the level regressor."""

    conv_kernels: List[Tensor]
    conv_biases: List[Tensor]
    fc_weights: List[Tensor]
    fc_biases: List[Tensor]

    def parameters(self) -> List[Tensor]:
        return (self.conv_kernels + self.conv_biases
                + self.fc_weights + self.fc_biases)

    def tensor_table(self) -> Dict[str, Tensor]:
        table: Dict[str, Tensor] = {}
        for i, (k, b) in enumerate(zip(self.conv_kernels, self.conv_biases)):
            table[f"conv{i}.kernel"] = k
            table[f"conv{i}.bias"] = b
        for i, (w, b) in enumerate(zip(self.fc_weights, self.fc_biases)):
            table[f"fc{i}.weight"] = w
            table[f"fc{i}.bias"] = b
        return table

    @staticmethod
    def from_tensor_table(table: Dict[str, Tensor]) -> "EstimatorNet":
        convs = sum(1 for name in table if name.startswith("conv") and name.endswith(".kernel"))
        fcs = sum(1 for name in table if name.startswith("fc") and name.endswith(".weight"))
        return EstimatorNet(
            conv_kernels=[table[f"conv{i}.kernel"] for i in range(convs)],
            conv_biases=[table[f"conv{i}.bias"] for i in range(convs)],
            fc_weights=[table[f"fc{i}.weight"] for i in range(fcs)],
            fc_biases=[table[f"fc{i}.bias"] for i in range(fcs)],
        )


def build_estimator(seed: int = 0, dtype=np.float32) -> EstimatorNet:
    rng = np.random.default_rng(seed)
    conv_kernels, conv_biases = [], []
    cin = 3
    for cout in _CONV_CHANNELS:
        fan_in = cin * 9
        conv_kernels.append(Tensor(uniform_init(rng, (cout, cin, 3, 3), fan_in, dtype=dtype),
                                   requires_grad=True, dtype=dtype))
        conv_biases.append(Tensor(uniform_init(rng, (cout,), fan_in, dtype=dtype),
                                  requires_grad=True, dtype=dtype))
        cin = cout
    spatial = INPUT_SIZE
    for stride in _CONV_STRIDES:
        spatial = (spatial + 2 - 3) // stride + 1
    flat = _CONV_CHANNELS[-1] * spatial * spatial

    fc_weights, fc_biases = [], []
    fan = flat
    for width in (*_FC_WIDTHS, 1):
        fc_weights.append(Tensor(uniform_init(rng, (fan, width), fan, dtype=dtype),
                                 requires_grad=True, dtype=dtype))
        fc_biases.append(Tensor(uniform_init(rng, (width,), fan, dtype=dtype),
                                requires_grad=True, dtype=dtype))
        fan = width
    return EstimatorNet(conv_kernels=conv_kernels, conv_biases=conv_biases,
                        fc_weights=fc_weights, fc_biases=fc_biases)


def _forward_batch(net: EstimatorNet, images: Tensor) -> Tensor:
    """(N, 3, 64, 64) -> (N, 1) raw level estimates."""
    x = images
    for kernel, bias, stride in zip(net.conv_kernels, net.conv_biases, _CONV_STRIDES):
        x = relu(conv2d(x, kernel, bias, stride=stride, padding=1))
    n = x.data.shape[0]
    x = reshape(x, (n, -1))
    last = len(net.fc_weights) - 1
    for i, (w, b) in enumerate(zip(net.fc_weights, net.fc_biases)):
        x = matmul(x, w) + b
        if i < last:
            x = relu(x)
    return x


def _center_crop(image: np.ndarray, size: int) -> np.ndarray:
    _, h, w = image.shape
    if h < size or w < size:
        raise ContractViolation(
            f"estimator needs at least {size}x{size} input, got {h}x{w}")
    top = (h - size) // 2
    left = (w - size) // 2
    return image[:, top:top + size, left:left + size]


def estimate_level(net: EstimatorNet, image: np.ndarray) -> float:
    """Estimate the raw degradation level from a center 64x64 crop."""
    crop = _center_crop(np.asarray(image, dtype=np.float32), INPUT_SIZE)
    with no_grad():
        out = _forward_batch(net, Tensor(crop[None]))
    return float(out.data[0, 0])


def estimator_accuracy(net: EstimatorNet,
                       eval_set: Sequence[Tuple[np.ndarray, float]],
                       level_range: Tuple[float, float]) -> float:
    """100 * (1 - mean(|estimate - true|) / (max - min)), in percent."""
    lo, hi = level_range
    if not lo < hi:
        raise ContractViolation(f"degenerate level range {level_range}")
    if not eval_set:
        raise ContractViolation("estimator_accuracy needs a non-empty eval set")
    errors = [abs(estimate_level(net, img) - true) for img, true in eval_set]
    return 100.0 * (1.0 - float(np.mean(errors)) / (hi - lo))


def train_estimator(levels: Sequence[float], source: PatchSource,
                    task: str = "noise", steps: int = 600, batch_size: int = 8,
                    learning_rate: float = 1e-3, seed: int = 0,
                    net: Optional[EstimatorNet] = None) -> EstimatorNet:
    """Fit the regressor on patches degraded at the given raw levels."""
    from .trainer import Adam, clip_global_norm  # local import avoids a cycle

    if source.patch_size != INPUT_SIZE:
        raise ContractViolation(
            f"estimator training needs {INPUT_SIZE}px patches, "
            f"got {source.patch_size}")
    net = net or build_estimator(seed=seed)
    optimizer = Adam(net.parameters(), lr=learning_rate)
    rng = np.random.default_rng(stable_seed("estimator", seed))
    levels = [float(x) for x in levels]

    for step in range(steps):
        patches = np.stack(source.sample(batch_size))
        chosen = [levels[int(rng.integers(len(levels)))] for _ in range(batch_size)]
        degraded = np.stack([
            apply_degradation(patch, task, level,
                              seed=stable_seed("est-noise", seed, step, i))
            for i, (patch, level) in enumerate(zip(patches, chosen))])
        targets = Tensor(np.asarray(chosen, dtype=np.float32)[:, None])
        preds = _forward_batch(net, Tensor(degraded))
        loss = l1_loss(preds, targets)
        optimizer.zero_grad()
        loss.backward()
        clip_global_norm(optimizer.params, 10.0)
        optimizer.lr = learning_rate * 0.5 ** (step // max(1, steps // 2))
        optimizer.step()
    return net
