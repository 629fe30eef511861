"""Joint training across degradation levels with an unweighted L1 sum.

Every step draws one batch of clean patches, degrades the same patches at
each of the k trained levels, generates the corresponding network per level
from the hypernetwork, and sums the per-level L1 losses with unit weights.
One Adam update is applied to the meta blocks and shared weights from the
summed loss's gradient, so no level is privileged and the shared head/tail
receive contributions from every level. Single-worker execution is the
determinism reference: a fixed seed reproduces the run bit for bit.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .datasets import PatchSource
from .degrade import DegradationSpec, apply_degradation, normalize_level, stable_seed
from .hypernet import generate_network_weights
from .network import ArchConfig, HyperRestoreModel, build_model, forward
from .metrics import psnr
from .tensor import ContractViolation, Tensor, clip01, l1_loss, no_grad

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Raised when a per-level loss stops being finite."""


@dataclass
class TrainConfig:
    """Hyperparameters of one joint training run.

    ``levels`` are raw task units; they are canonicalized to strictly
    increasing order, so permuting the input list changes nothing.
    """

    levels: Sequence[float]
    task: str = "noise"
    batch_size: int = 8
    patch_size: int = 32
    steps: int = 2000
    learning_rate: float = 1e-3
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    lr_halve_every: int = 800
    grad_clip_norm: float = 1.0
    seed: int = 0
    log_every: int = 100
    val_every: int = 500

    def __post_init__(self):
        levels = sorted(float(x) for x in self.levels)
        if len(levels) < 2:
            raise ContractViolation(f"need at least 2 levels, got {levels}")
        if len(set(levels)) != len(levels):
            raise ContractViolation(f"levels must be distinct, got {levels}")
        self.levels = levels

    @property
    def level_range(self) -> Tuple[float, float]:
        return (self.levels[0], self.levels[-1])

    def conditioning(self, level: float) -> float:
        spec = DegradationSpec(task=self.task, level=level,
                               level_range=self.level_range)
        return normalize_level(spec).c


class Adam:
    """Adam with bias correction; moments live alongside each parameter."""

    def __init__(self, params: List[Tensor], lr: float = 1e-3,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= (self.lr * (m / bc1) /
                       (np.sqrt(v / bc2) + self.eps)).astype(p.data.dtype)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def clip_global_norm(params: List[Tensor], max_norm: float) -> float:
    """Scale all grads so their joint L2 norm is at most ``max_norm``."""
    total = 0.0
    for p in params:
        total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in params:
            p.grad *= scale
    return norm


@dataclass
class TrainState:
    model: HyperRestoreModel
    optimizer: Adam
    config: TrainConfig
    step: int = 0
    loss_history: Dict[float, List[float]] = field(default_factory=dict)


def _degrade_batch(patches: np.ndarray, task: str, level: float,
                   seed: int) -> np.ndarray:
    out = np.empty_like(patches)
    for i, patch in enumerate(patches):
        out[i] = apply_degradation(patch, task, level, seed=seed + i)
    return out


def train_step(state: TrainState, patches: List[np.ndarray]) -> Dict[float, float]:
    """One joint update over all levels; returns the per-level losses.

    The same clean patches are degraded at every level; levels are processed
    in sorted order so the floating-point summation order is canonical.
    """
    cfg = state.config
    model = state.model
    clean = np.stack(patches)
    clean_t = Tensor(clean)

    total = None
    per_level: Dict[float, float] = {}
    for level in cfg.levels:
        seed = stable_seed("train", cfg.seed, state.step, level)
        degraded = _degrade_batch(clean, cfg.task, level, seed)
        kernels = generate_network_weights(model.hypernet, cfg.conditioning(level))
        restored = forward(Tensor(degraded), kernels, model.shared, model.cfg)
        loss = l1_loss(restored, clean_t)
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingDiverged(
                f"non-finite loss {value} at level {level} on step {state.step}")
        per_level[level] = value
        total = loss if total is None else total + loss

    state.optimizer.zero_grad()
    total.backward()
    clip_global_norm(state.optimizer.params, cfg.grad_clip_norm)
    state.optimizer.lr = cfg.learning_rate * 0.5 ** (state.step // cfg.lr_halve_every)
    state.optimizer.step()
    state.step += 1
    for level, value in per_level.items():
        state.loss_history.setdefault(level, []).append(value)
    return per_level


def _validation_psnr(model: HyperRestoreModel, cfg: TrainConfig,
                     val_patches: np.ndarray) -> Dict[float, float]:
    scores = {}
    for level in cfg.levels:
        seed = stable_seed("val", cfg.seed, level)
        degraded = _degrade_batch(val_patches, cfg.task, level, seed)
        kernels = generate_network_weights(model.hypernet, cfg.conditioning(level))
        with no_grad():
            restored = forward(Tensor(degraded), kernels, model.shared, model.cfg)
        scores[level] = psnr(val_patches, clip01(restored.data))
    return scores


def train(config: TrainConfig, source: PatchSource,
          arch: Optional[ArchConfig] = None,
          progress: Optional[Callable[[dict], None]] = None) -> TrainState:
    """Run the full loop; returns the final state (step 0 == initialization).

    Emits line-oriented progress records through ``progress`` (one dict per
    record): step, per-level loss, learning rate, and periodic validation
    PSNR per level.
    """
    arch = arch or ArchConfig()
    model = build_model(arch, task=config.task, level_range=config.level_range,
                        seed=config.seed)
    optimizer = Adam(model.parameters(), lr=config.learning_rate,
                     betas=config.adam_betas, eps=config.adam_eps)
    state = TrainState(model=model, optimizer=optimizer, config=config)

    val_patches = np.stack(source.sample(min(4, config.batch_size)))
    emit = progress or (lambda record: logger.info("%s", json.dumps(record)))

    while state.step < config.steps:
        patches = source.sample(config.batch_size)
        losses = train_step(state, patches)
        if state.step % config.log_every == 0 or state.step == config.steps:
            emit({"type": "progress", "step": state.step,
                  "lr": state.optimizer.lr,
                  "loss": {str(k): round(v, 6) for k, v in losses.items()}})
        if config.val_every and (state.step % config.val_every == 0
                                 or state.step == config.steps):
            scores = _validation_psnr(model, config, val_patches)
            emit({"type": "validation", "step": state.step,
                  "psnr_db": {str(k): round(v, 4) for k, v in scores.items()}})
    return state
