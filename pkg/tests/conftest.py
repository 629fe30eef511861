"""Shared fixtures. The toy checkpoint reproduces the desk-scale adaptive
denoising experiment (channels=8, 4 residual blocks, sigma {10, 30, 50},
32px patches, 2000 steps on the shipped 12-image corpus) once per session;
quality-sensitive tests reuse it. ``mini_ckpt`` is a seconds-scale checkpoint
for plumbing tests that only need a structurally valid file."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hyperrestore import checkpoint as ckpt
from hyperrestore.datasets import PatchSource, build_synthetic_corpus, load_corpus
from hyperrestore.estimator import INPUT_SIZE, train_estimator
from hyperrestore.network import ArchConfig
from hyperrestore.trainer import TrainConfig, train

TOY_LEVELS = [10.0, 30.0, 50.0]
TOY_ARCH = dict(channels=8, num_resblocks=4)
TOY_TRAIN = dict(task="noise", steps=2000, batch_size=24, patch_size=32,
                 learning_rate=1.5e-3, lr_halve_every=500, seed=3)
TOY_ESTIMATOR_STEPS = 800


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    build_synthetic_corpus(root)
    return root


@pytest.fixture(scope="session")
def corpus_records(corpus_dir):
    return load_corpus(corpus_dir)


@pytest.fixture(scope="session")
def toy_ckpt(tmp_path_factory, corpus_records):
    """Full desk-scale training run plus blind estimator; trains once."""
    path = tmp_path_factory.mktemp("model") / "toy.hrck"
    config = TrainConfig(levels=TOY_LEVELS, val_every=0, **TOY_TRAIN)
    source = PatchSource(corpus_records, config.patch_size,
                         seed=config.seed + 100, augment_flips=False)
    state = train(config, source, ArchConfig(**TOY_ARCH))
    est_source = PatchSource(corpus_records, INPUT_SIZE, seed=config.seed + 200)
    net = train_estimator(TOY_LEVELS, est_source, steps=TOY_ESTIMATOR_STEPS,
                          seed=config.seed)
    ckpt.save(state.model, path, estimator_tensors=net.tensor_table(),
              seed=config.seed)
    return path


@pytest.fixture(scope="session")
def mini_ckpt(tmp_path_factory, corpus_records):
    """Seconds-scale checkpoint (with an untrained-quality estimator head)."""
    path = tmp_path_factory.mktemp("mini") / "mini.hrck"
    config = TrainConfig(levels=TOY_LEVELS, task="noise", steps=12,
                         batch_size=4, patch_size=16, seed=1, val_every=0)
    source = PatchSource(corpus_records, config.patch_size, seed=2)
    state = train(config, source, ArchConfig(channels=4, num_resblocks=2))
    est_source = PatchSource(corpus_records, INPUT_SIZE, seed=3)
    net = train_estimator(TOY_LEVELS, est_source, steps=3, seed=1)
    ckpt.save(state.model, path, estimator_tensors=net.tensor_table(), seed=1)
    return path
