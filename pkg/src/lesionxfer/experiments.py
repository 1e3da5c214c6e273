"""Desk-scale experiments: transfer vs scratch, and oversampling necessity."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import models, synthetic
from .data import TASK1, labels
from .imageproc import SCRATCH, TRANSFER, preprocess_array
from .metrics import ScoredSet, average_precision, roc_auc
from .nn import Rng, predict
from .splits import DEFAULT_FRACTIONS, OversampleConfig, oversample_minority, stratified_split
from .train import LabeledData, run_feature_extractor_stage, run_finetune_stage, run_scratch_stage

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    input_size: int = 32
    raw_size: int = 40
    pretext_images: int = 1200
    pretext_epochs: int = 20
    pretext_lr: float = 3e-3
    pretext_seed: int = 0
    target_images: int = 240
    prevalence: float = 0.20
    oversample: int = 3
    scratch_epochs: int = 20
    feature_epochs: int = 20
    finetune_epochs: int = 60
    batch_size: int = 32


@dataclass
class SplitArrays:
    train: LabeledData
    val: LabeledData
    test_ids: list
    test_inputs: np.ndarray
    test_labels: np.ndarray


def pretrained_backbone(cfg: ExperimentConfig, seed: int | None = None):
    seed = cfg.pretext_seed if seed is None else seed
    images, classes = synthetic.pretext_images(cfg.pretext_images, cfg.raw_size, seed)
    profile = TRANSFER.sized(cfg.input_size)
    x = np.stack([preprocess_array(im, profile) for im in images])
    backbone = models.tiny_conv_backbone((cfg.input_size, cfg.input_size, 3))
    return models.pretext_pretrain(backbone, x, classes, epochs=cfg.pretext_epochs, seed=seed,
                                   batch_size=cfg.batch_size, learning_rate=cfg.pretext_lr)


def target_splits(cfg: ExperimentConfig, seed: int, prevalence=None, oversample=None):
    """Preprocessed scratch/transfer arrays for the train (oversampled),
    validation and test partitions of a synthetic lesion set."""
    prevalence = cfg.prevalence if prevalence is None else prevalence
    factor = cfg.oversample if oversample is None else oversample
    dataset, raw = synthetic.lesion_dataset(cfg.target_images, prevalence, cfg.raw_size, seed)
    plan = stratified_split(dataset, DEFAULT_FRACTIONS, TASK1, seed)
    train = oversample_minority(plan.partition(dataset, "train"), TASK1, OversampleConfig(factor))
    val = plan.partition(dataset, "validation")
    test = plan.partition(dataset, "test")
    out = {}
    for name, profile in (("scratch", SCRATCH), ("transfer", TRANSFER)):
        profile = profile.sized(cfg.input_size)
        cache = {r.image_id: preprocess_array(raw[r.image_id], profile) for r in dataset}

        def arrays(records):
            return np.stack([cache[r.image_id] for r in records])

        out[name] = SplitArrays(
            LabeledData(arrays(train), labels(train, TASK1)),
            LabeledData(arrays(val), labels(val, TASK1)),
            [r.image_id for r in test],
            arrays(test),
            np.asarray(labels(test, TASK1)),
        )
    return out


def _scored(net, params, split: SplitArrays):
    return ScoredSet(split.test_ids, predict(net, params, split.test_inputs), split.test_labels)


@dataclass
class TransferOutcome:
    seed: int
    auc: dict = field(default_factory=dict)
    ap: dict = field(default_factory=dict)
    pretext_accuracy: float = float("nan")


def run_transfer_seed(seed: int, cfg: ExperimentConfig = ExperimentConfig(), backbone=None) -> TransferOutcome:
    """Scratch, FeatureExtractor and FineTune on one seeded target set.

    ``backbone`` is the pretext-pretrained backbone, shared across seeds the
    way a published checkpoint would be; built on demand when omitted.
    """
    outcome = TransferOutcome(seed)
    splits = target_splits(cfg, seed)
    rng = Rng(seed).fork("experiment")

    net = models.build_scratch(cfg.input_size)
    params = models.init_network(net, rng.fork("scratch"))
    res = run_scratch_stage(net, params, splits["scratch"].train, splits["scratch"].val, seed,
                            max_epochs=cfg.scratch_epochs, batch_size=cfg.batch_size)
    s = _scored(net, res.params, splits["scratch"])
    outcome.auc["Scratch"], outcome.ap["Scratch"] = roc_auc(s), average_precision(s)

    if backbone is None:
        backbone = pretrained_backbone(cfg)
    outcome.pretext_accuracy = backbone.info["pretext_accuracy"]
    t = splits["transfer"]
    net = models.build_feature_extractor(backbone)
    params = models.init_network(net, rng.fork("feature-extractor"), backbone.params)
    stage1 = run_feature_extractor_stage(net, params, t.train, t.val, seed, max_epochs=cfg.feature_epochs,
                                         batch_size=cfg.batch_size)
    s = _scored(net, stage1.params, t)
    outcome.auc["FeatureExtractor"], outcome.ap["FeatureExtractor"] = roc_auc(s), average_precision(s)

    ft_net, stage2 = run_finetune_stage(net, stage1, t.train, t.val, seed, max_epochs=cfg.finetune_epochs,
                                        batch_size=cfg.batch_size)
    s = _scored(ft_net, stage2.params, t)
    outcome.auc["FineTune"], outcome.ap["FineTune"] = roc_auc(s), average_precision(s)
    log.info("seed %d: %s", seed, {k: round(v, 3) for k, v in outcome.auc.items()})
    return outcome


@dataclass
class OversamplingOutcome:
    seed: int
    prevalence: float
    ap_plain: float
    ap_oversampled: float


def run_oversampling_seed(seed: int, cfg: ExperimentConfig = ExperimentConfig(), prevalence=0.08):
    """Scratch on the skewed lesion set, without and with oversampling."""
    aps = {}
    for factor in (1, cfg.oversample):
        splits = target_splits(cfg, seed, prevalence=prevalence, oversample=factor)
        sc = splits["scratch"]
        net = models.build_scratch(cfg.input_size)
        params = models.init_network(net, Rng(seed).fork("experiment", "scratch"))
        res = run_scratch_stage(net, params, sc.train, sc.val, seed, max_epochs=cfg.scratch_epochs,
                                batch_size=cfg.batch_size)
        aps[factor] = average_precision(_scored(net, res.params, sc))
        test_prev = float(np.mean(sc.test_labels))
    return OversamplingOutcome(seed, test_prev, aps[1], aps[cfg.oversample])
