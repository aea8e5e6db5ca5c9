"""Classifier training loop."""

import logging
from dataclasses import dataclass, field

import torch
from torch import nn

from .datasets import CLASS_NAMES, load_split, scan_dataset
from .model import DEFAULT_HEAD_WIDTHS, GestureClassifier

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    data_dir: str
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    head_widths: tuple = DEFAULT_HEAD_WIDTHS
    pretrained: bool = False
    seed: int = 0

    def validate(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        return self


def train_classifier(config: TrainConfig):
    """Train on the train split and report metrics on the held-out split.

    Returns (model, metrics). Every class must appear in the train split;
    accuracy is measured on test, falling back to val, falling back to the
    train split itself (with a warning) for datasets without splits.
    """
    config.validate()
    torch.manual_seed(config.seed)
    samples = scan_dataset(config.data_dir)
    train_x, train_y = load_split(samples, "train")
    if train_x is None:
        raise ValueError("dataset has no train samples")
    present = set(train_y.tolist())
    missing = [CLASS_NAMES[i] for i in range(len(CLASS_NAMES)) if i not in present]
    if missing:
        raise ValueError(f"classes absent from the train split: {missing}")

    model = GestureClassifier(head_widths=config.head_widths, pretrained=config.pretrained)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()

    model.train()
    for epoch in range(config.epochs):
        permutation = torch.randperm(train_x.shape[0])
        total_loss = 0.0
        for start in range(0, train_x.shape[0], config.batch_size):
            batch = permutation[start : start + config.batch_size]
            optimizer.zero_grad()
            _, logits = model(train_x[batch])
            loss = loss_fn(logits, train_y[batch])
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach()) * len(batch)
        logger.info("epoch %d/%d loss %.4f", epoch + 1, config.epochs, total_loss / train_x.shape[0])

    eval_split = "test"
    eval_x, eval_y = load_split(samples, "test")
    if eval_x is None:
        eval_split = "val"
        eval_x, eval_y = load_split(samples, "val")
    if eval_x is None:
        logger.warning("no val/test split; reporting accuracy on the train split")
        eval_split = "train"
        eval_x, eval_y = train_x, train_y

    model.eval()
    with torch.no_grad():
        correct = 0
        for start in range(0, eval_x.shape[0], config.batch_size):
            _, logits = model(eval_x[start : start + config.batch_size])
            correct += int((logits.argmax(dim=1) == eval_y[start : start + config.batch_size]).sum())
    metrics = {
        "epochs": config.epochs,
        "train_samples": int(train_x.shape[0]),
        "eval_split": eval_split,
        "eval_samples": int(eval_x.shape[0]),
        "test_accuracy": correct / eval_x.shape[0],
        **model.parameter_counts(),
    }
    return model, metrics
