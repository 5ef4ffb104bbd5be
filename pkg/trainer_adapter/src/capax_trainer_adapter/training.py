"""Training engine: one cross-validation run of one U-Net variant.

The harness owns early stopping; this module just trains epoch by epoch,
reports metrics through a callback, keeps the best-validation checkpoint,
and evaluates it on the held-out test set when told to stop.

Optimizer and batch size are not fixed by the study design; the defaults
(Adam at the requested initial learning rate, explicit L2 penalty, batch 8)
are this adapter's choice and can be overridden per process.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .metrics import bce_loss, dice_index
from .models import build_model
from .rawio import mask_path_for, read_raw


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    val_loss: float
    val_dice: float


@dataclass
class FinalMetrics:
    best_epoch: int
    val_loss: float
    val_dice: float
    test_loss: float
    test_dice: float


class ArraySet:
    """Images and masks for one split, loaded once into memory."""

    def __init__(self, image_paths: list[str]):
        if not image_paths:
            raise ValueError("empty split")
        images, masks = [], []
        for path in image_paths:
            images.append(read_raw(path))
            mask_path = mask_path_for(path)
            if not mask_path.exists():
                raise FileNotFoundError(f"no mask for {path} (expected {mask_path})")
            masks.append((read_raw(mask_path) >= 0.5).astype(np.float32))
        self.images = torch.from_numpy(np.stack(images)).unsqueeze(1)
        self.masks = torch.from_numpy(np.stack(masks)).unsqueeze(1)

    def __len__(self) -> int:
        return self.images.shape[0]


class TrainingRun:
    def __init__(
        self,
        model_name: str,
        train: ArraySet,
        val: ArraySet,
        test: ArraySet,
        lr: float,
        reg: float,
        seed: int,
        device: str = "cpu",
        batch_size: int = 8,
    ):
        if len(train) < 2:
            raise ValueError("training split needs at least 2 images")
        torch.manual_seed(seed)
        self.device = torch.device(device)
        self.model = build_model(model_name).to(self.device)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=lr)
        self.reg = reg
        self.batch_size = batch_size
        self.train_set = train
        self.val_set = val
        self.test_set = test
        self.generator = torch.Generator().manual_seed(seed)
        self.criterion = nn.BCEWithLogitsLoss()
        self.best_state: dict | None = None
        self.best_epoch = 0
        self.best_val_loss = float("inf")
        self.epoch = 0

    def _l2_penalty(self) -> torch.Tensor:
        total = torch.zeros((), device=self.device)
        for param in self.model.parameters():
            total = total + (param**2).sum()
        return self.reg * total

    def _training_batches(self) -> list[torch.Tensor]:
        order = torch.randperm(len(self.train_set), generator=self.generator)
        batches = [order[s:s + self.batch_size] for s in range(0, len(order), self.batch_size)]
        # BatchNorm cannot train on a single sample once the bottleneck
        # reaches 1x1, so fold a trailing singleton into the previous batch.
        if len(batches) > 1 and len(batches[-1]) == 1:
            batches[-2] = torch.cat([batches[-2], batches[-1]])
            batches.pop()
        return batches

    def train_one_epoch(self) -> EpochMetrics:
        self.epoch += 1
        self.model.train()
        losses = []
        for batch in self._training_batches():
            images = self.train_set.images[batch].to(self.device)
            masks = self.train_set.masks[batch].to(self.device)
            self.optimizer.zero_grad()
            logits = self.model(images)
            loss = self.criterion(logits, masks) + self._l2_penalty()
            loss.backward()
            self.optimizer.step()
            losses.append(float(loss.detach()))

        val_loss, val_dice = self.evaluate(self.val_set)
        if val_loss < self.best_val_loss:
            self.best_val_loss = val_loss
            self.best_epoch = self.epoch
            self.best_state = copy.deepcopy(self.model.state_dict())
        return EpochMetrics(
            epoch=self.epoch,
            train_loss=float(np.mean(losses)),
            val_loss=val_loss,
            val_dice=val_dice,
        )

    @torch.no_grad()
    def evaluate(self, dataset: ArraySet) -> tuple[float, float]:
        """Mean pixel BCE and mean per-image DICE over a split."""
        self.model.eval()
        y_all, p_all, dices = [], [], []
        for start in range(0, len(dataset), self.batch_size):
            images = dataset.images[start:start + self.batch_size].to(self.device)
            masks = dataset.masks[start:start + self.batch_size]
            probs = torch.sigmoid(self.model(images)).cpu()
            for i in range(probs.shape[0]):
                y = masks[i, 0].numpy()
                p = probs[i, 0].numpy()
                y_all.append(y.ravel())
                p_all.append(p.ravel())
                dices.append(dice_index(y, p))
        loss = bce_loss(np.concatenate(y_all), np.concatenate(p_all))
        return loss, float(np.mean(dices))

    @torch.no_grad()
    def predictions(self, dataset: ArraySet) -> list[tuple[np.ndarray, np.ndarray]]:
        self.model.eval()
        pairs = []
        for start in range(0, len(dataset), self.batch_size):
            images = dataset.images[start:start + self.batch_size].to(self.device)
            masks = dataset.masks[start:start + self.batch_size]
            probs = torch.sigmoid(self.model(images)).cpu()
            for i in range(probs.shape[0]):
                pairs.append((masks[i, 0].numpy(), probs[i, 0].numpy()))
        return pairs

    def finalize(self) -> FinalMetrics:
        """Restore the best-validation checkpoint and score the test set."""
        if self.best_state is not None:
            self.model.load_state_dict(self.best_state)
        val_loss, val_dice = self.evaluate(self.val_set)
        test_loss, test_dice = self.evaluate(self.test_set)
        return FinalMetrics(
            best_epoch=self.best_epoch,
            val_loss=val_loss,
            val_dice=val_dice,
            test_loss=test_loss,
            test_dice=test_dice,
        )
