"""Early-stopping policy owned by the harness, not the trainer."""

from __future__ import annotations


class EarlyStopping:
    """Halt when validation loss fails to strictly improve for `patience` epochs.

    A tie with the running best counts as no improvement. The harness applies
    this policy identically to every trainer, so heterogeneous trainers stop
    at the same epoch on the same loss trajectory.
    """

    def __init__(self, patience: int = 5, max_epochs: int = 50):
        if patience < 1 or max_epochs < 1:
            raise ValueError("patience and max_epochs must be positive")
        self.patience = patience
        self.max_epochs = max_epochs
        self.best_loss: float | None = None
        self.best_epoch: int | None = None
        self.stale = 0
        self.last_epoch = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; return True if training should continue."""
        if epoch != self.last_epoch + 1:
            raise ValueError(f"epochs must be consecutive from 1, got {epoch} after {self.last_epoch}")
        self.last_epoch = epoch
        if self.best_loss is None or val_loss < self.best_loss:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale < self.patience and epoch < self.max_epochs


def stop_epoch(losses, patience: int = 5, max_epochs: int = 50) -> tuple[int, int]:
    """Apply the policy to a full loss trajectory.

    Returns (epochs run, best epoch). The trajectory may be longer than the
    policy allows; excess entries are ignored.
    """
    policy = EarlyStopping(patience=patience, max_epochs=max_epochs)
    epoch = 0
    for i, loss in enumerate(losses[:max_epochs]):
        epoch = i + 1
        if not policy.update(epoch, loss):
            break
    if epoch == 0:
        raise ValueError("empty trajectory")
    return epoch, policy.best_epoch
