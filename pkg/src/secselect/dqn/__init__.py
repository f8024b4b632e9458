from secselect.dqn.checkpoint import checkpoint_bytes, load_checkpoint, load_checkpoint_bytes, save_checkpoint
from secselect.dqn.network import EVAL, TRAIN, Adam, QNetwork
from secselect.dqn.replay import Batch, ReplayBuffer, Transition
from secselect.dqn.training import (
    HIDDEN_DIMS,
    TrainConfig,
    build_network,
    fit_batch,
    masked_argmax,
    select_action,
    sync_target,
    td_targets,
    train_step,
)

__all__ = [
    "Adam", "Batch", "EVAL", "HIDDEN_DIMS", "QNetwork", "ReplayBuffer", "TRAIN", "TrainConfig", "Transition",
    "build_network", "checkpoint_bytes", "fit_batch", "load_checkpoint", "load_checkpoint_bytes", "masked_argmax", "save_checkpoint", "select_action",
    "sync_target", "td_targets", "train_step",
]
