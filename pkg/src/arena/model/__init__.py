"""Encoder assembly, training, and checkpoints."""
from .checkpoint import load_checkpoint, save_checkpoint
from .config import FULL_PRESETS, DESK_PRESETS, EncoderConfig, TrainConfig
from .encoder import (
    ForwardContext, ModelParams, build_encoder, capture_weights, encode, forward_classify, forward_match,
    match_features, param_shapes,
)
from .train import Adam, History, evaluate, logits_for, loss_and_grads, train, warmup_lr

__all__ = [
    "FULL_PRESETS", "Adam", "DESK_PRESETS", "EncoderConfig", "ForwardContext", "History", "ModelParams",
    "TrainConfig", "build_encoder", "capture_weights", "encode", "evaluate", "forward_classify", "forward_match",
    "load_checkpoint", "logits_for", "loss_and_grads", "match_features", "param_shapes", "save_checkpoint",
    "train", "warmup_lr",
]
