from .layers import (
    Attention, Conv2d, DecoderLayer, EncoderLayer, FeedForward, LayerNorm, Linear, Module, PositionalEncoding,
    attention_weights, cross_attend,
)
from .losses import DICE_EPS, combined_loss, dice_loss
from .network import (
    AUX_CHANNELS, MODEL_VARIANTS, ModelConfig, TwoStreamConfig, ZeroBev, area_reduce, build_model,
)
from .theorem import Certificate, TheoremReport, max_pool_certificate, theorem_oracle
from .train import (
    NOISE_SIGMA, Batch, TrainConfig, TrainingDiverged, batch_loss, evaluate, load_checkpoint, load_split,
    model_from_checkpoint, noisy_depth, projected_zero, read_log, save_checkpoint, stack_triplets, train,
)

__all__ = [
    "Attention", "Conv2d", "DecoderLayer", "EncoderLayer", "FeedForward", "LayerNorm", "Linear", "Module",
    "PositionalEncoding", "attention_weights", "cross_attend", "DICE_EPS", "combined_loss", "dice_loss",
    "AUX_CHANNELS", "MODEL_VARIANTS", "ModelConfig", "TwoStreamConfig", "ZeroBev", "area_reduce", "build_model",
    "Certificate", "TheoremReport", "max_pool_certificate", "theorem_oracle",
    "NOISE_SIGMA", "Batch", "TrainConfig", "TrainingDiverged", "batch_loss", "evaluate", "load_checkpoint",
    "load_split", "model_from_checkpoint", "noisy_depth", "projected_zero", "read_log", "save_checkpoint",
    "stack_triplets", "train",
]
