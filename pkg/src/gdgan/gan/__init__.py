from .bundle import (
    GanBundle,
    GeneratedBatch,
    NoiseSpec,
    acgan_generator_forward,
    build_bundle,
    critic_forward,
    generator1_forward,
    generator2_forward,
    rebuild_bundle,
    sample_acgan,
    sample_gdgan,
    sample_noise,
)
from .checkpoint import (
    CheckpointData,
    load_gan_checkpoint,
    read_checkpoint,
    save_gan_checkpoint,
    write_checkpoint,
)
from .losses import (
    LossBreakdown,
    TrainConfig,
    acgan_discriminator_loss,
    acgan_generator_loss,
    detailed_class_nll,
    general_class_nll,
    gradient_penalty,
    interpolate_gradients,
    stage1_critic_loss,
    stage1_generator_loss,
    stage2_critic_loss,
    stage2_generator_loss,
)
from .nets import ACGAN, STAGE1, STAGE2, Critic, CriticOutput, general_to_onehot, labels_to_channels
from .train import TrainingData, train_acgan, train_stage

__all__ = [
    "GanBundle",
    "GeneratedBatch",
    "NoiseSpec",
    "acgan_generator_forward",
    "build_bundle",
    "critic_forward",
    "generator1_forward",
    "generator2_forward",
    "rebuild_bundle",
    "sample_acgan",
    "sample_gdgan",
    "sample_noise",
    "CheckpointData",
    "load_gan_checkpoint",
    "read_checkpoint",
    "save_gan_checkpoint",
    "write_checkpoint",
    "LossBreakdown",
    "TrainConfig",
    "acgan_discriminator_loss",
    "acgan_generator_loss",
    "detailed_class_nll",
    "general_class_nll",
    "gradient_penalty",
    "interpolate_gradients",
    "stage1_critic_loss",
    "stage1_generator_loss",
    "stage2_critic_loss",
    "stage2_generator_loss",
    "ACGAN",
    "STAGE1",
    "STAGE2",
    "Critic",
    "CriticOutput",
    "general_to_onehot",
    "labels_to_channels",
    "TrainingData",
    "train_acgan",
    "train_stage",
]
