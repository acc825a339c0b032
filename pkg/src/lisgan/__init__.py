"""GAN training with learned input-space manipulation: R-separate, R-iterative and G-LIS."""

from .losses import LambdaSchedule
from .models import NetworkParams, NetworkSpec, NoiseBatch, build_network, preset_specs
from .training import TrainConfig, train

__all__ = ["LambdaSchedule", "NetworkParams", "NetworkSpec", "NoiseBatch", "TrainConfig", "build_network",
           "preset_specs", "train"]
__version__ = "0.1.0"
