"""Feature-level generator and discriminator networks and their training
against a frozen feature extractor."""

from .networks import (GeneratorConfig, DiscriminatorConfig, Generator, PatchDiscriminator,
                       build_generator, build_discriminator, hallucinate, count_params)
from .train import FeatureGanBundle, train_featuregan, format_losses, LOSS_HEADER
