from .vae import Decoder, Discriminator, Encoder, VaeModel
from .denoiser import Denoiser

__all__ = ["Encoder", "Decoder", "Discriminator", "VaeModel", "Denoiser"]
