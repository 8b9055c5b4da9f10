"""Text-to-motion generation with a latent diffusion model over an
adversarially trained motion VAE, plus training-free guided editing."""

__version__ = "0.1.0"
