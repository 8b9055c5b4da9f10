"""Training and sampling configuration dataclasses."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _require(cond: bool, field_name: str, message: str):
    if not cond:
        raise ConfigError(field_name, message)


@dataclass
class VaeConfig:
    """Stage-1 motion VAE with optional adversarial training."""

    d_z: int = 16
    downsample_ratio: int = 4
    seq_len: int = 64                  # training segment length L
    lambda_act: float = 1.0
    lambda_reg: float = 1e-4
    lambda_adv: float = 1e-3
    recon_loss: str = "smooth_l1"      # or "mse" for the plain squared-error variant
    position_enhance_weight: float = 1.0
    adversary: str = "san"             # none | gan | san
    batch_size: int = 128
    lr: float = 2e-4
    lr_drop_iters: int = 10_000        # first phase length at full lr
    lr_end: float = 2e-5
    total_iters: int = 15_000
    width: int = 128
    d_w: int = 256
    weight_decay: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.99)
    encoder_input: str = "encoder"     # "encoder" (reduced) or "full" (all channels + activation)
    checkpoint_every: int = 2000
    log_every: int = 50
    eval_every: int = 200

    def __post_init__(self):
        _require(self.d_z > 0, "d_z", "must be positive")
        _require(self.downsample_ratio == 4, "downsample_ratio", "only ratio 4 is supported")
        _require(self.seq_len % self.downsample_ratio == 0, "seq_len", "must be divisible by the downsample ratio")
        for name in ("lambda_act", "lambda_reg", "lambda_adv", "position_enhance_weight"):
            _require(getattr(self, name) >= 0, name, "must be non-negative")
        _require(self.recon_loss in ("mse", "smooth_l1"), "recon_loss", "must be mse or smooth_l1")
        _require(self.adversary in ("none", "gan", "san"), "adversary", "must be none, gan or san")
        _require(self.encoder_input in ("encoder", "full"), "encoder_input", "must be encoder or full")
        _require(self.batch_size > 0, "batch_size", "must be positive")
        _require(self.total_iters > 0, "total_iters", "must be positive")

    @property
    def d_l(self) -> int:
        return self.seq_len // self.downsample_ratio

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @staticmethod
    def from_dict(d: dict) -> "VaeConfig":
        return _from_dict(VaeConfig, d)


@dataclass
class DiffusionConfig:
    """Stage-2 text-conditioned latent diffusion."""

    T: int = 1000
    sample_steps: int = 50
    schedule: str = "cosine"
    cfg_scale: float = 11.0
    cond_drop_prob: float = 0.1
    delta: float = 0.5                 # activation threshold for length clipping
    eta: float = 0.0
    batch_size: int = 64
    lr: float = 1e-4
    warmup_iters: int = 100
    total_iters: int = 10_000
    d_model: int = 256
    n_blocks: int = 4
    n_heads: int = 4
    mlp_expand: int = 4
    d_cond: int = 128
    text_layers: int = 2
    max_tokens: int = 16
    use_sampled_z0: bool = False       # default trains on posterior means
    checkpoint_every: int = 2000
    log_every: int = 50
    eval_every: int = 500

    def __post_init__(self):
        _require(self.T >= 1, "T", "must be >= 1")
        _require(1 <= self.sample_steps <= self.T, "sample_steps", "need 1 <= S <= T")
        _require(self.cfg_scale >= 0, "cfg_scale", "must be non-negative")
        _require(0 <= self.cond_drop_prob <= 1, "cond_drop_prob", "must be a probability")
        _require(0 < self.delta < 1, "delta", "must lie in (0, 1)")
        _require(self.schedule in ("cosine", "linear"), "schedule", "must be cosine or linear")
        _require(self.d_model % self.n_heads == 0, "d_model", "must be divisible by n_heads")
        _require(self.total_iters > 0, "total_iters", "must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "DiffusionConfig":
        return _from_dict(DiffusionConfig, d)


def _from_dict(cls, d: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown config field")
    kwargs = dict(d)
    if "betas" in kwargs and isinstance(kwargs["betas"], list):
        kwargs["betas"] = tuple(kwargs["betas"])
    return cls(**kwargs)


def desk_vae_config(**overrides) -> VaeConfig:
    """Small configuration that trains in minutes on CPU for the toy skeleton."""
    base = dict(
        seq_len=196,
        batch_size=32,
        width=64,
        d_w=128,
        total_iters=1500,
        lr_drop_iters=1000,
        checkpoint_every=500,
        eval_every=250,
    )
    base.update(overrides)
    return VaeConfig(**base)


def desk_diffusion_config(**overrides) -> DiffusionConfig:
    base = dict(
        batch_size=32,
        d_model=128,
        n_blocks=3,
        n_heads=4,
        mlp_expand=2,
        total_iters=3000,
        warmup_iters=100,
        checkpoint_every=1000,
        eval_every=250,
    )
    base.update(overrides)
    return DiffusionConfig(**base)
