"""Linear probe on wavelet-band residual energies.

Features are the log energy fractions of the FSWT bands of a frame's
denoising residual; a logistic regression trained by full-batch gradient
descent turns them into per-frame logits, and clips are scored by the mean
logit of their first 64 frames.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, TrainingError
from .spectral import GaussianDenoiser, residual_frames
from .waverep import diagonal_mask, replace_bands
from .wavelet import band_energies, fswt_forward

LOG_FLOOR = 1e-12
MAX_SCORED_FRAMES = 64


def extract_features(frames, denoiser=None, levels=3):
    """Log normalized band energies of the residual, ``(..., (L+1)**2)``.

    Accepts one frame ``(H, W)`` or a stack ``(..., H, W)``.
    """
    denoiser = denoiser or GaussianDenoiser()
    r = residual_frames(frames, denoiser)
    energies = band_energies(fswt_forward(r, levels))
    energies = energies.reshape(energies.shape[:-2] + (-1,))
    total = energies.sum(axis=-1, keepdims=True)
    frac = np.divide(energies, total, out=np.zeros_like(energies), where=total > 0)
    return np.log(LOG_FLOOR + frac)


@dataclass
class TrainConfig:
    lr: float = 0.5
    epochs: int = 400
    l2: float = 1e-3


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    config: TrainConfig = field(default_factory=TrainConfig)
    meta: dict = field(default_factory=dict)

    def logits(self, features):
        return np.asarray(features, dtype=np.float64) @ self.weights + self.bias

    def to_json(self):
        return {
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "config": asdict(self.config),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            np.array(obj["weights"], dtype=np.float64),
            float(obj["bias"]),
            TrainConfig(**obj.get("config", {})),
            dict(obj.get("meta", {})),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-np.logaddexp(0.0, -z))


def loss_and_grad(w, b, x, y, l2):
    """Mean binary cross-entropy plus ``l2/2 * |w|^2`` and its gradient."""
    z = x @ w + b
    # log(1 + e^z) - y z, written stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    err = (sigmoid(z) - y) / len(y)
    return loss, x.T @ err + l2 * w, err.sum()


def train_logistic(features, labels, cfg=None, seed=0) -> LogisticModel:
    """Full-batch gradient descent on standardized features.

    Standardization is folded back into the returned weights, so the model
    applies directly to raw features.
    """
    cfg = cfg or TrainConfig()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or len(x) != len(y):
        raise DimensionError(f"features {x.shape} and labels {y.shape} do not line up")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise TrainingError("training needs at least one sample of each class")
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    xs = (x - mu) / sd
    rng = np.random.default_rng(seed)
    w = rng.uniform(-0.01, 0.01, size=x.shape[1])
    b = 0.0
    for _ in range(cfg.epochs):
        _, gw, gb = loss_and_grad(w, b, xs, y, cfg.l2)
        w -= cfg.lr * gw
        b -= cfg.lr * gb
    loss, _, _ = loss_and_grad(w, b, xs, y, cfg.l2)
    weights = w / sd
    bias = b - float(weights @ mu)
    return LogisticModel(weights, bias, cfg, {"train_loss": float(loss), "seed": seed, "samples": len(y)})


@dataclass
class ScoredSample:
    id: str
    label: int
    score: float

    @property
    def prob(self):
        return float(sigmoid(self.score))


def frame_logits(model, clip, denoiser=None, levels=3, max_frames=MAX_SCORED_FRAMES):
    frames = clip.data[:max_frames]
    return model.logits(extract_features(frames, denoiser, levels))


def score_clip(model, clip, sample_id="", label=-1, denoiser=None, levels=3, max_frames=MAX_SCORED_FRAMES):
    """Average the per-frame logits of the first ``max_frames`` frames."""
    logits = frame_logits(model, clip, denoiser, levels, max_frames)
    return ScoredSample(sample_id, label, float(np.mean(logits)))


def band_swap_attack(real, fake, levels=3):
    """Inject the fake's diagonal mid-high bands into the real clip."""
    if real.shape != fake.shape:
        raise DimensionError(f"real {real.shape} and fake {fake.shape} differ in shape")
    out = replace_bands(real.data, fake.data, diagonal_mask(levels), levels)
    return real.replace(out)
