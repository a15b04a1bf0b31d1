"""Wavelet-band replacement augmentation.

Low-frequency and pure horizontal/vertical bands of a fake frame are
swapped for those of its real counterpart, so that only the diagonal
mid-high bands still carry the fake's traces.
"""

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List

import numpy as np

from .errors import DimensionError, FormatError
from .wavelet import check_dims, fswt_forward, fswt_inverse


class Variant(str, Enum):
    V0_ALL_FAKE = "V0_all_fake"
    V1_BASEBAND = "V1_baseband"
    V2_BASEBAND_PLUS_HORIZONTAL = "V2_baseband_plus_horizontal"
    V3_FULL_DEFAULT = "V3_full_default"


REPLACING_VARIANTS = (Variant.V1_BASEBAND, Variant.V2_BASEBAND_PLUS_HORIZONTAL, Variant.V3_FULL_DEFAULT)


def default_mask(levels=3):
    """True on band row 0 and band column 0: baseband plus pure H/V bands."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    idx = np.arange(levels + 1)
    return (idx[:, None] == 0) | (idx[None, :] == 0)


def variant_mask(variant, levels=3):
    variant = Variant(variant)
    n = levels + 1
    mask = np.zeros((n, n), dtype=bool)
    if variant is Variant.V1_BASEBAND:
        mask[0, 0] = True
    elif variant is Variant.V2_BASEBAND_PLUS_HORIZONTAL:
        mask[0, :] = True
    elif variant is Variant.V3_FULL_DEFAULT:
        mask = default_mask(levels)
    return mask


def diagonal_mask(levels=3):
    """Complement of :func:`default_mask`: bands with both indices >= 1."""
    return ~default_mask(levels)


def parse_mask(spec, levels=3):
    """Resolve ``default``, ``all``, ``none`` or a path to a JSON boolean array."""
    n = levels + 1
    if spec == "default":
        return default_mask(levels)
    if spec == "all":
        return np.ones((n, n), dtype=bool)
    if spec == "none":
        return np.zeros((n, n), dtype=bool)
    try:
        mask = np.array(json.loads(Path(spec).read_text()), dtype=bool)
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read mask {spec!r}: {exc}") from None
    if mask.shape != (n, n):
        raise DimensionError(f"mask {spec!r} is {mask.shape}, expected {n}x{n}")
    return mask


def replace_bands(fake, real, mask, levels=3):
    """Swap the masked FSWT bands of ``fake`` for those of ``real``.

    Works on a single plane or on any stack ``(..., H, W)``.
    """
    fake = np.asarray(fake, dtype=np.float64)
    real = np.asarray(real, dtype=np.float64)
    if fake.shape != real.shape:
        raise DimensionError(f"fake {fake.shape} and real {real.shape} differ in shape")
    check_dims(fake.shape[-2], fake.shape[-1], levels)
    grid = fswt_forward(fake, levels)
    src = fswt_forward(real, levels)
    where = grid.expand_mask(mask)
    grid.packed[..., where] = src.packed[..., where]
    return fswt_inverse(grid)


@dataclass
class AugmentationLog:
    variants: List[Variant]

    @property
    def replaced_fraction(self):
        if not self.variants:
            return 0.0
        return sum(v is not Variant.V0_ALL_FAKE for v in self.variants) / len(self.variants)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frame", "variant"])
            for t, v in enumerate(self.variants):
                w.writerow([t, v.value])


def _draw(rng, p):
    # one uniform for the event, one for the variant, regardless of outcome
    event, pick = rng.random(2)
    if event < p:
        return REPLACING_VARIANTS[min(int(pick * 3), 2)]
    return Variant.V0_ALL_FAKE


def draw_variants(n_frames, p, seed, per_clip=False):
    """Per-frame variant choices; stream t is seeded by ``(seed, t)``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if per_clip:
        v = _draw(np.random.default_rng([seed, 0]), p)
        return [v] * n_frames
    return [_draw(np.random.default_rng([seed, t]), p) for t in range(n_frames)]


def augment_pair(fake, real, p=0.1, seed=0, levels=3, per_clip=False):
    """WaveRep a fake clip against its real counterpart, frame by frame.

    Returns the augmented clip and the per-frame :class:`AugmentationLog`.
    """
    if fake.shape != real.shape:
        raise DimensionError(f"fake {fake.shape} and real {real.shape} differ in shape")
    variants = draw_variants(fake.frames, p, seed, per_clip)
    data = np.array(fake.data, dtype=np.float32)
    for variant in REPLACING_VARIANTS:
        idx = [t for t, v in enumerate(variants) if v is variant]
        if idx:
            out = replace_bands(fake.data[idx], real.data[idx], variant_mask(variant, levels), levels)
            data[idx] = out
    return fake.replace(data), AugmentationLog(variants)
