"""Residual fingerprints: denoising residuals, averaged 3D power spectra and
the normalized real-vs-reconstruction frequency distance."""

import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ContractError, DimensionError
from .videoio import Clip

log = logging.getLogger(__name__)


class GaussianDenoiser:
    """3x3 Gaussian blur with replicated edges, applied frame by frame."""

    def __init__(self, sigma=0.8):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = sigma
        taps = np.exp(-np.array([1.0, 0.0, 1.0]) / (2.0 * sigma**2))
        self.kernel = taps / taps.sum()

    def __call__(self, frames):
        x = np.asarray(frames, dtype=np.float64)
        x = ndimage.correlate1d(x, self.kernel, axis=-1, mode="nearest")
        return ndimage.correlate1d(x, self.kernel, axis=-2, mode="nearest")

    def __repr__(self):
        return f"gaussian:{self.sigma:g}"


class IdentityDenoiser:
    def __call__(self, frames):
        return np.asarray(frames, dtype=np.float64)

    def __repr__(self):
        return "identity"


def parse_denoiser(spec):
    """Build a denoiser from ``gaussian[:sigma]`` or ``identity``."""
    name, _, arg = str(spec).partition(":")
    if name == "gaussian":
        return GaussianDenoiser(float(arg) if arg else 0.8)
    if name in ("identity", "none"):
        return IdentityDenoiser()
    raise ValueError(f"unknown denoiser {spec!r}")


def residual_frames(frames, denoiser):
    """x - D(x) on a raw ``(..., H, W)`` array, in float64."""
    x = np.asarray(frames, dtype=np.float64)
    den = np.asarray(denoiser(x))
    if den.shape != x.shape:
        raise ContractError(f"denoiser changed shape {x.shape} -> {den.shape}")
    return x - den


def residual(clip: Clip, denoiser=None) -> Clip:
    denoiser = denoiser or GaussianDenoiser()
    return clip.replace(residual_frames(clip.data, denoiser))


@dataclass
class SpectrumSet:
    """Averaged power spectra in natural DFT order.

    ``s_yx[u, v]``, ``s_tx[w, v]`` and ``s_yt[u, w]``; use
    ``np.fft.fftshift`` to center DC for display.
    """

    s_yx: np.ndarray
    s_tx: np.ndarray
    s_yt: np.ndarray
    clip_count: int

    @property
    def dims(self):
        m, n = self.s_yx.shape
        return m, n, self.s_tx.shape[0]


@dataclass
class DistanceMap:
    d: np.ndarray
    clip_count: int


def _stack_shape(clips):
    if not clips:
        raise ValueError("need at least one clip")
    shape = clips[0].shape
    for c in clips[1:]:
        if c.shape != shape:
            raise DimensionError(f"clip shape {c.shape} differs from {shape}")
    return shape


def power_spectra(clips, denoiser=None) -> SpectrumSet:
    """Average |R(u,v,w)|^2 over clips and one frequency axis.

    With ``denoiser=None`` the clips are taken to be residuals already.
    Clip arrays are ``[p, m, n]`` so the DFT is indexed ``[w, u, v]``.
    """
    p, m, n = _stack_shape(clips)
    s_yx = np.zeros((m, n))
    s_tx = np.zeros((p, n))
    s_yt = np.zeros((m, p))
    for clip in clips:
        r = clip.data if denoiser is None else residual_frames(clip.data, denoiser)
        power = np.abs(np.fft.fftn(np.asarray(r, dtype=np.float64))) ** 2
        s_yx += power.mean(axis=0)
        s_tx += power.mean(axis=1)
        s_yt += power.mean(axis=2).T
    k = len(clips)
    return SpectrumSet(s_yx / k, s_tx / k, s_yt / k, k)


def freq_distance(real_clips, recon_clips) -> DistanceMap:
    """Per-(u, v) reconstruction error normalized by the real clip's energy.

    Uses DFTs of the clips themselves, not of residuals. Cells whose real
    energy is exactly zero contribute 0 and are reported in a warning.
    """
    if len(real_clips) != len(recon_clips):
        raise DimensionError(f"{len(real_clips)} real clips vs {len(recon_clips)} reconstructions")
    p, m, n = _stack_shape(list(real_clips) + list(recon_clips))
    total = np.zeros((m, n))
    zero_cells = 0
    for real, recon in zip(real_clips, recon_clips):
        x = np.fft.fftn(np.asarray(real.data, dtype=np.float64))
        xh = np.fft.fftn(np.asarray(recon.data, dtype=np.float64))
        num = (np.abs(x - xh) ** 2).sum(axis=0)
        den = (np.abs(x) ** 2).sum(axis=0)
        bad = den == 0
        zero_cells += int(bad.sum())
        total += np.divide(num, den, out=np.zeros_like(num), where=~bad)
    if zero_cells:
        log.warning("freq_distance: %d zero-energy (u,v) cells set to 0", zero_cells)
    return DistanceMap(total / len(real_clips), len(real_clips))


def render_spectrum(grid, out_path, log_eps=1e-8):
    """Write a DC-centered log10 view of ``grid`` as an 8-bit binary PGM."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise DimensionError("render_spectrum expects a 2-D grid")
    if np.any(grid < 0):
        raise ValueError("grid must be nonnegative")
    img = np.log10(np.fft.fftshift(grid) + log_eps)
    lo, hi = img.min(), img.max()
    if hi > lo:
        pix = np.rint((img - lo) / (hi - lo) * 255.0)
    else:
        pix = np.zeros_like(img)
    pix = pix.astype(np.uint8)
    h, w = pix.shape
    with open(Path(out_path), "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path):
    """Minimal binary PGM reader, enough to inspect our own renders."""
    raw = Path(path).read_bytes()
    head = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if head is None:
        raise ValueError(f"{path} is not a binary PGM")
    w, h = int(head.group(1)), int(head.group(2))
    return np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=head.end()).reshape(h, w)


def peak_to_median(spectrum, locations):
    """Ratio of the spectrum at each ``(u, v)`` location to its median."""
    spectrum = np.asarray(spectrum)
    med = np.median(spectrum)
    return np.array([spectrum[u, v] / med for u, v in locations])


def nyquist_locations(m, n):
    """Spectral replica sites of a factor-2 upsampler, DC excluded."""
    return [(0, n // 2), (m // 2, 0), (m // 2, n // 2)]


def region_mask(m, n, lo, hi):
    """Cells whose signed normalized |u|/M and |v|/N both lie in [lo, hi]."""
    fu = np.abs(np.fft.fftfreq(m))[:, None]
    fv = np.abs(np.fft.fftfreq(n))[None, :]
    return (fu >= lo) & (fu <= hi) & (fv >= lo) & (fv <= hi)
