"""Desk-scale data: procedural camera clips, a down/up-sampling autoencoder
that leaves upsampling fingerprints, and a toy block-DCT codec."""

import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .errors import CapabilityError, DimensionError, EncoderError
from .videoio import Clip, load_y4m, save_y4m

STYLES = ("noise", "gradients+shapes", "textured")
MAX_DRIFT = 4


def derive_seed(*parts):
    """Stable 32-bit seed from a tuple of ints."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass(frozen=True)
class CameraModel:
    """Sensor noise followed by the optics/ISP low-pass, per frame.

    Noise is smoothed together with the scene, so a camera clip has little
    residual power near Nyquist.
    """

    blur: float = 0.22
    noise_sigma: float = 0.05

    def __call__(self, frames, rng):
        x = frames + rng.normal(0.0, self.noise_sigma, size=frames.shape)
        k = np.array([self.blur, 1.0 - 2.0 * self.blur, self.blur])
        x = ndimage.correlate1d(x, k, axis=-1, mode="nearest")
        return ndimage.correlate1d(x, k, axis=-2, mode="nearest")


def _shapes(rng, h, w, count, supersample=4):
    s = supersample
    yy, xx = (np.mgrid[0 : h * s, 0 : w * s].astype(np.float64) + 0.5) / s
    gx, gy = rng.normal(size=2)
    norm = np.hypot(gx, gy) + 1e-9
    canvas = 0.5 + 0.3 * (gx * (xx / w - 0.5) + gy * (yy / h - 0.5)) / norm
    for _ in range(count):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry, rx = rng.uniform(0.05, 0.3) * h, rng.uniform(0.05, 0.3) * w
        theta = rng.uniform(0, np.pi)
        level = rng.uniform(0.05, 0.95)
        dy, dx = yy - cy, xx - cx
        a = (np.cos(theta) * dx + np.sin(theta) * dy) / rx
        b = (-np.sin(theta) * dx + np.cos(theta) * dy) / ry
        if rng.random() < 0.5:
            inside = a**2 + b**2 <= 1.0
        else:
            inside = (np.abs(a) <= 1.0) & (np.abs(b) <= 1.0)
        canvas = np.where(inside, level, canvas)
    # box-filter the supersampled render for anti-aliased edges
    return canvas.reshape(h, s, w, s).mean(axis=(1, 3))


def _texture(rng, h, w, slope=1.6):
    freq = np.hypot(np.fft.fftfreq(h)[:, None], np.fft.rfftfreq(w)[None, :])
    freq[0, 0] = 1.0
    spec = (rng.normal(size=freq.shape) + 1j * rng.normal(size=freq.shape)) / freq**slope
    spec[0, 0] = 0.0
    field_ = np.fft.irfft2(spec, s=(h, w))
    field_ /= np.abs(field_).max() + 1e-12
    return 0.5 + 0.35 * field_


def synth_clip(seed, frames=32, height=64, width=64, style="textured", camera=None, frame_rate=30) -> Clip:
    """Procedural "real" clip; the scene drifts by small random translations.

    ``noise`` gives raw uniform noise. The other styles render a scene and
    pass it through ``camera`` (default :class:`CameraModel`).
    """
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}; choose from {STYLES}")
    if min(height, width) < 16 or frames < 1:
        raise DimensionError("synth_clip needs H, W >= 16 and at least one frame")
    rng = np.random.default_rng(seed)
    # one spare pixel per side lets the camera blur see real neighbours at
    # the frame edge instead of padding
    ch, cw = height + 2 * MAX_DRIFT + 2, width + 2 * MAX_DRIFT + 2
    if style == "noise":
        scene = rng.random((ch, cw))
    elif style == "gradients+shapes":
        scene = _shapes(rng, ch, cw, count=int(rng.integers(4, 10)))
    else:
        scene = 0.5 * _texture(rng, ch, cw) + 0.5 * _shapes(rng, ch, cw, count=int(rng.integers(3, 7)))
    steps = rng.integers(-1, 2, size=(frames, 2))
    steps[0] = 0
    offsets = np.clip(np.cumsum(steps, axis=0), -MAX_DRIFT, MAX_DRIFT) + MAX_DRIFT
    data = np.stack([scene[dy : dy + height + 2, dx : dx + width + 2] for dy, dx in offsets])
    if style != "noise":
        data = (camera or CameraModel())(data, rng)
    data = data[:, 1:-1, 1:-1]
    return Clip(np.clip(data, 0.0, 1.0), frame_rate)


def phase_weighted_kernel(base_1d=(1, 3, 3, 1), vertical=0.0, horizontal=0.0, diagonal=0.0):
    """2-D synthesis kernel for factor-2 zero-insertion upsampling.

    The separable ``base_1d`` interpolator is reweighted per output phase
    ``(a, b)`` by ``1 + vertical*(-1)**a + horizontal*(-1)**b +
    diagonal*(-1)**(a+b)``, which mimics a sub-pixel decoder whose four
    output phases have slightly different gains.
    """
    base = np.outer(base_1d, base_1d).astype(np.float64)
    a = (np.arange(base.shape[0]) % 2)[:, None]
    b = (np.arange(base.shape[1]) % 2)[None, :]
    sa, sb = (-1.0) ** a, (-1.0) ** b
    gain = 1.0 + vertical * sa + horizontal * sb + diagonal * sa * sb
    return tuple(map(tuple, base * gain))


# Strong row/column imbalance with a faint diagonal one: the H/V Nyquist
# peaks sit just under the toy codec's dead zone, the diagonal pattern is
# what the detector has left after compression.
DEFAULT_SYNTHESIS_KERNEL = phase_weighted_kernel(vertical=0.01, horizontal=0.01, diagonal=0.001)


@dataclass(frozen=True)
class AutoencoderSim:
    """Average-pool encoder, noisy latent, zero-insertion + filter decoder.

    ``synthesis_kernel`` is a small 2-D filter (nested tuples, or a flat
    1-D tuple for a separable one). It is rescaled to sum to ``factor**2``,
    so a kernel whose polyphase components have equal sums reproduces
    constants exactly. Unequal polyphase sums leave a periodic gain
    pattern: the upsampling fingerprint.
    """

    factor: int = 2
    synthesis_kernel: tuple = DEFAULT_SYNTHESIS_KERNEL
    latent_noise: float = 0.0

    def __post_init__(self):
        if self.factor < 2 or self.factor & (self.factor - 1):
            raise ValueError(f"factor must be a power of two >= 2, got {self.factor}")
        if not np.any(self.synthesis_kernel):
            raise ValueError("synthesis kernel must be nonzero")

    def kernel(self):
        k = np.asarray(self.synthesis_kernel, dtype=np.float64)
        if k.ndim == 1:
            k = np.outer(k, k)
        return k * (self.factor**2 / k.sum())


def sim_autoencode(clip: Clip, ae: AutoencoderSim = AutoencoderSim(), seed=0) -> Clip:
    f = ae.factor
    t, h, w = clip.shape
    if h % f or w % f:
        raise DimensionError(f"{h}x{w} is not divisible by the autoencoder factor {f}")
    x = np.asarray(clip.data, dtype=np.float64)
    latent = x.reshape(t, h // f, f, w // f, f).mean(axis=(2, 4))
    if ae.latent_noise > 0:
        latent = latent + np.random.default_rng(seed).normal(0.0, ae.latent_noise, size=latent.shape)
    z = np.zeros((t, h, w))
    z[:, ::f, ::f] = latent
    out = ndimage.correlate(z, ae.kernel()[None], mode="wrap")
    return clip.replace(np.clip(out, 0.0, 1.0))


@dataclass(frozen=True)
class ToyCodec:
    """Intra block-DCT quantizer followed by temporal IIR smoothing."""

    block: int = 8
    quant_step: float = 0.1
    temporal_smoothing: float = 0.0

    def __post_init__(self):
        if self.quant_step <= 0:
            raise ValueError("quant_step must be positive")
        if not 0.0 <= self.temporal_smoothing < 1.0:
            raise ValueError("temporal_smoothing must lie in [0, 1)")


def block_dct_quantize(frames, block, q):
    """Quantize orthonormal BxB DCT-II coefficients of each block to multiples of q."""
    x = np.asarray(frames, dtype=np.float64)
    t, h, w = x.shape
    if h % block or w % block:
        raise DimensionError(f"block size {block} does not divide {h}x{w}")
    blocks = x.reshape(t, h // block, block, w // block, block)
    coef = sfft.dctn(blocks, type=2, norm="ortho", axes=(2, 4))
    coef = np.round(coef / q) * q
    return sfft.idctn(coef, type=2, norm="ortho", axes=(2, 4)).reshape(t, h, w)


def toy_compress(clip: Clip, codec: ToyCodec = ToyCodec()) -> Clip:
    x = block_dct_quantize(clip.data, codec.block, codec.quant_step)
    lam = codec.temporal_smoothing
    if lam > 0:
        for t in range(1, x.shape[0]):
            x[t] = (1.0 - lam) * x[t] + lam * x[t - 1]
    return clip.replace(np.clip(x, 0.0, 1.0))


def psnr(a, b, peak=1.0):
    mse = np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2)
    return float("inf") if mse == 0 else float(10.0 * np.log10(peak**2 / mse))


# Inputs and outputs are Y4M on both sides; {crf}, {src}, {dst}, {mid}
# are substituted before the commands run.
ENCODE_TEMPLATE = (
    "{encoder} -loglevel error -y -i {src} -c:v libx264 -profile:v main -level 3.1 "
    "-crf {crf} -pix_fmt yuv420p {mid}"
)
ENCODE_LOSSLESS_TEMPLATE = (
    "{encoder} -loglevel error -y -i {src} -c:v libx264 -qp 0 -pix_fmt yuv420p {mid}"
)
DECODE_TEMPLATE = "{encoder} -loglevel error -y -i {mid} -pix_fmt yuv420p -f yuv4mpegpipe {dst}"


def find_encoder(encoder_path=None):
    path = shutil.which(encoder_path or "ffmpeg")
    if path is None:
        raise CapabilityError(f"external encoder {encoder_path or 'ffmpeg'!r} not found on this host")
    return path


def external_encode(clip: Clip, crf=23, encoder_path=None) -> Clip:
    """Round-trip a clip through H.264 using an external ffmpeg binary.

    ``crf=0`` selects a lossless (qp 0) encode.
    """
    encoder = find_encoder(encoder_path)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        src, mid, dst = tmp / "in.y4m", tmp / "mid.mp4", tmp / "out.y4m"
        save_y4m(clip, src, chroma="420")
        template = ENCODE_LOSSLESS_TEMPLATE if crf == 0 else ENCODE_TEMPLATE
        for cmd in (template, DECODE_TEMPLATE):
            args = cmd.format(encoder=encoder, src=src, mid=mid, dst=dst, crf=crf).split()
            proc = subprocess.run(args, capture_output=True, text=True)
            if proc.returncode != 0:
                raise EncoderError(f"{args[0]} exited with status {proc.returncode}", proc.stderr)
        out = load_y4m(dst)
    if out.shape != clip.shape:
        raise EncoderError(f"encoder changed clip shape {clip.shape} -> {out.shape}")
    return Clip(out.data, clip.frame_rate)


@dataclass
class PairedDataset:
    """Real clips and their fake counterparts, index-aligned by pair."""

    reals: list
    fakes: list
    pair_ids: list
    styles: list = field(default_factory=list)


def make_pairs(n_pairs, seed, frames=32, height=64, width=64, ae=AutoencoderSim(), styles=("gradients+shapes", "textured")):
    """Real/fake pairs sharing a scene style but not the scene itself.

    Each fake is an independent scene passed through the autoencoder, the
    way paired generations share a prompt but not their pixels.
    """
    reals, fakes, ids, used = [], [], [], []
    for i in range(n_pairs):
        style = styles[i % len(styles)]
        reals.append(synth_clip(derive_seed(seed, 0, i), frames, height, width, style))
        scene = synth_clip(derive_seed(seed, 1, i), frames, height, width, style)
        fakes.append(sim_autoencode(scene, ae, seed=derive_seed(seed, 2, i)))
        ids.append(f"{seed}-{i:05d}")
        used.append(style)
    return PairedDataset(reals, fakes, ids, used)
