"""Clip container, YUV4MPEG2 luma I/O, the WVT1 tensor format and dataset manifests."""

import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import DimensionError, FormatError, SizeError, TruncationError

Y4M_MAGIC = b"YUV4MPEG2"
TENSOR_MAGIC = b"WVT1"
MAX_RANK = 4
_U32_MAX = 2**32 - 1


@dataclass(frozen=True)
class Clip:
    """Planar single-channel video, ``data[t, row, col]``.

    Pixel clips live in [0, 1]; residual clips may go negative, so only
    finiteness is enforced here.
    """

    data: np.ndarray
    frame_rate: Fraction = Fraction(30, 1)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3 or min(data.shape) < 1:
            raise DimensionError(f"clip data must be T x H x W with every dim >= 1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("clip data contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "frame_rate", Fraction(self.frame_rate))

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def replace(self, data):
        """New clip with the same frame rate and different samples."""
        return Clip(data, self.frame_rate)


# ---------------------------------------------------------------------------
# YUV4MPEG2


def _parse_y4m_header(line, offset=0):
    tokens = line.split(b" ")
    if tokens[0] != Y4M_MAGIC:
        raise FormatError("missing YUV4MPEG2 magic", offset)
    width = height = None
    rate = Fraction(30, 1)
    chroma = "420"
    pos = offset + len(tokens[0]) + 1
    for tok in tokens[1:]:
        if not tok:
            pos += 1
            continue
        key, val = chr(tok[0]), tok[1:].decode("ascii", errors="replace")
        try:
            if key == "W":
                width = int(val)
            elif key == "H":
                height = int(val)
            elif key == "F":
                num, den = val.split(":")
                rate = Fraction(int(num), int(den))
            elif key == "C":
                if val.startswith("420") and val[3:] in ("", "jpeg", "mpeg2", "paldv"):
                    chroma = "420"
                elif val == "444":
                    chroma = "444"
                else:
                    raise FormatError(f"unsupported colour space C{val}", pos)
        except (ValueError, ZeroDivisionError) as exc:
            raise FormatError(f"bad header token {tok!r}: {exc}", pos) from None
        pos += len(tok) + 1
    if width is None or height is None or width < 1 or height < 1:
        raise FormatError("header lacks valid W/H tokens", offset)
    return width, height, rate, chroma


def _chroma_bytes(width, height, chroma):
    if chroma == "444":
        return 2 * width * height
    return 2 * ((width + 1) // 2) * ((height + 1) // 2)


def load_y4m(path, align=None) -> Clip:
    """Read the luma plane of an 8-bit C420/C444 Y4M file, scaled by 1/255.

    ``align``, when given, center-crops height and width down to the
    nearest multiple of it (use ``2**levels`` before wavelet work).
    """
    raw = Path(path).read_bytes()
    end = raw.find(b"\n")
    if end < 0:
        raise FormatError("unterminated stream header", len(raw))
    width, height, rate, chroma = _parse_y4m_header(raw[:end])
    luma = width * height
    frame_payload = luma + _chroma_bytes(width, height, chroma)
    pos = end + 1
    frames = []
    while pos < len(raw):
        nl = raw.find(b"\n", pos)
        if nl < 0 and b"FRAME".startswith(raw[pos : pos + 5]):
            raise TruncationError("truncated frame header", len(frames))
        if nl < 0 or not raw.startswith(b"FRAME", pos):
            raise FormatError("expected FRAME marker", pos)
        pos = nl + 1
        if pos + frame_payload > len(raw):
            raise TruncationError(
                f"frame {len(frames)} needs {frame_payload} bytes, {len(raw) - pos} available",
                len(frames),
            )
        frames.append(np.frombuffer(raw, dtype=np.uint8, count=luma, offset=pos).reshape(height, width))
        pos += frame_payload
    if not frames:
        raise TruncationError("stream contains no frames", 0)
    clip = Clip(np.stack(frames).astype(np.float32) / np.float32(255.0), rate)
    if align:
        clip = center_crop(clip, clip.height - clip.height % align, clip.width - clip.width % align)
    return clip


def quantize8(data):
    """Round [0, 1] samples to 8-bit codes (values outside are clamped)."""
    return np.clip(np.rint(np.asarray(data, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_y4m(clip, path, chroma="444"):
    """Write luma as 8-bit Y4M; chroma planes are filled with neutral 128."""
    if chroma not in ("444", "420"):
        raise ValueError("chroma must be '444' or '420'")
    t, h, w = clip.shape
    rate = clip.frame_rate
    header = f"YUV4MPEG2 W{w} H{h} F{rate.numerator}:{rate.denominator} Ip A1:1 C{chroma}\n"
    neutral = bytes([128]) * _chroma_bytes(w, h, chroma)
    codes = quantize8(clip.data)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for frame in codes:
            fh.write(b"FRAME\n")
            fh.write(frame.tobytes())
            fh.write(neutral)


# ---------------------------------------------------------------------------
# WVT1 tensors


def save_tensor(data, path):
    arr = np.asarray(data)
    if arr.ndim > MAX_RANK:
        raise SizeError(f"rank {arr.ndim} exceeds the maximum of {MAX_RANK}")
    if any(d == 0 for d in arr.shape):
        raise SizeError(f"tensor has an empty dimension: {arr.shape}")
    if any(d > _U32_MAX for d in arr.shape):
        raise SizeError(f"dimension does not fit in 32 bits: {arr.shape}")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        fh.write(payload.tobytes())


def load_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {raw[:4]!r}", 0)
    if len(raw) < 8:
        raise FormatError("missing rank field", 4)
    (rank,) = struct.unpack_from("<I", raw, 4)
    if rank > MAX_RANK:
        raise FormatError(f"rank {rank} exceeds the maximum of {MAX_RANK}", 4)
    head = 8 + 4 * rank
    if len(raw) < head:
        raise FormatError("truncated dimension list", len(raw))
    dims = struct.unpack_from(f"<{rank}I", raw, 8)
    if any(d == 0 for d in dims):
        raise SizeError(f"tensor has an empty dimension: {dims}")
    count = int(np.prod(dims, dtype=np.int64))
    if len(raw) != head + 4 * count:
        raise FormatError(f"payload is {len(raw) - head} bytes, expected {4 * count}", head)
    return np.frombuffer(raw, dtype="<f4", count=count, offset=head).reshape(dims).astype(np.float32)


# ---------------------------------------------------------------------------


def center_crop(clip, h, w) -> Clip:
    """Spatial crop with offsets floor((H-h)/2), floor((W-w)/2)."""
    if h < 1 or w < 1 or h > clip.height or w > clip.width:
        raise DimensionError(f"cannot crop {clip.height}x{clip.width} to {h}x{w}")
    top = (clip.height - h) // 2
    left = (clip.width - w) // 2
    if (top, left, h, w) == (0, 0, clip.height, clip.width):
        return clip
    return clip.replace(clip.data[:, top : top + h, left : left + w])


@dataclass
class ManifestEntry:
    path: str
    label: str
    pair_id: Optional[str] = None
    tags: List[str] = field(default_factory=list)

    @property
    def is_fake(self):
        return self.label == "fake"


@dataclass
class DatasetManifest:
    entries: List[ManifestEntry]
    root: Path = Path(".")

    def __post_init__(self):
        self.validate()

    def validate(self):
        seen = set()
        pairs = {}
        for e in self.entries:
            if e.label not in ("real", "fake"):
                raise FormatError(f"entry {e.path!r}: label must be 'real' or 'fake', got {e.label!r}")
            if e.path in seen:
                raise FormatError(f"duplicate manifest path {e.path!r}")
            seen.add(e.path)
            if e.pair_id is not None:
                counts = pairs.setdefault(e.pair_id, [0, 0])
                counts[e.is_fake] += 1
        for pid, (n_real, n_fake) in pairs.items():
            if n_real != 1 or n_fake < 1:
                raise FormatError(f"pair {pid!r} has {n_real} real and {n_fake} fake entries")

    def resolve(self, entry):
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def pairs(self):
        """Map pair_id -> (real entry, [fake entries])."""
        out = {}
        for e in self.entries:
            if e.pair_id is None:
                continue
            slot = out.setdefault(e.pair_id, [None, []])
            if e.is_fake:
                slot[1].append(e)
            else:
                slot[0] = e
        return {k: (v[0], v[1]) for k, v in out.items()}

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            items = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest is not valid JSON: {exc}", exc.pos) from None
        if not isinstance(items, list):
            raise FormatError("manifest must be a JSON array")
        entries = []
        for item in items:
            try:
                entries.append(
                    ManifestEntry(
                        path=item["path"],
                        label=item["label"],
                        pair_id=item.get("pair_id"),
                        tags=list(item.get("tags") or []),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise FormatError(f"bad manifest entry {item!r}: {exc}") from None
        return cls(entries, root=path.parent)

    def save(self, path):
        items = [{"path": e.path, "label": e.label, "pair_id": e.pair_id, "tags": list(e.tags)} for e in self.entries]
        Path(path).write_text(json.dumps(items, indent=2) + "\n")
