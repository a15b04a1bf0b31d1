"""Multilevel fully separable Haar wavelet transform (FSWT).

The full 1D multilevel decomposition runs along every row, then along
every column, which gives an (L+1) x (L+1) grid of anisotropic bands
rather than the usual LL/LH/HL/HH pyramid.

Band index 0 along an axis is the coarsest approximation; index k >= 1
is the detail produced at level L-k+1, so frequency grows with the index.
Coefficients are stored packed along each axis as
``[low_L | detail_L | detail_{L-1} | ... | detail_1]``, and band (i, j) is
the corresponding rectangular window of the packed array.
"""

import json
from pathlib import Path

import numpy as np

from .errors import DimensionError, StructureError

SQRT_HALF = 1.0 / np.sqrt(2.0)
HAAR_LOW = np.array([SQRT_HALF, SQRT_HALF])
HAAR_HIGH = np.array([-SQRT_HALF, SQRT_HALF])


class OpCounter:
    """Tally of multiply-adds spent by the analysis filters."""

    def __init__(self):
        self.madds = 0


def band_scale(k, levels):
    """Downsampling exponent of band index ``k`` along one axis."""
    return levels if k == 0 else levels - k + 1


def band_bounds(n, levels):
    """Packed ``(start, stop)`` of each band index along an axis of length n."""
    bounds = [(0, n >> levels)]
    for k in range(1, levels + 1):
        s = band_scale(k, levels)
        bounds.append((n >> s, n >> (s - 1)))
    return bounds


def check_dims(height, width, levels):
    if levels < 1:
        raise DimensionError(f"levels must be >= 1, got {levels}")
    step = 2**levels
    for name, n in (("height", height), ("width", width)):
        if n % step or n == 0:
            raise DimensionError(f"{name} {n} is not a positive multiple of 2**{levels}={step}")


class SubbandGrid:
    """FSWT coefficients of one frame (or a stack of frames).

    ``packed`` has shape ``(..., H, W)``; leading axes are batch axes.
    """

    def __init__(self, packed, levels):
        packed = np.asarray(packed, dtype=np.float64)
        if packed.ndim < 2:
            raise StructureError("packed coefficients need at least 2 dims")
        try:
            check_dims(packed.shape[-2], packed.shape[-1], levels)
        except DimensionError as exc:
            raise StructureError(str(exc)) from None
        self.packed = packed
        self.levels = levels
        self._rows = band_bounds(self.height, levels)
        self._cols = band_bounds(self.width, levels)

    @property
    def height(self):
        return self.packed.shape[-2]

    @property
    def width(self):
        return self.packed.shape[-1]

    @property
    def size(self):
        return self.levels + 1

    def band_slices(self, i, j):
        r0, r1 = self._rows[i]
        c0, c1 = self._cols[j]
        return slice(r0, r1), slice(c0, c1)

    def band(self, i, j):
        rs, cs = self.band_slices(i, j)
        return self.packed[..., rs, cs]

    def bands(self):
        return [[self.band(i, j) for j in range(self.size)] for i in range(self.size)]

    def band_shape(self, i, j):
        return (self.height >> band_scale(i, self.levels), self.width >> band_scale(j, self.levels))

    def expand_mask(self, mask):
        """Broadcast an (L+1)x(L+1) band mask to a packed H x W boolean map."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.size, self.size):
            raise DimensionError(f"mask shape {mask.shape} does not match a {self.size}x{self.size} grid")
        out = np.zeros((self.height, self.width), dtype=bool)
        for i in range(self.size):
            for j in range(self.size):
                if mask[i, j]:
                    out[self.band_slices(i, j)] = True
        return out

    @classmethod
    def from_bands(cls, bands, levels, height, width):
        check_dims(height, width, levels)
        if len(bands) != levels + 1 or any(len(row) != levels + 1 for row in bands):
            raise StructureError(f"expected {levels + 1}x{levels + 1} bands")
        lead = np.asarray(bands[0][0]).shape[:-2]
        packed = np.empty(lead + (height, width))
        grid = cls(packed, levels)
        for i in range(levels + 1):
            for j in range(levels + 1):
                b = np.asarray(bands[i][j], dtype=np.float64)
                want = lead + grid.band_shape(i, j)
                if b.shape != want:
                    raise StructureError(f"band ({i},{j}) has shape {b.shape}, expected {want}")
                rs, cs = grid.band_slices(i, j)
                packed[..., rs, cs] = b
        return grid

    def copy(self):
        return SubbandGrid(self.packed.copy(), self.levels)


def _analyze_axis(x, axis, levels, counter=None):
    x = np.moveaxis(x, axis, -1)
    out = np.empty_like(x)
    low = x
    end = x.shape[-1]
    for _ in range(levels):
        even, odd = low[..., 0::2], low[..., 1::2]
        half = end // 2
        out[..., half:end] = HAAR_HIGH[0] * even + HAAR_HIGH[1] * odd
        low = HAAR_LOW[0] * even + HAAR_LOW[1] * odd
        if counter is not None:
            # two output samples per input pair, two taps each
            counter.madds += 2 * even.size * 2
        end = half
    out[..., :end] = low
    return np.moveaxis(out, -1, axis)


def _synthesize_axis(c, axis, levels):
    c = np.moveaxis(c, axis, -1)
    n = c.shape[-1]
    low = c[..., : n >> levels]
    for lev in range(levels, 0, -1):
        m = n >> lev
        high = c[..., m : 2 * m]
        rec = np.empty(c.shape[:-1] + (2 * m,))
        rec[..., 0::2] = HAAR_LOW[0] * low + HAAR_HIGH[0] * high
        rec[..., 1::2] = HAAR_LOW[1] * low + HAAR_HIGH[1] * high
        low = rec
    return np.moveaxis(low, -1, axis)


def fswt_forward(plane, levels=3, counter=None) -> SubbandGrid:
    """Forward FSWT of an ``(..., H, W)`` array; rows first, then columns."""
    x = np.asarray(plane, dtype=np.float64)
    if x.ndim < 2:
        raise DimensionError("input must be at least 2-D")
    check_dims(x.shape[-2], x.shape[-1], levels)
    x = _analyze_axis(x, -1, levels, counter)
    x = _analyze_axis(x, -2, levels, counter)
    return SubbandGrid(x, levels)


def fswt_inverse(grid: SubbandGrid) -> np.ndarray:
    """Inverse FSWT via stride-2 transposed convolutions, columns first."""
    if not isinstance(grid, SubbandGrid):
        raise StructureError(f"expected a SubbandGrid, got {type(grid).__name__}")
    x = _synthesize_axis(grid.packed, -2, grid.levels)
    return _synthesize_axis(x, -1, grid.levels)


def fswt_forward_naive(plane, levels=3) -> SubbandGrid:
    """Loop-by-loop reference transform for a single 2-D plane.

    Deliberately slow and independent of :func:`fswt_forward`; it exists to
    cross-check the vectorized path.
    """
    rows = [[float(v) for v in r] for r in np.asarray(plane, dtype=np.float64)]
    height = len(rows)
    width = len(rows[0]) if rows else 0
    check_dims(height, width, levels)
    s = 1.0 / 2.0**0.5

    def split(seq):
        low = list(seq)
        details = []
        for _ in range(levels):
            nxt, det = [], []
            for t in range(len(low) // 2):
                a, b = low[2 * t], low[2 * t + 1]
                nxt.append(s * a + s * b)
                det.append(-s * a + s * b)
            details.append(det)
            low = nxt
        return [low] + details[::-1]

    row_pieces = [split(r) for r in rows]
    bands = [[None] * (levels + 1) for _ in range(levels + 1)]
    for j in range(levels + 1):
        n_cols = len(row_pieces[0][j])
        col_pieces = [split([row_pieces[r][j][c] for r in range(height)]) for c in range(n_cols)]
        for i in range(levels + 1):
            n_rows = len(col_pieces[0][i])
            bands[i][j] = np.array([[col_pieces[c][i][r] for c in range(n_cols)] for r in range(n_rows)])
    return SubbandGrid.from_bands(bands, levels, height, width)


def band_energies(grid: SubbandGrid) -> np.ndarray:
    """Sum of squared coefficients per band, shape ``(..., L+1, L+1)``."""
    n = grid.size
    out = np.empty(grid.packed.shape[:-2] + (n, n))
    for i in range(n):
        for j in range(n):
            b = grid.band(i, j)
            out[..., i, j] = np.einsum("...ij,...ij->...", b, b)
    return out


def save_grid(grid: SubbandGrid, directory):
    """Write each band as a WVT1 tensor plus an ``index.json``."""
    from .videoio import save_tensor

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i in range(grid.size):
        row = []
        for j in range(grid.size):
            name = f"band_{i}_{j}.wvt"
            save_tensor(grid.band(i, j), directory / name)
            row.append(name)
        files.append(row)
    index = {
        "levels": grid.levels,
        "H": grid.height,
        "W": grid.width,
        "batch": list(grid.packed.shape[:-2]),
        "bands": files,
    }
    (directory / "index.json").write_text(json.dumps(index, indent=2) + "\n")


def load_grid(directory) -> SubbandGrid:
    from .videoio import load_tensor

    directory = Path(directory)
    try:
        index = json.loads((directory / "index.json").read_text())
        levels, height, width = index["levels"], index["H"], index["W"]
        names = index["bands"]
    except (OSError, ValueError, KeyError) as exc:
        raise StructureError(f"bad grid index in {directory}: {exc}") from None
    bands = [[load_tensor(directory / name) for name in row] for row in names]
    return SubbandGrid.from_bands(bands, levels, height, width)
