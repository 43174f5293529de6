"""Escape-time images of the Newton map, plus plain CSV/PNM writers."""
from __future__ import annotations

import colorsys
import csv
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .chain import CalibratedBounds, ChainConfig
from .dynamics import Classification, ClassifyLimits, Kind, classify

RGB = tuple[int, int, int]


def default_palette(c: Classification) -> RGB:
    if c.kind is Kind.ESCAPING:
        # light blue for immediate escape, darkening with the escape step
        t = min(c.k, 24) / 24.0
        return (int(round(40 * (1 - t))), int(round(160 * (1 - t) + 20 * t)), int(round(255 - 120 * t)))
    if c.kind is Kind.CONVERGED:
        root = c.root if c.root is not None else 0j
        key = f"{round(root.real / 1e-6)}:{round(root.imag / 1e-6)}".encode()
        hue = int.from_bytes(hashlib.blake2b(key, digest_size=4).digest(), "big") / 2**32
        r, g, b = colorsys.hsv_to_rgb(hue, 0.75, 0.95)
        return (int(round(255 * r)), int(round(255 * g)), int(round(255 * b)))
    return (0, 0, 0)


@dataclass(frozen=True)
class GridSpec:
    center: complex
    width: float
    height: float
    nx: int
    ny: int
    limits: ClassifyLimits
    palette: Callable[[Classification], RGB] = field(default=default_palette, compare=False)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs nx, ny >= 1")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("grid width and height must be positive")

    def pixel(self, i: int, j: int) -> complex:
        """Centre of column i, row j; row 0 is the top."""
        x = ((i + 0.5) / self.nx - 0.5) * self.width
        y = (0.5 - (j + 0.5) / self.ny) * self.height
        return self.center + complex(x, y)

    def pixels(self) -> np.ndarray:
        i = (np.arange(self.nx) + 0.5) / self.nx - 0.5
        j = 0.5 - (np.arange(self.ny) + 0.5) / self.ny
        return self.center + (i[None, :] * self.width + 1j * j[:, None] * self.height)


@dataclass
class Image:
    nx: int
    ny: int
    rgb: np.ndarray                 # (ny, nx, 3) uint8
    kinds: np.ndarray               # (ny, nx) object array of Classification

    def counts(self) -> dict:
        out = {k.value: 0 for k in Kind}
        for c in self.kinds.flat:
            out[c.kind.value] += 1
        return out


# worker-side state: the chain is shipped once per process, not once per tile
_WORKER: dict = {}


def _init_worker(chain, bounds, grid):
    _WORKER.update(chain=chain, bounds=bounds, grid=grid)


def _classify_span(span: tuple[int, int]):
    chain, bounds, grid = _WORKER["chain"], _WORKER["bounds"], _WORKER["grid"]
    return _run_span(chain, bounds, grid, span)


def _run_span(chain, bounds, grid: GridSpec, span: tuple[int, int]) -> list:
    lo, hi = span
    out = []
    for idx in range(lo, hi):
        j, i = divmod(idx, grid.nx)
        out.append(classify(chain, bounds, grid.pixel(i, j), grid.limits))
    return out


def tile_spans(n_pixels: int, tiles: int) -> list[tuple[int, int]]:
    tiles = max(1, min(int(tiles), n_pixels))
    edges = np.linspace(0, n_pixels, tiles + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def render_grid(chain: ChainConfig, bounds: CalibratedBounds, grid: GridSpec, tiles: int = 1,
                workers: int = 1) -> Image:
    """Classify every pixel centre.  Pixels are independent, so the picture
    does not depend on how they are split into tiles or spread over workers."""
    n = grid.nx * grid.ny
    spans = tile_spans(n, tiles)
    if workers == 0:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(spans) == 1:
        parts = [_run_span(chain, bounds, grid, s) for s in spans]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(chain, bounds, grid)) as pool:
            parts = list(pool.map(_classify_span, spans))
    flat = [c for part in parts for c in part]
    kinds = np.empty(n, dtype=object)
    kinds[:] = flat
    kinds = kinds.reshape(grid.ny, grid.nx)
    rgb = np.array([grid.palette(c) for c in flat], dtype=np.uint8).reshape(grid.ny, grid.nx, 3)
    return Image(grid.nx, grid.ny, rgb, kinds)


def pnm_bytes(image: Image) -> bytes:
    rgb = np.ascontiguousarray(image.rgb, dtype=np.uint8)
    return f"P6\n{image.nx} {image.ny}\n255\n".encode("ascii") + rgb.tobytes()


def write_pnm(image: Image, path) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(pnm_bytes(image))
    except OSError as exc:
        raise OSError(f"cannot write image to {path}: {exc}") from exc


def read_pnm(path) -> np.ndarray:
    data = open(path, "rb").read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError(f"{path}: not a binary PNM")
    nx, ny = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(ny, nx, 3)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    return str(v)


def write_csv(rows: Iterable[Sequence], path, header: Optional[Sequence[str]] = None) -> None:
    """Floats are written with repr, which round-trips exactly."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if header is not None:
                w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def reference_grid(chain: ChainConfig, bounds: CalibratedBounds, nx: int = 512, ny: int = 512,
                   width: Optional[float] = None, k_max: int = 32) -> GridSpec:
    """Square window on the spine of U at radius 2.5 r1."""
    from .geometry import spiral_point
    r = 2.5 * bounds.r1
    center = spiral_point(r, chain.params.c)
    w = width if width is not None else 40.0
    return GridSpec(center, w, w * ny / nx, nx, ny, ClassifyLimits.defaults(bounds, k_max))
