"""Synthetic detector frames and bright-spot counting.

Each detected electron shows up as a Gaussian spot on a noisy 16-bit frame.
Counting thresholds the frame and counts 8-connected regions above a minimum
area. Overlapping spots merge into one region; that undercount is the
defined behaviour, there is no deblending.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
from scipy import ndimage

from .histogram import CountHistogram

_EIGHT = np.ones((3, 3), dtype=bool)
_FRAME_NAME = re.compile(r"^frame_(\d+)\.pgm$")


@dataclass(frozen=True)
class SpotModel:
    """Spot shape, noise and the counting threshold.

    The threshold is absolute and must clear the noise floor
    (``baseline + 5 * noise_sigma``).
    """

    sigma_px: float = 1.5
    amplitude_range: tuple = (2000.0, 4000.0)
    noise_sigma: float = 20.0
    threshold: float = 500.0
    min_area_px: int = 3
    baseline: float = 100.0

    def __post_init__(self):
        lo, hi = self.amplitude_range
        if not self.sigma_px > 0:
            raise ValueError("sigma_px must be positive")
        if not 0 < lo <= hi:
            raise ValueError("amplitude_range must be positive and ordered")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.threshold < self.baseline + 5.0 * self.noise_sigma:
            raise ValueError("threshold must sit at least 5 noise sigmas above the baseline")
        if self.min_area_px < 1:
            raise ValueError("min_area_px must be positive")


@dataclass(frozen=True)
class Frame:
    """One detector readout; ``pixels`` has shape (height, width), dtype uint16."""

    pixels: np.ndarray
    pulse_index: int = 0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError("pixels must be 2-D")
        object.__setattr__(self, "pixels", px.astype(np.uint16, copy=False))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def from_flat(cls, width: int, height: int, flat, pulse_index: int = 0) -> "Frame":
        flat = np.asarray(flat)
        if flat.size != width * height:
            raise ValueError("pixel count does not match width * height")
        return cls(flat.reshape(height, width), pulse_index)


class FrameError(ValueError):
    pass


def _place_spots(count, width, height, rng, min_separation, margin, max_tries=200):
    if min_separation is None or count < 2:
        xs = rng.uniform(margin, width - margin, count)
        ys = rng.uniform(margin, height - margin, count)
        return np.column_stack([xs, ys])
    pts = np.empty((0, 2))
    sep2 = min_separation**2
    while pts.shape[0] < count:
        for _ in range(max_tries):
            p = rng.uniform([margin, margin], [width - margin, height - margin])
            if pts.shape[0] == 0 or np.min(((pts - p) ** 2).sum(axis=1)) >= sep2:
                pts = np.vstack([pts, p])
                break
        else:
            raise FrameError(
                f"could not place {count} spots {min_separation:g}px apart on {width}x{height}"
            )
    return pts


def generate_frame(count: int, model: SpotModel, geometry=(256, 256),
                   rng: Optional[np.random.Generator] = None, pulse_index: int = 0,
                   min_separation: Optional[float] = None) -> Frame:
    """Render ``count`` Gaussian spots at random positions plus Gaussian noise.

    ``geometry`` is (width, height). ``min_separation`` (pixels) enforces a
    minimum distance between spot centres; without it spots may overlap.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = np.random.default_rng() if rng is None else rng
    width, height = int(geometry[0]), int(geometry[1])
    img = np.full((height, width), model.baseline, dtype=float)
    if model.noise_sigma > 0:
        img += rng.normal(0.0, model.noise_sigma, img.shape)
    if count:
        margin = min(2.0 * model.sigma_px, 0.25 * min(width, height))
        pts = _place_spots(count, width, height, rng, min_separation, margin)
        amps = rng.uniform(*model.amplitude_range, size=count)
        r = int(math.ceil(5.0 * model.sigma_px))
        inv = 1.0 / (2.0 * model.sigma_px**2)
        for (x, y), a in zip(pts, amps):
            x0, x1 = max(0, int(x) - r), min(width, int(x) + r + 1)
            y0, y1 = max(0, int(y) - r), min(height, int(y) + r + 1)
            # pixel (i, j) covers [j, j+1) x [i, i+1); its centre is at +0.5
            gx = np.exp(-((np.arange(x0, x1) + 0.5 - x) ** 2) * inv)
            gy = np.exp(-((np.arange(y0, y1) + 0.5 - y) ** 2) * inv)
            img[y0:y1, x0:x1] += a * np.outer(gy, gx)
    np.clip(img, 0, 65535, out=img)
    return Frame(np.rint(img).astype(np.uint16), pulse_index)


def count_blobs(frame: Frame, model: SpotModel) -> int:
    """Number of 8-connected regions at or above threshold with enough pixels."""
    mask = frame.pixels >= model.threshold
    if not mask.any():
        return 0
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if model.min_area_px <= 1:
        return int(n)
    areas = np.bincount(labels.ravel())[1:]
    return int(np.count_nonzero(areas >= model.min_area_px))


@dataclass(frozen=True)
class StreamResult:
    histogram: CountHistogram
    skipped: tuple  # (index, reason) pairs
    per_frame: tuple  # (pulse index, count) pairs in stream order

    def summary(self) -> dict:
        from .inference import fano_factor

        h = self.histogram
        return {
            "frames": h.total_pulses,
            "mean": h.mean(),
            "fano": fano_factor(h) if h.mean() > 0 else None,
            "skipped": [{"index": i, "reason": r} for i, r in self.skipped],
        }


FrameSource = Union[Frame, str, os.PathLike]


def analyze_frame_stream(frames: Iterable[FrameSource], model: SpotModel) -> StreamResult:
    """Count every frame and aggregate into a histogram.

    Items may be :class:`Frame` objects or paths to PGM files. Items that
    cannot be read are listed in ``skipped`` with their position.
    """
    per_frame = []
    skipped = []
    for pos, item in enumerate(frames):
        try:
            frame = item if isinstance(item, Frame) else read_pgm(item)
        except (OSError, ValueError) as exc:
            skipped.append((_index_of(item, pos), str(exc)))
            continue
        per_frame.append((frame.pulse_index, count_blobs(frame, model)))
    if not per_frame:
        raise FrameError("no readable frames in stream")
    hist = CountHistogram.from_samples(np.array([c for _, c in per_frame], dtype=np.int64))
    return StreamResult(hist, tuple(skipped), tuple(per_frame))


def _index_of(item, pos: int) -> int:
    if isinstance(item, Frame):
        return item.pulse_index
    m = _FRAME_NAME.match(Path(item).name)
    return int(m.group(1)) if m else pos


# ---------------------------------------------------------------------------
# PGM (P5, 16-bit) I/O
# ---------------------------------------------------------------------------

def write_pgm(path, frame: Frame) -> None:
    """Binary PGM, maxval 65535; samples are big-endian as Netpbm requires."""
    header = f"P5\n# pulse_index={frame.pulse_index}\n{frame.width} {frame.height}\n65535\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(frame.pixels.astype(">u2").tobytes())


def _tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out, comments, i = [], [], 0
    while len(out) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i >= len(data):
            raise ValueError("truncated PGM header")
        if data[i:i + 1] == b"#":
            end = data.find(b"\n", i)
            end = len(data) if end < 0 else end
            comments.append(data[i + 1:end].decode("ascii", "replace").strip())
            i = end + 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        out.append(data[i:j])
        i = j
    return out, comments, i + 1


def read_pgm(path) -> Frame:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), comments, offset = _tokens(data, 4)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise ValueError(f"{path}: malformed PGM header") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise ValueError(f"{path}: bad PGM dimensions or maxval")
    dtype = ">u2" if maxval > 255 else "u1"
    nbytes = width * height * np.dtype(dtype).itemsize
    raster = data[offset:offset + nbytes]
    if len(raster) != nbytes:
        raise ValueError(f"{path}: raster holds {len(raster)} bytes, expected {nbytes}")
    pixels = np.frombuffer(raster, dtype=dtype).reshape(height, width).astype(np.uint16)
    index = None
    for c in comments:
        if c.startswith("pulse_index="):
            index = int(c.split("=", 1)[1])
    if index is None:
        m = _FRAME_NAME.match(Path(path).name)
        index = int(m.group(1)) if m else 0
    return Frame(pixels, index)


def frame_path(directory, index: int) -> Path:
    return Path(directory) / f"frame_{index:06d}.pgm"


def list_frames(directory) -> list[Path]:
    """Frame files in ``directory`` sorted by their numeric index."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"frame directory {d} does not exist")
    found = []
    for p in d.iterdir():
        m = _FRAME_NAME.match(p.name)
        if m:
            found.append((int(m.group(1)), p))
    return [p for _, p in sorted(found)]
