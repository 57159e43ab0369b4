"""Binary PPM (P6) and PGM (P5) frames."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    pass


@dataclass
class Frame:
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim == 2:
            p = np.repeat(p[:, :, None], 3, axis=2)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] * p.shape[1] == 0:
            raise ValueError("frame pixels must be a non-empty (H, W, 3) array")
        self.pixels = np.ascontiguousarray(p, dtype=np.uint8)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def luma(self) -> np.ndarray:
        p = self.pixels.astype(np.float64)
        return 0.299 * p[..., 0] + 0.587 * p[..., 1] + 0.114 * p[..., 2]


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def decode_pnm(data: bytes) -> Frame:
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if not m:
            raise ImageFormatError("truncated PNM header")
        fields.append(m.group(1))
        pos = m.end()
    magic, w, h, maxval = fields
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported image type {magic!r}; only P5/P6")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise ImageFormatError("non-integer PNM header field") from None
    if w <= 0 or h <= 0 or not 0 < maxval < 256:
        raise ImageFormatError("only 8-bit PNM images with positive size are supported")
    pos += 1  # single whitespace byte before raster
    channels = 3 if magic == b"P6" else 1
    size = w * h * channels
    raster = data[pos : pos + size]
    if len(raster) != size:
        raise ImageFormatError("truncated PNM raster")
    arr = np.frombuffer(raster, np.uint8).reshape(h, w, channels) if channels == 3 else \
        np.frombuffer(raster, np.uint8).reshape(h, w)
    if maxval != 255:
        arr = np.round(arr.astype(np.float64) * (255.0 / maxval)).astype(np.uint8)
    return Frame(arr)


def read_pnm(path: str | Path) -> Frame:
    return decode_pnm(Path(path).read_bytes())


def encode_pnm(frame: Frame | np.ndarray, gray: bool = False) -> bytes:
    frame = frame if isinstance(frame, Frame) else Frame(frame)
    if gray:
        body = np.round(frame.luma()).astype(np.uint8)
        return f"P5\n{frame.width} {frame.height}\n255\n".encode() + body.tobytes()
    return f"P6\n{frame.width} {frame.height}\n255\n".encode() + frame.pixels.tobytes()


def write_pnm(path: str | Path, frame: Frame | np.ndarray, gray: bool = False) -> None:
    Path(path).write_bytes(encode_pnm(frame, gray))
