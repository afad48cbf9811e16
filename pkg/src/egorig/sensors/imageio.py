"""PFM / PGM writers and readers for the rendered buffers."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def write_pfm(path, image) -> None:
    """Little-endian PFM (scale -1.0). 2-D arrays -> ``Pf``, (H, W, 3) -> ``PF``.

    Rows are stored bottom-to-top as the format requires.
    """
    img = np.asarray(image, dtype="<f4")
    if img.ndim == 2:
        tag = b"Pf"
    elif img.ndim == 3 and img.shape[2] == 3:
        tag = b"PF"
    else:
        raise ValueError(f"PFM needs (H, W) or (H, W, 3) data, got {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(tag + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(img[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) < 4:
        raise ValueError(f"{path}: truncated PFM header")
    tag, dims, scale, payload = parts
    if tag == b"PF":
        channels = 3
    elif tag == b"Pf":
        channels = 1
    else:
        raise ValueError(f"{path}: not a PFM file")
    w, h = (int(x) for x in dims.split())
    endian = "<" if float(scale) < 0 else ">"
    arr = np.frombuffer(payload, dtype=endian + "f4", count=w * h * channels)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return arr.reshape(shape)[::-1].astype(np.float32)


def write_pgm(path, labels) -> None:
    """Binary 8-bit PGM (P5); label ids are written as grey values."""
    lab = np.asarray(labels)
    if lab.ndim != 2:
        raise ValueError("PGM needs a 2-D array")
    if lab.size and (lab.min() < 0 or lab.max() > 255):
        raise ValueError("semantic ids must fit in 8 bits for PGM output")
    h, w = lab.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(lab.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit PGM not supported")
    pos += 1
    return np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w).copy()
