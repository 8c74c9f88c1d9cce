"""File formats: 8-bit PGM images, PFM depth maps, JSON sidecars."""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .camera import CameraPose, Intrinsics
from .errors import DepthMotionError
from .stillbox import Frame


class FormatError(DepthMotionError):
    category = "io"


def write_pgm(path, image: np.ndarray) -> None:
    """Write a [0, 1] float image (or uint8) as binary P5."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 file; returns uint8 array."""
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM is supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=m.end())
    return raster.reshape(h, w).copy()


def write_pfm(path, depth: np.ndarray) -> None:
    """Single-channel little-endian PFM (rows stored bottom-up)."""
    d = np.asarray(depth, dtype="<f4")
    if d.ndim != 2:
        raise FormatError("PFM writer expects a 2D array")
    h, w = d.shape
    with open(path, "wb") as f:
        f.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(np.ascontiguousarray(np.flipud(d)).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise FormatError(f"{path}: not a PFM file")
        channels = 3 if header == b"PF" else 1
        dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(), dtype=dtype, count=w * h * channels)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return np.flipud(data.reshape(shape)).astype(np.float32)


def depth_to_pgm(depth: np.ndarray, cap: float = 100.0, near: float = 1.0) -> np.ndarray:
    """Inverse-depth gray levels: white at ``near``, black at ``cap`` and beyond."""
    inv = 1.0 / np.clip(np.asarray(depth, dtype=np.float64), near, cap)
    return np.round(255 * (inv - 1 / cap) / (1 / near - 1 / cap)).astype(np.uint8)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def intrinsics_to_dict(k: Intrinsics) -> dict:
    return {"focal_px": k.focal_px, "principal_point": list(k.principal_point), "width": k.width, "height": k.height}


def intrinsics_from_dict(d: dict) -> Intrinsics:
    return Intrinsics(d["focal_px"], tuple(d["principal_point"]), d["width"], d["height"])


def frame_stem(k: int) -> str:
    return f"{k:03d}"


def save_frame(directory, k: int, frame: Frame, intrinsics: Intrinsics) -> None:
    directory = Path(directory)
    stem = frame_stem(k)
    write_pgm(directory / f"{stem}.pgm", frame.image)
    write_pfm(directory / f"{stem}.pfm", frame.gt_depth)
    write_json(
        directory / f"{stem}.json",
        {"timestamp": frame.timestamp, "pose": frame.pose.to_dict(), "intrinsics": intrinsics_to_dict(intrinsics)},
    )


def load_frame(directory, k: int) -> tuple[Frame, Intrinsics]:
    directory = Path(directory)
    stem = frame_stem(k)
    try:
        meta = read_json(directory / f"{stem}.json")
        image = read_pgm(directory / f"{stem}.pgm").astype(np.float64) / 255.0
        depth = read_pfm(directory / f"{stem}.pfm").astype(np.float64)
    except OSError as e:
        raise FormatError(f"cannot read frame {stem} in {directory}: {e}") from e
    frame = Frame(image, depth, meta["timestamp"], CameraPose.from_dict(meta["pose"]))
    return frame, intrinsics_from_dict(meta["intrinsics"])
