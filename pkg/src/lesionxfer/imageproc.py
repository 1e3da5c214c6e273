"""Image decoding and the resize / luma / scale / mean-subtract pipeline.

Images are numpy arrays of shape (H, W, C), C in {1, 3}. Raw images hold
values in [0, 255]; preprocessed tensors are float32 in [0, 1] (before any
mean subtraction).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError

LUMA = (0.298839, 0.586811, 0.114350)


@dataclass(frozen=True)
class PreprocessProfile:
    name: str
    target_size: int
    output_channels: int
    mean_subtract: bool = False
    color: bool = False

    def __post_init__(self):
        if self.target_size <= 0:
            raise ValueError("target_size must be positive")
        if self.output_channels not in (1, 3):
            raise ValueError("output_channels must be 1 or 3")
        if self.color and self.output_channels != 3:
            raise ValueError("colour passthrough needs 3 output channels")

    def sized(self, target_size):
        return PreprocessProfile(self.name, target_size, self.output_channels, self.mean_subtract, self.color)


SCRATCH = PreprocessProfile("scratch", 128, 1)
TRANSFER = PreprocessProfile("transfer", 299, 3)
PROFILES = {"scratch": SCRATCH, "transfer": TRANSFER}


def _as_image(image):
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3:
        raise ShapeError(f"expected an HxWxC image, got shape {image.shape}")
    return image


def to_luma(image):
    """Weighted sum of R, G, B in float64; no rounding."""
    image = _as_image(image)
    if image.shape[2] != 3:
        raise ShapeError(f"luma conversion needs 3 channels, got {image.shape[2]}")
    rgb = image.astype(np.float64)
    r, g, b = LUMA
    return (r * rgb[:, :, 0] + g * rgb[:, :, 1] + b * rgb[:, :, 2])[:, :, None]


def replicate_channels(image):
    image = _as_image(image)
    if image.shape[2] != 1:
        raise ShapeError(f"channel replication needs 1 channel, got {image.shape[2]}")
    return np.repeat(image, 3, axis=2)


def _axis_weights(n_in, n_out):
    # pixel-centre alignment, edge clamp
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize(image, target: int):
    """Bilinear resize to ``target`` x ``target`` (aspect ratio not kept)."""
    image = _as_image(image)
    if target < 1:
        raise ValueError("target size must be >= 1")
    h, w, _ = image.shape
    if (h, w) == (target, target):
        return image.copy()
    x = image.astype(np.float64)
    r0, r1, wr = _axis_weights(h, target)
    c0, c1, wc = _axis_weights(w, target)
    rows = x[r0] + wr[:, None, None] * (x[r1] - x[r0])
    return rows[:, c0] + wc[None, :, None] * (rows[:, c1] - rows[:, c0])


@dataclass(frozen=True)
class GlobalMean:
    values: tuple[float, ...]

    def __post_init__(self):
        if not all(np.isfinite(self.values)):
            raise DataError("global mean must be finite")

    def as_array(self):
        return np.asarray(self.values, dtype=np.float64)


def compute_global_mean(images) -> GlobalMean:
    """Per-channel mean over every pixel of every image."""
    images = [_as_image(im) for im in images]
    if not images:
        raise DataError("global mean of no images is undefined")
    channels = {im.shape[2] for im in images}
    if len(channels) != 1:
        raise ShapeError(f"images have mixed channel counts {sorted(channels)}")
    total = np.zeros(channels.pop(), dtype=np.float64)
    count = 0
    for im in images:
        total += im.reshape(-1, im.shape[2]).sum(axis=0, dtype=np.float64)
        count += im.shape[0] * im.shape[1]
    return GlobalMean(tuple(float(v) for v in total / count))


# decoding ------------------------------------------------------------------


def _pnm_tokens(data, count, pos):
    out = []
    while len(out) < count:
        while pos < len(data) and chr(data[pos]).isspace():
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            while pos < len(data) and data[pos] not in (10, 13):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not chr(data[pos]).isspace() and data[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise DataError("truncated PNM header")
        out.append(data[start:pos].decode("ascii"))
    return out, pos


def decode_pnm(data: bytes, name="<bytes>"):
    """Binary PGM (P5) / PPM (P6) with maxval 255."""
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise DataError(f"{name}: not a binary PGM/PPM file")
    try:
        (w, h, maxval), pos = _pnm_tokens(data, 3, 2)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise DataError(f"{name}: malformed PNM header") from None
    if maxval != 255:
        raise DataError(f"{name}: only maxval 255 is supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    c = 1 if magic == b"P5" else 3
    payload = data[pos : pos + w * h * c]
    if len(payload) != w * h * c:
        raise DataError(f"{name}: truncated pixel data")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, c).copy()


def encode_pnm(image) -> bytes:
    image = _as_image(image)
    if image.dtype != np.uint8:
        image = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    h, w, c = image.shape
    if c not in (1, 3):
        raise ShapeError("PNM holds 1 or 3 channels")
    magic = "P5" if c == 1 else "P6"
    return f"{magic}\n{w} {h}\n255\n".encode("ascii") + image.tobytes()


def write_pnm(path, image):
    Path(path).write_bytes(encode_pnm(image))


def decode_image(path):
    """Decode to a uint8 (H, W, 1 | 3) array. PGM/PPM natively, others via Pillow."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: cannot read image ({exc.strerror})") from None
    if data[:2] in (b"P5", b"P6"):
        return decode_pnm(data, str(path))
    try:
        from PIL import Image, UnidentifiedImageError
    except ImportError:  # pragma: no cover
        raise DataError(f"{path}: no codec available for this format") from None
    import io

    try:
        with Image.open(io.BytesIO(data)) as im:
            im = im.convert("L" if im.mode in ("L", "I;16", "I") else "RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DataError(f"{path}: cannot decode image ({exc})") from None
    return _as_image(arr)


# pipeline ------------------------------------------------------------------


def preprocess_array(image, profile: PreprocessProfile, mean: GlobalMean | None = None):
    """resize -> luma (unless colour passthrough) -> /255 -> replicate -> mean.

    Resize and luma are both linear, so their order only moves rounding in
    the last bits; resizing first is cheaper on large images.
    """
    image = _as_image(image)
    x = resize(image, profile.target_size)
    if profile.color:
        if x.shape[2] == 1:
            x = replicate_channels(x)
    elif x.shape[2] == 3:
        x = to_luma(x)
    elif x.shape[2] != 1:
        raise ShapeError(f"unsupported channel count {x.shape[2]}")
    x = x / 255.0
    if profile.output_channels == 3 and x.shape[2] == 1:
        x = replicate_channels(x)
    if profile.mean_subtract:
        if mean is None:
            raise DataError(f"profile {profile.name!r} subtracts a global mean but none was given")
        m = mean.as_array()
        if m.size not in (1, x.shape[2]):
            raise ShapeError(f"global mean has {m.size} channels, image {x.shape[2]}")
        x = x - m
    return x.astype(np.float32)


def preprocess(record, profile: PreprocessProfile, mean: GlobalMean | None = None):
    path = record.image_path if hasattr(record, "image_path") else record
    return preprocess_array(decode_image(path), profile, mean)


def preprocess_many(records, profile, mean=None, workers=1):
    """Order-preserving map; output is independent of ``workers``."""
    if workers <= 1:
        return [preprocess(r, profile, mean) for r in records]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda r: preprocess(r, profile, mean), records))
