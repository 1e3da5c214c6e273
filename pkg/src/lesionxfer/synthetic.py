"""Synthetic image sets for desk-scale experiments and toy CLI runs.

Shapes are rendered with 2x supersampling onto a noisy, unevenly lit
background. The pretext set uses three shape classes in random tints; the
lesion set draws a brownish blob on a skin-toned background whose outline
depends on the diagnosis (nevus: disk, melanoma: plus, seborrheic
keratosis: square).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import Dataset, Diagnosis, LesionRecord, Sex, write_ground_truth, write_metadata
from .imageproc import write_pnm
from .nn import Rng

SHAPES = ("disk", "square", "plus")
SHAPE_OF = {Diagnosis.NEVUS: "disk", Diagnosis.MELANOMA: "plus", Diagnosis.SEBORRHEIC_KERATOSIS: "square"}


def shape_mask(kind, size, cx, cy, radius, angle=0.0, supersample=2):
    """Anti-aliased coverage in [0, 1] of a shape centred at (cx, cy)."""
    n = size * supersample
    coords = (np.arange(n) + 0.5) / supersample
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    dx, dy = xx - cx, yy - cy
    ca, sa = np.cos(angle), np.sin(angle)
    u, v = ca * dx + sa * dy, -sa * dx + ca * dy
    if kind == "disk":
        inside = u * u + v * v < radius * radius
    elif kind == "square":
        inside = np.maximum(np.abs(u), np.abs(v)) < radius * 0.85
    elif kind == "plus":
        arm = radius / 3.0
        inside = ((np.abs(u) < arm) & (np.abs(v) < radius)) | ((np.abs(v) < arm) & (np.abs(u) < radius))
    else:
        raise ValueError(f"unknown shape {kind!r}")
    return inside.reshape(size, supersample, size, supersample).mean(axis=(1, 3))


def _background(size, rng: Rng, base, noise):
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    gx, gy = rng.uniform(2) * 2 - 1
    light = 1.0 + 0.15 * (gx * (xx - 0.5) + gy * (yy - 0.5))
    img = np.asarray(base, dtype=np.float64)[None, None, :] * light[:, :, None]
    return img + noise * (rng.uniform((size, size, 3)) * 2 - 1)


def render(kind, size, rng: Rng, fg, bg, noise=20.0, radius_range=(0.22, 0.34), jitter=0.12):
    """One uint8 RGB image of a ``kind`` shape."""
    r = size * (radius_range[0] + rng.uniform() * (radius_range[1] - radius_range[0]))
    cx = size * (0.5 + jitter * (rng.uniform() * 2 - 1))
    cy = size * (0.5 + jitter * (rng.uniform() * 2 - 1))
    angle = rng.uniform() * np.pi / 2
    m = shape_mask(kind, size, cx, cy, r, angle)[:, :, None]
    img = _background(size, rng, bg, noise)
    img = img * (1 - m) + np.asarray(fg, dtype=np.float64)[None, None, :] * m
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def pretext_images(n, size, seed):
    """``n`` images of 3 shape classes, dark shape on a lighter random tint;
    returns (images, classes)."""
    rng = Rng(seed).fork("pretext-data")
    images, classes = [], []
    for i in range(n):
        r = rng.fork(i)
        cls = i % len(SHAPES)
        bg = 150 + 100 * r.uniform(3)
        fg = bg * (0.2 + 0.4 * r.uniform())
        images.append(render(SHAPES[cls], size, r, fg, bg, radius_range=(0.15, 0.38), jitter=0.2))
        classes.append(cls)
    order = rng.fork("order").permutation(n)
    return np.stack(images)[order], np.asarray(classes)[order]


def lesion_image(diagnosis, size, rng: Rng, noise=28.0):
    skin = np.array([224.0, 180.0, 150.0]) * (0.85 + 0.15 * rng.uniform())
    lesion = np.array([120.0, 80.0, 60.0]) * (0.7 + 0.5 * rng.uniform())
    return render(SHAPE_OF[Diagnosis(diagnosis)], size, rng, lesion, skin, noise=noise)


def lesion_records(n, prevalence, seed, positive=Diagnosis.MELANOMA, other_prevalence=0.0,
                   other=Diagnosis.SEBORRHEIC_KERATOSIS):
    """Diagnoses and clinical metadata for ``n`` synthetic lesions.

    Exactly ``round(prevalence * n)`` records carry ``positive`` and
    ``round(other_prevalence * n)`` carry ``other``; the rest are nevi.
    """
    rng = Rng(seed).fork("records")
    n_pos = int(round(prevalence * n))
    n_other = int(round(other_prevalence * n))
    diags = [positive] * n_pos + [other] * n_other + [Diagnosis.NEVUS] * (n - n_pos - n_other)
    diags = rng.fork("diagnosis").shuffle(diags)
    width = len(str(n - 1))
    out = []
    meta = rng.fork("metadata")
    for i, d in enumerate(diags):
        u = meta.uniform(3)
        age = None if u[0] < 0.05 else float(round(25 + 50 * u[1] + (10 if d == Diagnosis.MELANOMA else 0)))
        sex = (Sex.MALE, Sex.FEMALE, Sex.UNKNOWN)[0 if u[2] < 0.48 else 1 if u[2] < 0.96 else 2]
        out.append((f"syn_{i:0{width}d}", d, age, sex))
    return out


def lesion_dataset(n, prevalence, size, seed, **kw):
    """In-memory (records, uint8 images) for a synthetic lesion set."""
    rows = lesion_records(n, prevalence, seed, **kw)
    rng = Rng(seed).fork("pixels")
    records, images = [], []
    for image_id, d, age, sex in rows:
        records.append(LesionRecord(image_id, Path(f"{image_id}.ppm"), d, age, sex))
        images.append(lesion_image(d, size, rng.fork(image_id)))
    return Dataset(tuple(records)), dict(zip((r.image_id for r in records), images))


def write_toy_dataset(root, n=40, size=40, seed=0, melanoma=0.25, seborrheic_keratosis=0.2):
    """Write ``images/*.ppm``, ``ground_truth.csv`` and ``metadata.csv`` under
    ``root``; returns the dataset."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    dataset, images = lesion_dataset(n, melanoma, size, seed, other_prevalence=seborrheic_keratosis)
    for image_id, img in images.items():
        write_pnm(root / "images" / f"{image_id}.ppm", img)
    write_ground_truth(dataset, root / "ground_truth.csv")
    write_metadata(dataset, root / "metadata.csv")
    return dataset
