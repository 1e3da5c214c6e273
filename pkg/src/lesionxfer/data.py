"""Ground truth and clinical metadata in the public ISIC 2017 table layout.

Ground truth: ``image_id,melanoma,seborrheic_keratosis`` with ``0.0``/``1.0``
indicators. Metadata: ``image_id,age_approximate,sex``.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConsistencyError, DataError, ParseError

log = logging.getLogger(__name__)

GROUND_TRUTH_HEADER = ("image_id", "melanoma", "seborrheic_keratosis")
METADATA_HEADER = ("image_id", "age_approximate", "sex")
IMAGE_EXTENSIONS = (".ppm", ".pgm", ".png", ".jpg", ".jpeg")


class Diagnosis(str, enum.Enum):
    MELANOMA = "melanoma"
    NEVUS = "nevus"
    SEBORRHEIC_KERATOSIS = "seborrheic_keratosis"


class Sex(str, enum.Enum):
    MALE = "male"
    FEMALE = "female"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class LesionRecord:
    image_id: str
    image_path: Path
    diagnosis: Diagnosis
    age_years: float | None = None
    sex: Sex = Sex.UNKNOWN

    def __post_init__(self):
        if not self.image_id:
            raise DataError("image_id must be non-empty")
        if self.age_years is not None and not 0 <= self.age_years <= 130:
            raise DataError(f"{self.image_id}: age {self.age_years} outside [0, 130]")


@dataclass(frozen=True)
class TaskSpec:
    id: str
    positive_class: Diagnosis


TASK1 = TaskSpec("task1", Diagnosis.MELANOMA)
TASK2 = TaskSpec("task2", Diagnosis.SEBORRHEIC_KERATOSIS)
TASKS = {"task1": TASK1, "task2": TASK2}


def get_task(task_id: str) -> TaskSpec:
    try:
        return TASKS[task_id]
    except KeyError:
        raise DataError(f"unknown task {task_id!r}; expected one of {sorted(TASKS)}") from None


@dataclass(frozen=True)
class Dataset:
    records: tuple[LesionRecord, ...]
    origin: str = "train"

    def __post_init__(self):
        records = tuple(sorted(self.records, key=lambda r: r.image_id))
        seen = set()
        for r in records:
            if r.image_id in seen:
                raise DataError(f"duplicate image_id {r.image_id!r}")
            seen.add(r.image_id)
        object.__setattr__(self, "records", records)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self):
        return {r.image_id: r for r in self.records}

    def subset(self, image_ids, origin=None):
        ids = set(image_ids)
        return Dataset(tuple(r for r in self.records if r.image_id in ids), origin or self.origin)


def binary_label(record: LesionRecord, task: TaskSpec) -> int:
    return int(record.diagnosis == task.positive_class)


def labels(records, task: TaskSpec) -> list[int]:
    return [binary_label(r, task) for r in records]


def class_prevalence(dataset, task: TaskSpec) -> float:
    records = list(dataset)
    if not records:
        raise DataError("prevalence of an empty dataset is undefined")
    return sum(labels(records, task)) / len(records)


def class_counts(dataset) -> dict[Diagnosis, int]:
    counts = {d: 0 for d in Diagnosis}
    for r in dataset:
        counts[r.diagnosis] += 1
    return counts


def _rows(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    # newline="" lets csv accept both LF and CRLF
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            yield lineno, [c.strip() for c in row]


def _indicator(value, path, lineno, column):
    try:
        x = float(value)
    except ValueError:
        raise ParseError(f"{column} indicator {value!r} is not a number", path, lineno) from None
    if x not in (0.0, 1.0):
        raise ParseError(f"{column} indicator {value!r} is neither 0.0 nor 1.0", path, lineno)
    return x == 1.0


def find_image(images_dir, image_id):
    images_dir = Path(images_dir)
    for ext in IMAGE_EXTENSIONS:
        candidate = images_dir / f"{image_id}{ext}"
        if candidate.exists():
            return candidate
    return images_dir / f"{image_id}.jpg"


def load_ground_truth(path, images_dir=None, origin="train") -> Dataset:
    """Read the two-indicator table; diagnosis is nevus when both are 0."""
    path = Path(path)
    images_dir = Path(images_dir) if images_dir is not None else path.parent
    rows = _rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("empty ground-truth file", path) from None
    if tuple(h.lower() for h in header[:3]) != GROUND_TRUTH_HEADER:
        raise ParseError(f"expected header {','.join(GROUND_TRUTH_HEADER)}, got {','.join(header)}", path, lineno)
    records = []
    seen = set()
    for lineno, row in rows:
        if len(row) != 3 or not row[0]:
            raise ParseError(f"expected 3 fields, got {len(row)}", path, lineno)
        image_id, mel, sk = row
        is_mel = _indicator(mel, path, lineno, "melanoma")
        is_sk = _indicator(sk, path, lineno, "seborrheic_keratosis")
        if is_mel and is_sk:
            raise ConsistencyError(f"{path}:{lineno}: {image_id} marked both melanoma and seborrheic keratosis")
        if image_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        diagnosis = Diagnosis.MELANOMA if is_mel else Diagnosis.SEBORRHEIC_KERATOSIS if is_sk else Diagnosis.NEVUS
        records.append(LesionRecord(image_id, find_image(images_dir, image_id), diagnosis))
    return Dataset(tuple(records), origin)


def write_ground_truth(dataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROUND_TRUTH_HEADER)
        for r in dataset:
            w.writerow([r.image_id,
                        "1.0" if r.diagnosis == Diagnosis.MELANOMA else "0.0",
                        "1.0" if r.diagnosis == Diagnosis.SEBORRHEIC_KERATOSIS else "0.0"])


def _sex(token):
    token = token.strip().lower()
    if token in ("male", "m"):
        return Sex.MALE
    if token in ("female", "f"):
        return Sex.FEMALE
    return Sex.UNKNOWN


def load_metadata(dataset: Dataset, path) -> Dataset:
    """Merge age and sex onto matching records.

    Rows for unknown image ids are skipped and counted in a warning. Empty or
    ``unknown`` age/sex tokens leave the record's defaults in place.
    """
    path = Path(path)
    rows = _rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("empty metadata file", path) from None
    if tuple(h.lower() for h in header[:3]) != METADATA_HEADER:
        raise ParseError(f"expected header {','.join(METADATA_HEADER)}, got {','.join(header)}", path, lineno)
    by_id = dataset.by_id()
    merged = {}
    unmatched = 0
    for lineno, row in rows:
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", path, lineno)
        image_id, age_token, sex_token = row
        age = None
        if age_token and age_token.lower() not in ("unknown", "na", "nan"):
            try:
                age = float(age_token)
            except ValueError:
                raise ParseError(f"age {age_token!r} is not a number", path, lineno) from None
            if not 0 <= age <= 130:
                raise ParseError(f"age {age_token!r} outside [0, 130]", path, lineno)
        if image_id not in by_id:
            unmatched += 1
            continue
        merged[image_id] = replace(by_id[image_id], age_years=age, sex=_sex(sex_token))
    if unmatched:
        log.warning("%s: %d metadata rows match no record", path, unmatched)
    records = tuple(merged.get(r.image_id, replace(r, age_years=None, sex=Sex.UNKNOWN)) for r in dataset)
    return Dataset(records, dataset.origin)


def write_metadata(dataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METADATA_HEADER)
        for r in dataset:
            age = "" if r.age_years is None else f"{r.age_years:g}"
            w.writerow([r.image_id, age, r.sex.value])
