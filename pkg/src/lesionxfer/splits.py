"""Class-stratified partitioning and minority oversampling of the train partition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .data import TaskSpec, binary_label, get_task
from .errors import ConfigError, DataError, ParseError
from .nn.rng import Rng

PARTITIONS = ("train", "validation", "test", "spare")


@dataclass(frozen=True)
class SplitFractions:
    train: float
    validation: float
    test: float
    spare: float

    def __post_init__(self):
        values = self.as_tuple()
        if any(v < 0 for v in values):
            raise ConfigError(f"split fractions must be non-negative, got {values}")
        if abs(math.fsum(values) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {math.fsum(values)!r}")

    def as_tuple(self):
        return (self.train, self.validation, self.test, self.spare)

    @classmethod
    def parse(cls, text: str):
        try:
            parts = [float(x) for x in text.replace("/", ",").split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse split fractions {text!r}") from None
        if len(parts) == 3:
            # exact decimal remainder, so "0.675,0.075,0.15" leaves spare = 0.1
            parts.append(float(1 - sum(Fraction(repr(x)) for x in parts)))
        if len(parts) != 4:
            raise ConfigError(f"expected 3 or 4 split fractions, got {text!r}")
        return cls(*parts)

    def __str__(self):
        return ",".join(repr(v) for v in self.as_tuple())


DEFAULT_FRACTIONS = SplitFractions(0.675, 0.075, 0.15, 0.10)


@dataclass(frozen=True)
class OversampleConfig:
    factor: int = 3

    def __post_init__(self):
        if int(self.factor) != self.factor or self.factor < 1:
            raise ConfigError(f"oversampling factor must be an integer >= 1, got {self.factor}")


@dataclass
class SplitPlan:
    assignment: dict[str, str]
    seed: int
    task: TaskSpec
    fractions: SplitFractions = DEFAULT_FRACTIONS

    def ids(self, partition):
        return sorted(i for i, p in self.assignment.items() if p == partition)

    def partition(self, dataset, partition):
        keep = set(self.ids(partition))
        return [r for r in dataset if r.image_id in keep]

    def sizes(self):
        return {p: len(self.ids(p)) for p in PARTITIONS}


def allocate(n: int, fractions: SplitFractions) -> list[int]:
    """Largest-remainder counts for ``n`` items; remainder ties go to the
    earlier partition in train, validation, test, spare order."""
    # decimal-exact fractions so 0.675 * 40 is exactly 27
    quotas = [Fraction(repr(f)) * n for f in fractions.as_tuple()]
    counts = [math.floor(q) for q in quotas]
    left = n - sum(counts)
    order = sorted(range(4), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:left]:
        counts[i] += 1
    return counts


def stratified_split(dataset, fractions: SplitFractions, task: TaskSpec, seed: int) -> SplitPlan:
    records = sorted(dataset, key=lambda r: r.image_id)
    if not records:
        raise DataError("cannot split an empty dataset")
    if not isinstance(fractions, SplitFractions):
        fractions = SplitFractions(*fractions)
    rng = Rng(seed)
    assignment = {}
    for label in (0, 1):
        members = [r.image_id for r in records if binary_label(r, task) == label]
        members = rng.fork("stratum", label).shuffle(members)
        start = 0
        for name, count in zip(PARTITIONS, allocate(len(members), fractions)):
            for image_id in members[start : start + count]:
                assignment[image_id] = name
            start += count
    return SplitPlan(dict(sorted(assignment.items())), seed, task, fractions)


def minority_label(records, task: TaskSpec):
    """The label with strictly fewer records, or None on a tie."""
    pos = sum(binary_label(r, task) for r in records)
    neg = len(records) - pos
    if pos == neg:
        return None
    return 1 if pos < neg else 0


def oversample_minority(train_records, task: TaskSpec, config: OversampleConfig = OversampleConfig()):
    """Repeat every minority record ``factor`` times in place; order kept."""
    factor = config.factor if isinstance(config, OversampleConfig) else OversampleConfig(config).factor
    if factor < 1:
        raise ConfigError("oversampling factor must be >= 1")
    train_records = list(train_records)
    minority = minority_label(train_records, task)
    if minority is None or factor == 1:
        return train_records
    out = []
    for r in train_records:
        out.extend([r] * (factor if binary_label(r, task) == minority else 1))
    return out


@dataclass
class LeakageReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


def verify_leakage(plan: SplitPlan, expanded_train) -> LeakageReport:
    held_out = {i for i, p in plan.assignment.items() if p != "train"}
    ids = (r if isinstance(r, str) else r.image_id for r in expanded_train)
    return LeakageReport(sorted({i for i in ids if i in held_out}))


def minority_share_after(prevalence: float, factor: int) -> float:
    """Train-set minority share after oversampling a minority at ``prevalence``."""
    return prevalence * factor / (prevalence * factor + (1.0 - prevalence))


# persistence ---------------------------------------------------------------


def plan_to_text(plan: SplitPlan) -> str:
    lines = [f"# seed={plan.seed} fractions={plan.fractions} task={plan.task.id}", "image_id,partition"]
    lines += [f"{i},{p}" for i, p in sorted(plan.assignment.items())]
    return "\n".join(lines) + "\n"


def save_plan(plan: SplitPlan, path):
    Path(path).write_text(plan_to_text(plan), encoding="utf-8")


def load_plan(path) -> SplitPlan:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: split plan not found")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ParseError("missing header comment", path, 1)
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    try:
        seed = int(meta["seed"])
        fractions = SplitFractions.parse(meta["fractions"])
        task = get_task(meta["task"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad header comment ({exc})", path, 1) from None
    if len(lines) < 2 or lines[1].strip() != "image_id,partition":
        raise ParseError("expected header image_id,partition", path, 2)
    assignment = {}
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2 or parts[1] not in PARTITIONS:
            raise ParseError(f"bad row {line!r}", path, lineno)
        if parts[0] in assignment:
            raise ParseError(f"image {parts[0]!r} assigned twice", path, lineno)
        assignment[parts[0]] = parts[1]
    return SplitPlan(assignment, seed, task, fractions)
