"""Command-line pipeline: prepare, split, train, predict, evaluate, report.

Every command reads and writes plain files under the work directory::

    cache/<profile>-<size>/tensors/<id>.lfwt preprocessed tensors ("-color" suffix
                                             when colour passthrough is on)
    cache/<profile>-<size>/manifest.csv      image_id,cache_path,checksum
    cache/<profile>-<size>/errors.csv        images that failed to decode
    split.csv                                split plan
    runs/<run>/run.cfg                       how the run was built
    runs/<run>/<run>-best.lfwt               best checkpoint
    runs/<run>/<run>-history.csv             per-epoch history (two for finetune)
    predictions/<run>-<partition>.csv        submission-format scores
    eval/<run>-<partition>.csv               metrics of one run
    report.txt, report.csv                   results table
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import models, synthetic
from .data import (Dataset, binary_label, class_counts, get_task, labels,
                   load_ground_truth, load_metadata)
from .errors import ConfigError, DataError, LesionError, ParseError, ShapeError
from .imageproc import PROFILES, decode_image, preprocess_array
from .metrics import METRIC_NAMES, ScoredSet, build_report, evaluate
from .nn import Rng, predict
from .splits import (PARTITIONS, DEFAULT_FRACTIONS, OversampleConfig, SplitFractions, load_plan,
                     oversample_minority, save_plan, stratified_split)
from .train import LabeledData, run_feature_extractor_stage, run_finetune_stage, run_hybrid_stage, run_scratch_stage

log = logging.getLogger("lesionxfer")

SUBMISSION_HEADER = ("image_id", "melanoma", "seborrheic_keratosis")
TASK_COLUMN = {"task1": "melanoma", "task2": "seborrheic_keratosis"}
BACKBONE_SOURCES = ("tiny-random", "tiny-pretext", "weights-file:<path>")


# configuration ---------------------------------------------------------------


def _fractions(text):
    return SplitFractions.parse(text)


def _backbone(text):
    if text in ("tiny-random", "tiny-pretext") or (text.startswith("weights-file:") and len(text) > 13):
        return text
    raise ConfigError(f"backbone must be one of {', '.join(BACKBONE_SOURCES)}, got {text!r}")


def _model(text):
    if text not in models.MODEL_IDS:
        raise ConfigError(f"model must be one of {', '.join(models.MODEL_IDS)}, got {text!r}")
    return text


def _task(text):
    try:
        return get_task(text).id
    except (KeyError, ValueError):
        raise ConfigError(f"task must be task1 or task2, got {text!r}") from None


def _partition(text):
    if text not in PARTITIONS + ("all",):
        raise ConfigError(f"partition must be one of {', '.join(PARTITIONS)} or all, got {text!r}")
    return text


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise ConfigError(f"seed must fit in 64 unsigned bits, got {text}")
    return value


def _flag(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected true or false, got {text!r}")


def _positive(text):
    value = int(text)
    if value < 1:
        raise ConfigError(f"expected a positive integer, got {text}")
    return value


@dataclass
class RunConfig:
    work_dir: Path = Path("work")
    images_dir: Path | None = None
    ground_truth: Path | None = None
    metadata: Path | None = None
    task: str = "task1"
    model: str = "scratch"
    fractions: SplitFractions = DEFAULT_FRACTIONS
    oversample: int = 3
    seed: int | None = None
    backbone: str = "tiny-pretext"
    input_size: int | None = None
    color: bool = False
    epochs: int | None = None
    finetune_epochs: int | None = None
    batch_size: int = 32
    workers: int = 1
    pretext_images: int = 1200
    pretext_epochs: int = 20
    run: str | None = None
    partition: str = "test"
    output: Path | None = None
    runs: str | None = None

    @property
    def run_name(self):
        return self.run or self.model

    def require(self, *names):
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"{name.replace('_', '-')} is required for this command")
            if isinstance(value, Path) and name != "output" and not value.exists():
                raise ConfigError(f"{name.replace('_', '-')} {value} does not exist")

    def profile(self):
        base = PROFILES["scratch" if self.model == "scratch" else "transfer"]
        if self.color:
            if base.output_channels != 3:
                raise ConfigError(f"colour passthrough needs the 3-channel transfer profile, not {base.name}")
            base = replace(base, color=True)
        return base.sized(self.input_size) if self.input_size else base


CONVERTERS = {
    "work_dir": Path, "images_dir": Path, "ground_truth": Path, "metadata": Path, "output": Path,
    "task": _task, "model": _model, "fractions": _fractions, "oversample": _positive, "seed": _seed,
    "backbone": _backbone, "input_size": _positive, "color": _flag, "epochs": _positive, "finetune_epochs": _positive,
    "batch_size": _positive, "workers": _positive, "pretext_images": _positive, "pretext_epochs": _positive,
    "run": str, "partition": _partition, "runs": str,
}


def _convert(key, value, where):
    try:
        return CONVERTERS[key](value)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except ValueError:
        raise ConfigError(f"{where}: bad value {value!r} for {key}") from None


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONVERTERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value, f"{path}:{lineno}")
    return out


def resolve_config(args) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    values = read_config_file(args.config) if args.config else {}
    for key in CONVERTERS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _convert(key, flag, f"--{key.replace('_', '-')}")
    names = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in values.items() if k in names})


# shared helpers ----------------------------------------------------------------


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _load_dataset(cfg: RunConfig) -> Dataset:
    cfg.require("ground_truth")
    images_dir = cfg.images_dir if cfg.images_dir is not None else cfg.ground_truth.parent / "images"
    dataset = load_ground_truth(cfg.ground_truth, images_dir)
    if cfg.metadata is not None:
        cfg.require("metadata")
        dataset = load_metadata(dataset, cfg.metadata)
    return dataset


def _cache_dir(cfg: RunConfig) -> Path:
    profile = cfg.profile()
    suffix = "-color" if profile.color else ""
    return cfg.work_dir / "cache" / f"{profile.name}-{profile.target_size}{suffix}"


def _read_manifest(path: Path) -> dict:
    if not path.exists():
        return {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["image_id", "cache_path", "checksum"]:
        raise ParseError("expected header image_id,cache_path,checksum", path, 1)
    return {r[0]: (r[1], r[2]) for r in rows[1:] if r}


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _plan(cfg: RunConfig):
    path = cfg.work_dir / "split.csv"
    if not path.exists():
        raise DataError(f"{path}: split plan missing; run the split command first")
    return load_plan(path)


def _tensors(cfg: RunConfig, records):
    """Cached tensors for ``records`` (duplicates allowed), checksum-verified."""
    cache = _cache_dir(cfg)
    manifest_path = cache / "manifest.csv"
    if not manifest_path.exists():
        raise DataError(f"{manifest_path}: tensor manifest missing; run the prepare command first")
    manifest = _read_manifest(manifest_path)
    loaded = {}
    for r in records:
        if r.image_id in loaded:
            continue
        if r.image_id not in manifest:
            raise DataError(f"{manifest_path}: no cached tensor for {r.image_id}")
        rel, checksum = manifest[r.image_id]
        path = cache / rel
        if not path.exists():
            raise DataError(f"{path}: cached tensor missing; rerun prepare")
        data = path.read_bytes()
        if _sha256(data) != checksum:
            raise DataError(f"{path}: checksum mismatch; rerun prepare")
        loaded[r.image_id] = models.params_from_bytes(data, str(path))["image"]
    return np.stack([loaded[r.image_id] for r in records])


def _inputs(cfg: RunConfig, records):
    images = _tensors(cfg, records)
    if cfg.model == "hybrid":
        return {"image": images, "metadata": np.stack([models.encode_metadata(r) for r in records])}
    return images


def _backbone_spec(cfg: RunConfig) -> models.BackboneSpec:
    size = cfg.profile().target_size
    template = models.tiny_conv_backbone((size, size, 3))
    source = cfg.backbone
    if source == "tiny-random":
        return template
    if source.startswith("weights-file:"):
        return models.load_backbone(Path(source.split(":", 1)[1]), template)
    cfg.require("seed")
    store = cfg.work_dir / "backbones" / f"pretext-{size}-seed{cfg.seed}-n{cfg.pretext_images}-e{cfg.pretext_epochs}.lfwt"
    if store.exists():
        return replace(template, provenance="pretext_pretrained", params=models.load_params(store, template.network()))
    raw = size + size // 4
    images, classes = synthetic.pretext_images(cfg.pretext_images, raw, cfg.seed)
    profile = PROFILES["transfer"].sized(size)
    x = np.stack([preprocess_array(im, profile) for im in images])
    log.info("pretext pretraining on %d synthetic images", len(x))
    backbone = models.pretext_pretrain(template, x, classes, epochs=cfg.pretext_epochs, seed=cfg.seed,
                                       batch_size=cfg.batch_size, learning_rate=3e-3)
    log.info("pretext holdout accuracy %.3f", backbone.info["pretext_accuracy"])
    store.parent.mkdir(parents=True, exist_ok=True)
    models.save_params(backbone.params, store)
    return backbone


def _network(cfg: RunConfig, backbone=None):
    if cfg.model == "scratch":
        return models.build_scratch(cfg.profile().target_size)
    if backbone is None:
        size = cfg.profile().target_size
        backbone = models.tiny_conv_backbone((size, size, 3))
    return models.build(cfg.model, backbone)


def _write_run_info(path: Path, cfg: RunConfig):
    keys = ("model", "task", "input_size", "color", "seed", "backbone", "oversample")
    lines = [f"{k} = {getattr(cfg, k)}" for k in keys if getattr(cfg, k) is not None]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_config(cfg: RunConfig, run: str) -> RunConfig:
    """``cfg`` with model, task and input size taken from a trained run."""
    info = cfg.work_dir / "runs" / run / "run.cfg"
    if not info.exists():
        raise DataError(f"{info}: run {run!r} not found; train it first")
    saved = read_config_file(info)
    keep = {"input_size": None, "color": False}
    keep.update((k, v) for k, v in saved.items() if k in ("model", "task", "input_size", "color"))
    return replace(cfg, run=run, **keep)


def _partition_records(cfg: RunConfig, dataset, plan):
    if cfg.partition == "all":
        return list(dataset)
    return plan.partition(dataset, cfg.partition)


# commands -----------------------------------------------------------------------


def cmd_prepare(cfg: RunConfig) -> int:
    dataset = _load_dataset(cfg)
    profile = cfg.profile()
    cache = _cache_dir(cfg)
    (cache / "tensors").mkdir(parents=True, exist_ok=True)
    old = _read_manifest(cache / "manifest.csv")
    rows, errors, todo = [], [], []
    for r in dataset:
        rel = f"tensors/{r.image_id}.lfwt"
        entry = old.get(r.image_id)
        path = cache / rel
        if entry and entry[0] == rel and path.exists() and _sha256(path.read_bytes()) == entry[1]:
            rows.append((r.image_id, rel, entry[1]))
        else:
            todo.append((r, rel))

    def work(item):
        r, rel = item
        try:
            x = preprocess_array(decode_image(r.image_path), profile)
        except (LesionError, OSError) as exc:
            return r, rel, None, str(exc)
        return r, rel, models.params_to_bytes({"image": x}), None

    if cfg.workers > 1 and len(todo) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(cfg.workers) as pool:
            done = list(pool.map(work, todo))
    else:
        done = [work(item) for item in todo]
    for r, rel, data, err in done:
        if err is not None:
            errors.append((r.image_id, str(r.image_path), err))
            continue
        (cache / rel).write_bytes(data)
        rows.append((r.image_id, rel, _sha256(data)))
    rows.sort()
    _write_csv(cache / "manifest.csv", ("image_id", "cache_path", "checksum"), rows)
    error_path = cache / "errors.csv"
    if errors:
        _write_csv(error_path, ("image_id", "image_path", "error"), sorted(errors))
    elif error_path.exists():
        error_path.unlink()
    print(f"prepared {len(rows)} images under profile {profile.name} ({profile.target_size}px): "
          f"{len(done) - len(errors)} computed, {len(rows) - (len(done) - len(errors))} reused")
    if errors:
        for image_id, _, err in sorted(errors):
            log.error("%s: %s", image_id, err)
        raise DataError(f"{len(errors)} image(s) failed to decode; see {error_path}")
    return 0


def cmd_split(cfg: RunConfig) -> int:
    cfg.require("seed")
    dataset = _load_dataset(cfg)
    task = get_task(cfg.task)
    plan = stratified_split(dataset, cfg.fractions, task, cfg.seed)
    path = cfg.work_dir / "split.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_plan(plan, path)
    print(f"wrote {path}")
    for name in PARTITIONS:
        part = plan.partition(dataset, name)
        counts = class_counts(Dataset(tuple(part))) if part else {}
        detail = " ".join(f"{d.value}={n}" for d, n in sorted(counts.items(), key=lambda kv: kv[0].value))
        print(f"{name:<10} {len(part):>6}  {detail}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    cfg.require("seed")
    if cfg.model == "hybrid" and cfg.metadata is None:
        raise ConfigError("the hybrid model needs a metadata file")
    dataset = _load_dataset(cfg)
    plan = _plan(cfg)
    task = get_task(cfg.task)
    if plan.task.id != task.id:
        raise ConfigError(f"split plan was stratified for {plan.task.id}, config asks for {task.id}")
    train = oversample_minority(plan.partition(dataset, "train"), task, OversampleConfig(cfg.oversample))
    val = plan.partition(dataset, "validation")
    train_data = LabeledData(_inputs(cfg, train), labels(train, task))
    val_data = LabeledData(_inputs(cfg, val), labels(val, task))
    run_dir = cfg.work_dir / "runs" / cfg.run_name
    run_dir.mkdir(parents=True, exist_ok=True)
    rng = Rng(cfg.seed).fork("train", cfg.model)
    histories = {}
    if cfg.model == "scratch":
        net = _network(cfg)
        params = models.init_network(net, rng.fork("init"))
        result = run_scratch_stage(net, params, train_data, val_data, cfg.seed, max_epochs=cfg.epochs or 50,
                                   batch_size=cfg.batch_size)
        histories["history"] = result.history
    else:
        backbone = _backbone_spec(cfg)
        net = _network(cfg, backbone)
        params = models.init_network(net, rng.fork("init"), backbone.params)
        if cfg.model == "hybrid":
            result = run_hybrid_stage(net, params, train_data, val_data, cfg.seed, max_epochs=cfg.epochs or 200,
                                      batch_size=cfg.batch_size)
            histories["history"] = result.history
        else:
            result = run_feature_extractor_stage(net, params, train_data, val_data, cfg.seed,
                                                 max_epochs=cfg.epochs or 20, batch_size=cfg.batch_size)
            if cfg.model == "finetune":
                histories["stage1-history"] = result.history
                _, result = run_finetune_stage(net, result, train_data, val_data, cfg.seed,
                                               max_epochs=cfg.finetune_epochs or 200, batch_size=cfg.batch_size)
                histories["stage2-history"] = result.history
            else:
                histories["history"] = result.history
    checkpoint = run_dir / f"{cfg.run_name}-best.lfwt"
    models.save_params(result.params, checkpoint)
    for suffix, history in histories.items():
        (run_dir / f"{cfg.run_name}-{suffix}.csv").write_text(history.to_csv(), encoding="utf-8")
    _write_run_info(run_dir / "run.cfg", cfg)
    print(f"wrote {checkpoint} (best epoch {result.best_epoch}, validation accuracy {result.best_val_acc:.4f})")
    return 0


def write_submission(path: Path, image_ids, scores, task_id: str):
    """Submission rows for one model; the column it does not cover is 0.0."""
    covered = TASK_COLUMN[task_id]
    missing = [c for c in SUBMISSION_HEADER[1:] if c != covered]
    lines = [f"# {', '.join(missing)} not predicted by this model ({task_id}); filled with 0.0",
             ",".join(SUBMISSION_HEADER)]
    for image_id, score in zip(image_ids, scores):
        cells = {covered: repr(float(score))}
        lines.append(",".join([image_id] + [cells.get(c, "0.0") for c in SUBMISSION_HEADER[1:]]))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_submission(path: Path) -> dict:
    """image_id -> {column: score}; comment lines are skipped."""
    if not path.exists():
        raise DataError(f"{path}: prediction file not found")
    lines = [(i, line) for i, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1)
             if line.strip() and not line.startswith("#")]
    if not lines or lines[0][1].split(",") != list(SUBMISSION_HEADER):
        raise ParseError(f"expected header {','.join(SUBMISSION_HEADER)}", path, lines[0][0] if lines else 1)
    out = {}
    for lineno, line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"expected 3 fields, got {len(parts)}", path, lineno)
        try:
            out[parts[0]] = dict(zip(SUBMISSION_HEADER[1:], (float(parts[1]), float(parts[2]))))
        except ValueError:
            raise ParseError("scores must be numbers", path, lineno) from None
    return out


def _prediction_path(cfg: RunConfig) -> Path:
    return cfg.output or cfg.work_dir / "predictions" / f"{cfg.run_name}-{cfg.partition}.csv"


def cmd_predict(cfg: RunConfig) -> int:
    cfg = _run_config(cfg, cfg.run_name)
    dataset = _load_dataset(cfg)
    records = _partition_records(cfg, dataset, _plan(cfg) if cfg.partition != "all" else None)
    if not records:
        raise DataError(f"partition {cfg.partition!r} is empty")
    net = _network(cfg)
    checkpoint = cfg.work_dir / "runs" / cfg.run_name / f"{cfg.run_name}-best.lfwt"
    params = models.load_params(checkpoint)
    try:
        models.check_params(net, params, allow_extra=False)
    except (ShapeError, DataError) as exc:
        raise ShapeError(f"{checkpoint}: incompatible with model {cfg.model}: {exc}") from None
    scores = predict(net, params, _inputs(cfg, records), batch_size=cfg.batch_size)
    if not np.all((scores >= 0) & (scores <= 1)):
        raise ShapeError("scores outside [0, 1]")
    path = _prediction_path(cfg)
    write_submission(path, [r.image_id for r in records], scores, cfg.task)
    print(f"wrote {len(records)} predictions to {path}")
    return 0


def _scored(cfg: RunConfig, dataset, plan) -> ScoredSet:
    if cfg.partition == "train":
        log.warning("evaluating on the train partition: oversampled duplicates are excluded from the metrics")
    records = _partition_records(cfg, dataset, plan)
    preds = read_submission(_prediction_path(cfg))
    task = get_task(cfg.task)
    column = TASK_COLUMN[task.id]
    missing = [r.image_id for r in records if r.image_id not in preds]
    if missing:
        raise DataError(f"{_prediction_path(cfg)}: no prediction for {len(missing)} image(s), e.g. {missing[0]}")
    return ScoredSet([r.image_id for r in records], [preds[r.image_id][column] for r in records],
                     [binary_label(r, task) for r in records])


def cmd_evaluate(cfg: RunConfig) -> int:
    cfg = _run_config(cfg, cfg.run_name)
    dataset = _load_dataset(cfg)
    s = _scored(cfg, dataset, _plan(cfg) if cfg.partition != "all" else None)
    result = evaluate(s)
    path = cfg.output or cfg.work_dir / "eval" / f"{cfg.run_name}-{cfg.partition}.csv"
    _write_csv(path, ("run", "model", "task", "partition", "n") + METRIC_NAMES,
               [(cfg.run_name, models.REPORT_NAMES[cfg.model], cfg.task, cfg.partition, len(s))
                + tuple(repr(result[m]) for m in METRIC_NAMES)])
    print(" ".join(f"{m}={result[m]:.4f}" for m in METRIC_NAMES))
    return 0


def cmd_report(cfg: RunConfig) -> int:
    runs_dir = cfg.work_dir / "runs"
    if cfg.runs:
        names = [n.strip() for n in cfg.runs.split(",") if n.strip()]
    else:
        names = sorted(p.name for p in runs_dir.iterdir() if (p / "run.cfg").exists()) if runs_dir.exists() else []
    dataset = _load_dataset(cfg)
    plan = _plan(cfg) if cfg.partition != "all" else None
    results = {}
    for name in names:
        run_cfg = _run_config(replace(cfg, output=None), name)
        if not _prediction_path(run_cfg).exists():
            log.warning("run %s has no %s predictions; skipped", name, cfg.partition)
            continue
        key = (models.REPORT_NAMES[run_cfg.model], run_cfg.task)
        if key in results:
            raise ConfigError(f"two runs report {key[0]} on {key[1]}; pass --runs to choose")
        results[key] = _scored(run_cfg, dataset, plan)
    report = build_report(results)
    text = report.render()
    out = cfg.output or cfg.work_dir / "report.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    out.with_suffix(".csv").write_text(report.to_csv(), encoding="utf-8")
    print(text, end="" if text.endswith("\n") else "\n")
    return 0


def cmd_toy(cfg: RunConfig) -> int:
    """Write a small synthetic dataset (images, ground truth, metadata)."""
    cfg.require("seed")
    root = cfg.output or cfg.work_dir / "toy"
    dataset = synthetic.write_toy_dataset(root, seed=cfg.seed)
    print(f"wrote {len(dataset)} synthetic records under {root}")
    return 0


COMMANDS = {
    "prepare": cmd_prepare,
    "split": cmd_split,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "toy": cmd_toy,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run options (also settable in the config file)")
    g.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value config file")
    g.add_argument("--seed", default=argparse.SUPPRESS)
    g.add_argument("--work-dir", dest="work_dir", default=argparse.SUPPRESS)
    for key in CONVERTERS:
        if key in ("seed", "work_dir"):
            continue
        g.add_argument(f"--{key.replace('_', '-')}", dest=key, default=argparse.SUPPRESS)
    g.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    parser = _Parser(prog="lesionxfer", parents=[common],
                     description="Skin-lesion transfer-learning pipeline on numpy.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).strip().splitlines()[0])
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        for key in ("config", "verbose"):
            if not hasattr(args, key):
                setattr(args, key, None)
        level = logging.DEBUG if (args.verbose or 0) > 1 else logging.INFO if args.verbose else logging.WARNING
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except LesionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
