"""Runs the command-line pipeline on a small synthetic dataset."""

from pathlib import Path

from lesionxfer import synthetic
from lesionxfer.cli import main

TOY_CONFIG = """\
# toy pipeline
ground_truth = {root}/data/ground_truth.csv
metadata = {root}/data/metadata.csv
work_dir = {root}/work
input_size = 32
seed = 11
epochs = 2
finetune_epochs = 2
pretext_images = 60
pretext_epochs = 1
"""


def make_toy(root: Path, n=40, seed=3):
    root = Path(root)
    synthetic.write_toy_dataset(root / "data", n=n, size=40, seed=seed)
    cfg = root / "run.cfg"
    cfg.write_text(TOY_CONFIG.format(root=root), encoding="utf-8")
    return cfg


def run(cfg, *args):
    code = main(["--config", str(cfg), *args])
    assert code == 0, f"lesionxfer {' '.join(args)} exited {code}"


def full_pipeline(root: Path, model_ids=("scratch", "feature-extractor", "finetune", "hybrid")):
    cfg = make_toy(root)
    run(cfg, "split")
    for model in model_ids:
        run(cfg, "--model", model, "prepare")
        run(cfg, "--model", model, "train")
        run(cfg, "--run", model, "predict")
    run(cfg, "report")
    return cfg
