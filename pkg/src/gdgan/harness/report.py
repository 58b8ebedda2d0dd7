"""Report rendering: counts/AUC table, ROC overlays, sample grids.

Everything here is a pure function of stored artifacts (eval JSONs, ROC
CSVs, GAN checkpoints), so deleting the report directory and re-rendering
reproduces byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib
import numpy as np
import torch

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from PIL import Image

from ..data.images import to_uint8
from ..errors import MissingArtifact
from ..gan.bundle import sample_acgan, sample_gdgan
from ..gan.nets import ACGAN, STAGE1, STAGE2
from ..rng import derive_int_seed, np_rng
from .run import Experiment

_SEED_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple",
                "tab:brown", "tab:pink", "tab:gray")


def _savefig(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "gdgan"}):
        if path.suffix == ".svg":
            fig.savefig(path, metadata={"Date": None})
        else:
            fig.savefig(path)


def write_table(report: dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "seed", "n_total", "n_focus", "focus_auc"])
        for cell in report["cells"]:
            w.writerow([cell["strategy"], cell["seed"], cell["n_total"],
                        cell["n_focus"], repr(cell["focus_auc"])])
        w.writerow([])
        w.writerow(["strategy", "mean_auc", "sd_auc"])
        for strategy in report["strategies"]:
            agg = report["per_strategy"][strategy]
            w.writerow([strategy, repr(agg["mean_auc"]), repr(agg["sd_auc"])])
    return path


def _read_roc_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    fpr, tpr = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            fpr.append(float(row["fpr"]))
            tpr.append(float(row["tpr"]))
    return np.array(fpr), np.array(tpr)


def plot_strategy_roc(exp: Experiment, strategy: str, out_dir: Path) -> list[Path]:
    fig, ax = plt.subplots(figsize=(4.0, 4.0), dpi=120)
    for i, seed in enumerate(exp.config.seeds):
        csv_path = exp.strategy_dir(strategy, seed) / f"roc_{exp.config.focus_label}.csv"
        if not csv_path.exists():
            plt.close(fig)
            raise MissingArtifact(f"missing ROC artifact {csv_path}")
        eval_path = exp.strategy_dir(strategy, seed) / "eval.json"
        auc = json.loads(eval_path.read_text())["focus_auc"]
        fpr, tpr = _read_roc_csv(csv_path)
        ax.plot(fpr, tpr, color=_SEED_COLORS[i % len(_SEED_COLORS)],
                label=f"seed {seed} (AUC {auc:.3f})")
    ax.plot([0, 1], [0, 1], "k--", linewidth=0.7)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"{exp.config.focus_label}: {strategy}")
    ax.legend(loc="lower right", fontsize=7)
    fig.tight_layout()
    paths = [out_dir / f"roc_{strategy}.png", out_dir / f"roc_{strategy}.svg"]
    for p in paths:
        _savefig(fig, p)
    plt.close(fig)
    return paths


def sample_grid(exp: Experiment, out_path: Path, per_source: int = 8) -> Path:
    """Real / ACGAN / GDGAN sample rows, seeded off the first experiment seed."""
    seed = exp.config.seeds[0]
    split = exp.split(seed)
    records, store = exp.corpus()
    rng = np_rng(seed, "report", "samples")
    ids = list(split.train)
    pick = rng.choice(len(ids), size=per_source, replace=len(ids) < per_source)
    real = store.load_batch([ids[i] for i in pick]).data

    general, detailed = exp._empirical_labels(seed, per_source, "report_samples")
    acgan_imgs = sample_acgan(
        exp.gan_bundle(ACGAN, seed), per_source, general, detailed,
        torch.Generator().manual_seed(derive_int_seed(seed, "report", "acgan_noise")),
    ).images.data
    gdgan_imgs = sample_gdgan(
        exp.gan_bundle(STAGE1, seed), exp.gan_bundle(STAGE2, seed),
        per_source, general, detailed,
        torch.Generator().manual_seed(derive_int_seed(seed, "report", "gdgan_noise")),
    ).images.data

    size = real.shape[-1]
    pad = 2
    grid = np.full((3 * (size + pad) + pad, per_source * (size + pad) + pad), 32, dtype=np.uint8)
    for row, source in enumerate((real, acgan_imgs, gdgan_imgs)):
        for col in range(per_source):
            y = pad + row * (size + pad)
            x = pad + col * (size + pad)
            grid[y:y + size, x:x + size] = to_uint8(source[col, 0])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(grid, mode="L").save(out_path)
    return out_path


def render_report(exp: Experiment) -> dict[str, list[str]]:
    """Render every report artifact from stored cell artifacts.

    Raises MissingArtifact when a required cell artifact is absent; never
    triggers recomputation.
    """
    report = exp.report()
    if not report["cells"]:
        raise MissingArtifact("no evaluation cells to report")
    report_dir = exp.run_dir / "report"
    outputs: dict[str, list[str]] = {
        "report_json": [str(report_dir / "report.json")],
        "table": [str(write_table(report, report_dir / "table.csv"))],
        "roc_plots": [],
        "samples": [],
    }
    for strategy in exp.config.strategies:
        outputs["roc_plots"] += [str(p) for p in plot_strategy_roc(exp, strategy, report_dir)]
    has_gan_sources = all(
        (exp.seed_dir(exp.config.seeds[0]) / f"{stage}.ckpt").exists() for stage in (STAGE1, STAGE2, ACGAN)
    )
    if has_gan_sources:
        outputs["samples"] = [str(sample_grid(exp, report_dir / "samples.png"))]
    return outputs
