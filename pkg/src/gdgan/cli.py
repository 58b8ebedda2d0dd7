"""Command-line entry point.

Subcommands mirror the pipeline stages; all of them read one JSON config
file and share the resumable artifact layout, so running stages one by one
is equivalent to ``run-all``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .data.images import ImageStore, preprocess, to_uint8
from .data.manifest import load_manifest, save_manifest
from .data.toy import write_toy_corpus
from .harness.config import ExperimentConfig, ManifestCorpusConfig, ToyCorpusConfig
from .harness.report import render_report
from .harness.run import Experiment

STAGE_ALIASES = {"1": "stage1", "2": "stage2", "acgan": "acgan", "stage1": "stage1", "stage2": "stage2"}


def _add_global_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None, help="restrict to one experiment seed")
    p.add_argument("--out", type=Path, default=None, help="override the output directory")
    p.add_argument("--deterministic", action="store_true",
                   help="single-threaded, deterministic-algorithms mode")


def _load_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        config = ExperimentConfig()
    if args.out is not None:
        config = replace(config, out_dir=str(args.out))
    if args.seed is not None:
        config = replace(config, seeds=(args.seed,))
    if args.deterministic:
        config = replace(config, deterministic=True)
    return config


def _experiment(args) -> Experiment:
    return Experiment(_load_config(args))


def cmd_make_toy(args) -> int:
    config = _load_config(args)
    if not isinstance(config.corpus, ToyCorpusConfig):
        print("config does not describe a toy corpus", file=sys.stderr)
        return 2
    exp = Experiment(config)
    records, store = exp.corpus()
    print(f"toy corpus: {len(records)} images under {store.write_root}")
    return 0


def cmd_prepare_data(args) -> int:
    """Normalize a raw manifest corpus into a preprocessed 64x64 store."""
    config = _load_config(args)
    if not isinstance(config.corpus, ManifestCorpusConfig):
        print("config does not describe a manifest corpus", file=sys.stderr)
        return 2
    schema = config.schema()
    records = load_manifest(config.corpus.manifest, schema)
    src = ImageStore(config.corpus.images)
    out_dir = Path(config.out_dir) / "prepared"
    dst = ImageStore(out_dir / "images")
    for r in records:
        dst.write(r.image_id, to_uint8(preprocess(src.read_raw(r.image_id))))
    save_manifest(records, schema, out_dir / "manifest.csv")
    print(f"prepared {len(records)} images under {out_dir}")
    return 0


def cmd_train_gan(args) -> int:
    exp = _experiment(args)
    stage = STAGE_ALIASES[args.stage]
    for seed in exp.config.seeds:
        exp.gan_bundle(stage, seed)
        print(f"{stage} ready for seed {seed}: {exp.seed_dir(seed) / (stage + '.ckpt')}")
    return 0


def cmd_augment(args) -> int:
    exp = _experiment(args)
    for seed in exp.config.seeds:
        records, _ = exp.augmented(args.strategy, seed)
        print(f"{args.strategy} seed {seed}: {len(records)} training rows")
    return 0


def cmd_train_classifier(args) -> int:
    exp = _experiment(args)
    for seed in exp.config.seeds:
        for strategy in ([args.strategy] if args.strategy else exp.config.strategies):
            exp.classifier(strategy, seed)
            print(f"classifier ready: strategy={strategy} seed={seed}")
    return 0


def cmd_evaluate(args) -> int:
    exp = _experiment(args)
    for seed in exp.config.seeds:
        for strategy in ([args.strategy] if args.strategy else exp.config.strategies):
            payload = exp.evaluation(strategy, seed)
            print(f"{strategy} seed {seed}: focus AUC {payload['focus_auc']:.4f} "
                  f"(N={payload['n_total']}, N_focus={payload['n_focus']})")
    return 0


def cmd_inception_score(args) -> int:
    exp = _experiment(args)
    for seed in exp.config.seeds:
        block = exp.inception_block(seed)
        for source, score in block["scores"].items():
            print(f"seed {seed} {source}: {score['mean']:.4f} +- {score['sd']:.4f}")
        for pair, t in block["t_tests"].items():
            print(f"seed {seed} {pair}: t={t['t']:.4f} dof={t['dof']:.2f} p={t['p_two_sided']:.4g}")
    return 0


def cmd_run_all(args) -> int:
    exp = _experiment(args)
    report = exp.run_all()
    render_report(exp)
    for strategy in report["strategies"]:
        agg = report["per_strategy"][strategy]
        print(f"{strategy}: mean AUC {agg['mean_auc']:.4f} (SD {agg['sd_auc']:.4f})")
    print(f"report under {exp.run_dir / 'report'}")
    return 0


def cmd_report(args) -> int:
    exp = _experiment(args)
    outputs = render_report(exp)
    print(json.dumps(outputs, indent=1, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdgan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    specs = [
        ("prepare-data", cmd_prepare_data, "normalize a raw manifest corpus"),
        ("make-toy", cmd_make_toy, "generate the procedural toy corpus"),
        ("train-gan", cmd_train_gan, "train one GAN stage"),
        ("augment", cmd_augment, "build and materialize one augmentation strategy"),
        ("train-classifier", cmd_train_classifier, "train the downstream classifier"),
        ("evaluate", cmd_evaluate, "evaluate a trained classifier on the test split"),
        ("inception-score", cmd_inception_score, "score real vs synthetic image diversity"),
        ("run-all", cmd_run_all, "run the full pipeline and render the report"),
        ("report", cmd_report, "re-render the report from stored artifacts"),
    ]
    for name, fn, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        _add_global_flags(p)
        p.set_defaults(fn=fn)
        if name == "train-gan":
            p.add_argument("--stage", required=True, choices=sorted(STAGE_ALIASES),
                           help="1/stage1, 2/stage2, or acgan")
        elif name == "augment":
            p.add_argument("--strategy", required=True,
                           choices=("none", "undersample", "oversample", "acgan", "gdgan"))
        elif name in ("train-classifier", "evaluate"):
            p.add_argument("--strategy", default=None,
                           choices=("none", "undersample", "oversample", "acgan", "gdgan"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
