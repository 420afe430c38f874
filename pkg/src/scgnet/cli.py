"""Command-line entry point.

Subcommands: ingest, preprocess, train, cv, tune, evaluate, report.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime or numeric error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, weights
from .baselines import fit_logreg, fit_mnb, knn_predict
from .config import RunConfig, load_config
from .dataset import AttackTaxonomy, labels_for_task, load_examples, save_columnar, summarize, task_class_names
from .errors import ConfigError, DataError, MissingFile, ScgnetError
from .manifest import RunManifest
from .model import build, predict_labels
from .metrics import EvalReport, confusion, parse_machine, render_machine, render_table
from .preprocess import Pipeline, TransformReport, fit_pipeline
from .smote import SmoteConfig, balance_classes
from .train import cross_validate, derive_seed, evaluate_model, stratified_holdout, train_model

log = logging.getLogger("scgnet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_flags(parser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="master seed (overrides [train] seed)")
    parser.add_argument("--config", default=default, help="run configuration file (INI)")
    parser.add_argument("--task", choices=("binary", "multiclass"), default=default,
                        help="classification task (overrides [model] task)")
    parser.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scgnet", description="SCGNet intrusion detection on NSL-KDD-format data.")
    parser.add_argument("--version", action="version", version=f"scgnet {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        return p

    p = add("ingest", "parse and label a raw dataset file into the columnar intermediate")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output .npz path")
    p.add_argument("--taxonomy")
    p.add_argument("--coerce-unknown-to-attack", action="store_true")

    p = add("preprocess", "fit the one-hot + standardization pipeline on training data")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output pipeline .json path")

    for name, text in (("train", "train one model; a stratified hold-out slice drives early stopping"),
                       ("cv", "stratified k-fold cross-validation")):
        p = add(name, text)
        p.add_argument("--data", help="training data (text or .npz); default [data] train")
        p.add_argument("--out", help="output directory; default [data] out_dir")
        p.add_argument("--epochs", type=int)
        p.add_argument("--max-rows", type=int, help="stratified subsample of the training data")
        if name == "train":
            p.add_argument("--val-fraction", type=float, default=0.2,
                           help="stratified hold-out slice driving early stopping")

    p = add("tune", "random search or Hyperband over the architecture grid")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--strategy", choices=("random", "hyperband"))
    p.add_argument("--max-rows", type=int)
    p.add_argument("--final-cv", action="store_true", help="cross-validate the top configs afterwards")

    p = add("evaluate", "score saved weights (and optional baselines) on a labelled file")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--pipeline", help="fitted pipeline; default pipeline.json next to the weights")
    p.add_argument("--out", help="output directory; default next to the weights")
    p.add_argument("--baselines", action="store_true", help="also fit LR/KNN/MNB on --train-data")
    p.add_argument("--train-data", help="training data for the baselines")
    p.add_argument("--threshold", type=float, default=0.5)

    p = add("report", "render machine reports as a comparison table")
    p.add_argument("inputs", nargs="+", help="machine report files")
    p.add_argument("--comparisons", action="store_true", help="append the published comparison rows")
    p.add_argument("--format", choices=("table", "machine"), default="table")
    p.add_argument("--out")
    return parser


# helpers -------------------------------------------------------------------

def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.with_overrides(seed=args.seed, task=args.task)


def _require_file(path, what: str) -> Path:
    if not path:
        raise ConfigError(f"no {what} given (flag or [data] config key)")
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    return p


def _taxonomy(cfg: RunConfig, override=None) -> AttackTaxonomy:
    path = override or cfg.data.taxonomy
    return AttackTaxonomy.load(_require_file(path, "taxonomy")) if path else AttackTaxonomy.default()


def _load(cfg: RunConfig, path, manifest: RunManifest | None):
    p = _require_file(path, "data file")
    if manifest is not None:
        manifest.add_input(p)
    return load_examples(p, _taxonomy(cfg), cfg.data.coerce_unknown)


def _subsample(examples, labels, max_rows, seed):
    if not max_rows or max_rows >= len(examples):
        return examples, labels
    _, keep = stratified_holdout(labels, max_rows / len(examples), seed)
    return [examples[i] for i in keep], labels[keep]


def _write(path: Path, text: str, manifest: RunManifest) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    manifest.add_output(path)


def _training_arrays(cfg, args, manifest):
    examples = _load(cfg, args.data or cfg.data.train, manifest)
    y = labels_for_task(examples, cfg.task)
    examples, y = _subsample(examples, y, getattr(args, "max_rows", None), derive_seed(cfg.train.seed, 7))
    raws = [ex.raw for ex in examples]
    pipeline = fit_pipeline(raws)
    X = pipeline.transform(raws)
    model_cfg = dataclasses.replace(cfg.model, input_length=pipeline.width)
    return X, y, pipeline, model_cfg


def _smote_for(cfg: RunConfig, seed: int) -> SmoteConfig | None:
    if cfg.task == "multiclass" and cfg.smote.enabled:
        return SmoteConfig(cfg.smote.k_neighbors, {}, seed)
    return None


def _out_dir(cfg: RunConfig, args) -> Path:
    return Path(args.out or cfg.data.out_dir)


def _manifest(args, cfg: RunConfig, argv) -> RunManifest:
    return RunManifest(args.command, list(argv), cfg.snapshot(), cfg.train.seed)


# commands ------------------------------------------------------------------

def cmd_ingest(args, cfg, manifest):
    src = _require_file(args.data, "data file")
    manifest.add_input(src)
    examples = load_examples(src, _taxonomy(cfg, args.taxonomy),
                             args.coerce_unknown_to_attack or cfg.data.coerce_unknown)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_columnar(out, examples)
    manifest.add_output(out)
    summary = summarize(examples, str(src))
    _write(out.with_suffix(".summary.json"), summary.to_json(), manifest)
    print(summary.to_json(), end="")
    return out.parent / "manifests"


def cmd_preprocess(args, cfg, manifest):
    examples = _load(cfg, args.data, manifest)
    pipeline = fit_pipeline([ex.raw for ex in examples])
    out = Path(args.out)
    _write(out, pipeline.to_json(), manifest)
    print(f"pipeline width {pipeline.width} ({len(pipeline.standardizer.columns)} numeric, "
          f"{pipeline.encoder.width} one-hot) -> {out}")
    return out.parent / "manifests"


def cmd_train(args, cfg, manifest):
    if args.epochs:
        cfg.train = dataclasses.replace(cfg.train, epochs=args.epochs)
        manifest.config = cfg.snapshot()
    X, y, pipeline, model_cfg = _training_arrays(cfg, args, manifest)
    seed = cfg.train.seed
    tr, va = stratified_holdout(y, args.val_fraction, derive_seed(seed, 3))
    X_tr, y_tr = X[tr], y[tr]
    smote = _smote_for(cfg, derive_seed(seed, 4))
    if smote is not None:
        b = balance_classes(X_tr, y_tr, smote)
        X_tr, y_tr = b.X, b.y
    model = build(model_cfg, derive_seed(seed, 1))
    model, history, state = train_model(model, X_tr, y_tr, X[va], y[va], cfg.train)
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "pipeline.json", pipeline.to_json(), manifest)
    wpath = out / "weights.scgn"
    weights.save_weights(model, wpath)
    manifest.add_output(wpath)
    _write(out / "history.json", json.dumps(history.to_dict(), indent=2, sort_keys=True) + "\n", manifest)
    _, _, preds = evaluate_model(model, X[va], y[va])
    names = task_class_names(cfg.task)
    report = EvalReport(cfg.task, "SCGNet (validation)", confusion(preds, y[va], len(names), names),
                        manifest=manifest.run_id(),
                        notes={"stop_reason": history.stop_reason, "epochs_run": history.epochs_run})
    _write(out / "report.json", render_machine(report), manifest)
    print(render_table([report]), end="")
    print(history.stop_reason)
    return out / "manifests"


def cmd_cv(args, cfg, manifest):
    if args.epochs:
        cfg.train = dataclasses.replace(cfg.train, epochs=args.epochs)
        manifest.config = cfg.snapshot()
    X, y, _, model_cfg = _training_arrays(cfg, args, manifest)
    names = task_class_names(cfg.task)
    result = cross_validate(X, y, model_cfg, cfg.train, names, _smote_for(cfg, derive_seed(cfg.train.seed, 4)))
    out = _out_dir(cfg, args)
    for f in result.folds:
        f.report.manifest = manifest.run_id()
        _write(out / f"fold{f.fold + 1}_report.json", render_machine(f.report), manifest)
    summary = result.summary()
    _write(out / "cv_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n", manifest)
    print(render_table([f.report for f in result.folds]), end="")
    m, s = summary["mean"], summary["std"]
    print(f"mean accuracy {m['accuracy']:.4f} +/- {s['accuracy']:.4f} over {summary['k']} folds")
    return out / "manifests"


def cmd_tune(args, cfg, manifest):
    from .tune import SearchData, SearchSpace, hyperband, random_search

    X, y, _, model_cfg = _training_arrays(cfg, args, manifest)
    t = cfg.tune
    seed = cfg.train.seed
    data = SearchData.split(X, y, t.val_fraction, derive_seed(seed, 5), _smote_for(cfg, derive_seed(seed, 4)))
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "bracket_log.jsonl"
    strategy = args.strategy or t.strategy
    with open(log_path, "a", encoding="utf-8") as sink:
        if strategy == "random":
            result = random_search(SearchSpace(), t.n_trials, t.trial_epochs, data, model_cfg, cfg.train, seed,
                                   t.max_retries, sink)
        else:
            result = hyperband(SearchSpace(), t.max_resource, t.eta, data, model_cfg, cfg.train, seed,
                               t.max_retries, sink)
    manifest.add_output(log_path)
    best = result.best
    _write(out / "best_config.cfg", best.trial.model_config(model_cfg).to_text(), manifest)
    doc = {"strategy": strategy, "ranking": [r.to_dict() for r in result.ranked], "brackets": result.brackets}
    if args.final_cv:
        names = task_class_names(cfg.task)
        doc["final_cv"] = []
        for r in result.ranked[: t.top_k]:
            if r.failed:
                continue
            cv = cross_validate(X, y, r.trial.model_config(model_cfg), cfg.train, names,
                                _smote_for(cfg, derive_seed(seed, 4)))
            doc["final_cv"].append({"trial": r.trial.trial_id, **cv.summary()})
    _write(out / "tune_result.json", json.dumps(doc, indent=2, sort_keys=True) + "\n", manifest)
    print(f"best trial {best.trial.trial_id}: val accuracy {best.val_accuracy:.4f}, "
          f"val loss {best.val_loss:.4f}, config {best.trial.values()}")
    return out / "manifests"


def _baseline_reports(cfg, args, pipeline, test_raws, y_test, task, names, manifest):
    train = _load(cfg, args.train_data or cfg.data.train, manifest)
    y_tr = labels_for_task(train, task)
    raws = [ex.raw for ex in train]
    X_tr, X_te = pipeline.transform(raws), pipeline.transform(test_raws)
    b = cfg.baselines
    preds = {
        "LR": fit_logreg(X_tr, y_tr, b.logreg_lr, b.logreg_epochs, cfg.train.seed).predict(X_te),
        "KNN": knn_predict(X_tr, y_tr, X_te, min(b.knn_k, len(X_tr))),
        "MNB": fit_mnb(pipeline.transform_nonnegative(raws), y_tr, b.mnb_alpha).predict(
            pipeline.transform_nonnegative(test_raws)),
    }
    reports = []
    for name, p in preds.items():
        notes = {"view": "min-max + one-hot"} if name == "MNB" else {}
        reports.append(EvalReport(task, name, confusion(p, y_test, len(names), names), manifest.run_id(), notes))
    return reports


def cmd_evaluate(args, cfg, manifest):
    wpath = _require_file(args.weights, "weights file")
    manifest.add_input(wpath)
    model = weights.load_weights(wpath)
    ppath = _require_file(args.pipeline or wpath.parent / "pipeline.json", "pipeline")
    manifest.add_input(ppath)
    pipeline = Pipeline.load(ppath)
    task = model.config.task
    examples = _load(cfg, args.data, manifest)
    raws = [ex.raw for ex in examples]
    treport = TransformReport()
    X = pipeline.transform(raws, treport)
    y = labels_for_task(examples, task)
    probs = model.forward(X) if len(X) <= 1024 else \
        np.concatenate([model.forward(X[i:i + 1024]) for i in range(0, len(X), 1024)])
    preds = predict_labels(probs, task, args.threshold)
    names = task_class_names(task)
    notes = {"unknown_categories": treport.unknown_by_column(), "threshold": args.threshold}
    report = EvalReport(task, "SCGNet", confusion(preds, y, len(names), names), manifest.run_id(), notes)
    reports = [report]
    if args.baselines:
        reports += _baseline_reports(cfg, args, pipeline, raws, y, task, names, manifest)
    out = Path(args.out) if args.out else wpath.parent
    stem = Path(args.data).stem
    for r in reports:
        _write(out / f"eval_{stem}_{r.algorithm}.json", render_machine(r), manifest)
    table = render_table(reports, comparisons=True, task=task)
    _write(out / f"eval_{stem}.txt", table, manifest)
    print(table, end="")
    return out / "manifests"


def cmd_report(args, cfg, manifest):
    reports = []
    for path in args.inputs:
        p = _require_file(path, "report")
        manifest.add_input(p)
        reports.append(parse_machine(p.read_text(encoding="utf-8")))
    if args.format == "machine":
        if len(reports) != 1:
            raise UsageError("machine format renders exactly one report")
        text = render_machine(reports[0])
    else:
        text = render_table(reports, args.comparisons, reports[0].task)
    if args.out:
        _write(Path(args.out), text, manifest)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return Path(args.out).parent / "manifests" if args.out else None


COMMANDS = {
    "ingest": cmd_ingest,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "cv": cmd_cv,
    "tune": cmd_tune,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        if not argv:
            raise UsageError("no command given")
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no command given")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose or 0, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _run_config(args)
        manifest = _manifest(args, cfg, argv)
        manifest_dir = COMMANDS[args.command](args, cfg, manifest)
        if manifest_dir is not None:
            path = manifest.write(manifest_dir)
            log.info("manifest %s", path)
        return 0
    except (UsageError, ConfigError) as exc:
        print(f"scgnet: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"scgnet: data error: {exc}", file=sys.stderr)
        return 2
    except (ScgnetError, FloatingPointError, OSError) as exc:
        print(f"scgnet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
