"""Command line entry point: ``bsac {prepare,train,predict,cv,sweep}``.

Exit codes: 0 success, 1 internal error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .archive import ArchiveError, file_fingerprint, load_archive, model_from_dict, save_model, write_atomic
from .config import DATASET_KINDS, ConfigError, RunConfig, build_config, read_config_file
from .data import (
    Dataset,
    apply_preprocess,
    clean_generic,
    clean_lending_club,
    clean_taiwan,
    fit_preprocess,
    load_csv,
    load_lending_club_csv,
    load_prepared,
    load_taiwan_csv,
    prepare_lending_club,
    prepare_taiwan,
    write_prepared,
)
from .ensemble import bsac_predict, imbalance_ratio, train_bsac
from .evaluation import CVReport, fold_split, rescale_split, run_cv, stratified_kfold
from .metrics import confusion, metrics
from .rng import Rng

log = logging.getLogger("bsac")

REPORT_COLUMNS = ("recall", "f1", "g_mean", "specificity", "precision", "accuracy")
REPORT_HEADERS = ("Recall (TPR)", "F1 score", "G-mean", "Specificity (TNR)", "Precision", "Accuracy")


# --- data loading -------------------------------------------------------------

def _require_input(cfg: RunConfig) -> Path:
    if not cfg.input:
        raise ConfigError("--input is required")
    path = Path(cfg.input)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return path


def load_dataset(cfg: RunConfig) -> Dataset:
    """Fully prepared dataset (preprocessing fit on every row)."""
    path = _require_input(cfg)
    if cfg.dataset == "prepared":
        return load_prepared(path)
    if cfg.dataset == "taiwan":
        return prepare_taiwan(load_taiwan_csv(path))
    if cfg.dataset == "lendingclub":
        return prepare_lending_club(load_lending_club_csv(path))
    table, schema = clean_generic(load_csv(path), cfg.target)
    return apply_preprocess(table, fit_preprocess(table, schema))


def load_clean_table(kind: str, path, target: str, training: bool):
    if kind == "taiwan":
        return clean_taiwan(load_taiwan_csv(path), require_target=training)
    if kind == "lendingclub":
        return clean_lending_club(load_lending_club_csv(path, training=training), require_target=training)
    return clean_generic(load_csv(path), target, require_target=training)


# --- report formatting ----------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.4f}"


def cv_rows(report: CVReport) -> list[dict]:
    rows = []
    for f in report.folds:
        row = {"fold": str(f.fold)}
        row.update({c: _fmt(getattr(f.metrics, c)) for c in REPORT_COLUMNS})
        row.update(tp=f.confusion.tp, fp=f.confusion.fp, tn=f.confusion.tn, fn=f.confusion.fn,
                   gammas=";".join(f"{g:g}" for g in f.gammas))
        rows.append(row)
    for label, stats in (("mean", report.mean), ("std", report.std)):
        row = {"fold": label}
        row.update({c: _fmt(stats[c]) for c in REPORT_COLUMNS})
        row.update(tp="", fp="", tn="", fn="", gammas="")
        rows.append(row)
    return rows


def cv_csv(report: CVReport) -> str:
    buf = io.StringIO()
    rows = cv_rows(report)
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cv_table(report: CVReport) -> str:
    headers = ("Fold",) + REPORT_HEADERS + ("Gammas",)
    body = [[r["fold"]] + [r[c] for c in REPORT_COLUMNS] + [r["gammas"].replace(";", " ")]
            for r in cv_rows(report)]
    widths = [max(len(h), *(len(row[i]) for row in body)) for i, h in enumerate(headers)]
    line = "  ".join("-" * w for w in widths)

    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    k = len(report.folds)
    out = [fmt(headers), line] + [fmt(r) for r in body[:k]] + [line] + [fmt(r) for r in body[k:]]
    return "\n".join(out) + "\n"


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fold", "subset_id", "gamma", "val_f1", "selected"])
    for r in rows:
        w.writerow([r["fold"], r["subset_id"], f"{r['gamma']:g}", _fmt(r["val_f1"]), int(r["selected"])])
    return buf.getvalue()


def _write_metadata(out: Path, cfg: RunConfig, command: str) -> None:
    meta = {
        "command": command,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config": cfg.snapshot(),
        "input_sha256": file_fingerprint(cfg.input) if cfg.input and Path(cfg.input).is_file() else None,
    }
    write_atomic(out / "run_metadata.json", json.dumps(meta, indent=2) + "\n")


# --- commands -----------------------------------------------------------------

def cmd_prepare(cfg: RunConfig) -> int:
    data = load_dataset(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    write_prepared(data, buf)
    write_atomic(out / "dataset.csv", buf.getvalue())
    ratio, k = imbalance_ratio(data.labels)
    schema = {
        "dataset": cfg.dataset,
        "n_rows": len(data),
        "n_features": data.n_features,
        "feature_names": list(data.feature_names),
        "positives": int(data.labels.sum()),
        "negatives": int(len(data) - data.labels.sum()),
        "imbalance_ratio": round(ratio, 6),
        "subset_count": k,
    }
    write_atomic(out / "schema.json", json.dumps(schema, indent=2) + "\n")
    print(f"{len(data)} rows, {data.n_features} features, imbalance ratio {ratio:.2f} -> {k} subsets")
    return 0


def cmd_cv(cfg: RunConfig) -> int:
    data = load_dataset(cfg)
    base = cfg.sa_config(data.n_features)
    log.info("cv: %d rows, arch %s, %d epochs, gammas %s, k=%d",
             len(data), base.layer_sizes, base.epochs, list(cfg.gamma_grid), cfg.folds)
    report = run_cv(data, base, cfg.gamma_grid, cfg.folds, Rng(cfg.seed))
    out = Path(cfg.out)
    sweep = [{"fold": f.fold, **r} for f in report.folds for r in f.sweep]
    write_atomic(out / "cv_report.csv", cv_csv(report))
    write_atomic(out / "cv_report.txt", cv_table(report))
    write_atomic(out / "gamma_sweep.csv", sweep_csv(sweep))
    _write_metadata(out, cfg, "cv")
    print(cv_table(report), end="")
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    data = load_dataset(cfg)
    base = cfg.sa_config(data.n_features)
    rng = Rng(cfg.seed)
    folds = stratified_kfold(data.labels, cfg.folds, rng)
    rows = []
    for i in range(cfg.folds):
        train_idx, val_idx, test_idx = fold_split(folds, i, cfg.folds)
        train, val, _ = rescale_split(data, train_idx, val_idx, test_idx)
        model = train_bsac(train, val, base, cfg.gamma_grid, rng.derive(i))
        rows.extend({"fold": i, **r} for r in model.sweep)
    out = Path(cfg.out)
    write_atomic(out / "gamma_sweep.csv", sweep_csv(rows))
    _write_metadata(out, cfg, "sweep")
    print(sweep_csv(rows), end="")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    path = _require_input(cfg)
    rng = Rng(cfg.seed)
    if cfg.dataset == "prepared":
        data, params = load_prepared(path), None
    else:
        table, schema = load_clean_table(cfg.dataset, path, cfg.target, training=True)
        data, params = None, schema
    labels = data.labels if data is not None else table[schema.target].values
    k = max(3, round(1.0 / cfg.val_fraction))
    folds = stratified_kfold(labels, k, rng)
    val_idx, train_idx = np.flatnonzero(folds == 0), np.flatnonzero(folds != 0)
    if data is None:
        params = fit_preprocess(table.take(train_idx), schema)
        train, val = apply_preprocess(table.take(train_idx), params), apply_preprocess(table.take(val_idx), params)
    else:
        train, val = data.take(train_idx), data.take(val_idx)
    base = cfg.sa_config(train.n_features)
    model = train_bsac(train, val, base, cfg.gamma_grid, rng.derive(0))
    model.preprocess = params
    out = Path(cfg.out)
    pred, _ = bsac_predict(model, val.features)
    m = metrics(confusion(val.labels, pred))
    save_model(
        out / "model.json", model, config=cfg.snapshot(), dataset_kind=cfg.dataset,
        metadata={"feature_names": list(train.feature_names), "dataset_sha256": file_fingerprint(path),
                  "created": time.strftime("%Y-%m-%dT%H:%M:%S%z")},
    )
    print(f"saved {len(model.base_models)} base classifiers (gammas {model.gammas}) to {out / 'model.json'}")
    print(f"validation: recall {m.recall:.4f}  F1 {m.f1:.4f}  G-mean {m.g_mean:.4f}  specificity {m.specificity:.4f}")
    return 0


def predict_features(archive: dict, path, target: str = "target"):
    """Feature matrix (and labels, when present) for ``path`` as the archive expects it."""
    model = model_from_dict(archive)
    kind = archive.get("dataset_kind") or "generic-csv"
    names = archive.get("metadata", {}).get("feature_names")
    if model.preprocess is None:
        table = load_csv(path)
        absent = [n for n in names if n not in table]
        if absent:
            raise ArchiveError(f"input is missing feature columns: {absent}")
        x = np.column_stack([table[n].values for n in names])
        y = table["label"].values if "label" in table else None
        return model, x, y
    table, _ = load_clean_table(kind, path, archive.get("config", {}).get("target", target), training=False)
    absent = [c for c in model.preprocess.source_columns if c not in table]
    if absent:
        raise ArchiveError(f"input is missing feature columns: {absent}")
    data = apply_preprocess(table, model.preprocess)
    return model, data.features, data.labels


def cmd_predict(cfg: RunConfig) -> int:
    path = _require_input(cfg)
    if not cfg.model:
        raise ConfigError("--model is required for predict")
    if not Path(cfg.model).is_file():
        raise FileNotFoundError(f"model archive not found: {cfg.model}")
    model, x, y = predict_features(load_archive(cfg.model), path, cfg.target)
    labels, fraction = bsac_predict(model, x)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "label", "positive_vote_fraction"])
    for i, (lab, frac) in enumerate(zip(labels, fraction)):
        w.writerow([i, int(lab), repr(float(frac))])
    out = Path(cfg.out)
    write_atomic(out / "predictions.csv", buf.getvalue())
    print(f"wrote {len(labels)} predictions to {out / 'predictions.csv'}")
    if y is not None:
        m = metrics(confusion(y, labels))
        print(f"recall {m.recall:.4f}  F1 {m.f1:.4f}  G-mean {m.g_mean:.4f}  specificity {m.specificity:.4f}")
    return 0


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "predict": cmd_predict, "cv": cmd_cv, "sweep": cmd_sweep}
COMMAND_HELP = {
    "prepare": "write the prepared feature matrix and a schema report",
    "train": "fit one BSAC pool on a stratified train/validation split and save it",
    "predict": "label rows of a CSV with a saved model",
    "cv": "stratified k-fold cross-validation with per-fold gamma selection",
    "sweep": "validation F1 for every base classifier and gamma",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file (flags override it)")
    common.add_argument("--dataset", choices=DATASET_KINDS)
    common.add_argument("--input", help="input CSV")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--batch-size", type=int, dest="batch_size")
    common.add_argument("--learning-rate", type=float, dest="learning_rate")
    common.add_argument("--gamma-grid", dest="gamma_grid", help="comma-separated gamma values")
    common.add_argument("--folds", type=int)
    common.add_argument("--arch", help="comma-separated layer sizes, e.g. 32,16,8,5,8,16,32")
    common.add_argument("--target", help="label column for generic-csv input")
    common.add_argument("--val-fraction", type=float, dest="val_fraction")
    common.add_argument("--fast", action="store_const", const=True,
                        help="50 epochs and gamma grid 0.1,0.5,0.9 unless overridden")
    common.add_argument("--model", help="model archive (predict)")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="bsac", description="Bagging supervised autoencoder classifier")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMAND_HELP[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "quiet")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(file_values, flags)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ArchiveError, FileNotFoundError) as exc:
        print(f"bsac {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"bsac {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
