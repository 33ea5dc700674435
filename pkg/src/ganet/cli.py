"""Command-line front end: ``ganet preprocess|train|evaluate|compare|datagen``.

Exit status: 0 success, 2 input error, 3 config error, 4 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (SyntheticSpec, confusion_counts, generate_synthetic, knng_classify,
                        metrics)
from .config import RunConfig, derive_seed, read_config_file, resolve
from .errors import DimensionError, GanetError, InputError, SplitError, UnknownLabelError
from .evolve import GanetModel, run_ganet
from .modelfile import load_model, save_model
from .reporting import (METRIC_COLUMNS, atomic_write, csv_text, dumps_report, history_csv,
                        metric_row, metrics_dict, new_report)
from .spectra import SpectrumDataset, load_csv, preprocess, save_csv, split_by_subject

log = logging.getLogger("ganet")

EXIT_OK = 0

# (flag, help) for every RunConfig key exposed on the command line
CONFIG_FLAGS = [
    ("preset", "named configuration: ganet-c, ganet-e, ganet-g or ganet-k"),
    ("metric", "similarity metric: euclidean or cosine"),
    ("measure", "vertex importance: degree or pagerank"),
    ("gamma", "exponent on link similarity in the class score"),
    ("q", "candidate neighbours per vertex"),
    ("q-test", "links formed by a query (default: q)"),
    ("reinsertion", "pure or ordered"),
    ("selection", "tournament or roulette"),
    ("tournament-size", None),
    ("crossover", "two_point or uniform"),
    ("crossover-rate", None),
    ("mutation-rate", "per-bit flip probability (default 1/(n*q))"),
    ("population-size", None),
    ("generations", None),
    ("pagerank-damping", None),
    ("pagerank-tol", None),
    ("pagerank-max-iter", None),
    ("seed", "master seed, fanned out to the split, ga and datagen streams"),
    ("train-fraction", None),
    ("validation-fraction", None),
    ("test-fraction", None),
    ("pipeline", "preprocessing preset: amide-i, smoot-diff-norm or none"),
    ("steps", "comma-separated steps from smooth,differentiate,normalize,truncate"),
    ("amide-window", "lo,hi in cm-1"),
    ("savgol-window", None),
    ("savgol-degree", None),
    ("derivative-order", None),
    ("truncate-range", "lo,hi in cm-1"),
    ("positive-label", "label counted as positive for sensitivity"),
]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    g = p.add_argument_group("run configuration (overrides --config)")
    for flag, help_ in CONFIG_FLAGS:
        g.add_argument(f"--{flag}", dest=flag.replace("-", "_"), default=None, help=help_)


def _resolve(args) -> RunConfig:
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    flags = {f.replace("-", "_"): getattr(args, f.replace("-", "_")) for f, _ in CONFIG_FLAGS}
    return resolve(file_values, flags)


def _check_labels(train: SpectrumDataset, validation: SpectrumDataset, test: SpectrumDataset,
                  everything: SpectrumDataset) -> None:
    full = set(everything.labels)
    for name, part in (("train", train), ("validation", validation), ("test", test)):
        missing = sorted(full - set(part.labels))
        if missing:
            raise SplitError(f"{name} split lacks label(s): {', '.join(missing)}")


def _split_and_preprocess(ds: SpectrumDataset, cfg: RunConfig):
    raw = split_by_subject(ds, cfg.split_spec())
    _check_labels(*raw, ds)
    pcfg = cfg.preprocess_config()
    return raw, tuple(preprocess(part, pcfg) for part in raw)


def _check_positive(cfg: RunConfig, ds: SpectrumDataset) -> None:
    if cfg.positive_label not in ds.labels:
        raise SplitError(
            f"positive label {cfg.positive_label!r} does not occur in the dataset "
            f"(labels: {', '.join(ds.classes)})"
        )


def _score(model, test: SpectrumDataset, positive: str):
    pred = model.predict(test) if isinstance(model, GanetModel) else model(test)
    counts = confusion_counts(test.labels, pred, positive)
    return counts, metrics(counts)


# -------------------------------------------------------------------- commands


def cmd_preprocess(args) -> int:
    cfg = _resolve(args)
    ds = load_csv(args.input)
    trace = []
    out = preprocess(ds, cfg.preprocess_config(), trace)
    save_csv(out, args.output)
    print(f"input: {ds.n_wavenumbers} columns, {ds.n_samples} samples")
    for step, k in trace:
        print(f"{step}: {k} columns")
    return EXIT_OK


def train_run(dataset_path, cfg: RunConfig, out_dir) -> tuple[dict, dict]:
    """Train and assemble every output; returns ``(report, files)`` without writing."""
    start = time.perf_counter()
    out_dir = Path(out_dir)
    ds = load_csv(dataset_path)
    _check_positive(cfg, ds)
    raw, (train, validation, test) = _split_and_preprocess(ds, cfg)
    model = run_ganet(train, validation, cfg.ga_config(), cfg.importance_config(), cfg.metric,
                      cfg.preprocess_config())
    model.positive_label = cfg.positive_label
    counts, m = _score(model, test, cfg.positive_label)

    artifacts = {
        "model": str(out_dir / "model.json"),
        "report": str(out_dir / "report.json"),
        "history": str(out_dir / "history.csv"),
        "metrics": str(out_dir / "metrics.csv"),
        "splits": str(out_dir / "splits.csv"),
        "test_split": str(out_dir / "test_split.csv"),
    }
    report = new_report(
        "train",
        dataset=str(dataset_path),
        config=cfg.to_dict(),
        seed=cfg.seed,
        sub_seeds={"split": cfg.sub_seed("split"), "ga": cfg.sub_seed("ga")},
        split_sizes={"train": len(train), "validation": len(validation), "test": len(test)},
        n_wavenumbers=train.n_wavenumbers,
        history=model.history,
        best_validation_fitness=model.best_genome.fitness,
        test={"counts": counts.to_dict(), "metrics": metrics_dict(m)},
        artifacts=artifacts,
    )
    split_rows = [[sid, subj, lab, name]
                  for name, part in zip(("train", "validation", "test"), raw)
                  for sid, subj, lab in zip(part.sample_ids, part.subject_ids, part.labels)]
    payloads = {
        "model": model,
        "history": history_csv(model.history),
        "metrics": csv_text(METRIC_COLUMNS, [metric_row("ganet", None, counts, m)]),
        "splits": csv_text(["sample_id", "subject_id", "label", "split"], split_rows),
        "test_split": raw[2],
        "report": report,
    }
    report["wall_clock_seconds"] = round(time.perf_counter() - start, 3)
    return report, {k: (artifacts[k], v) for k, v in payloads.items()}


def _write_outputs(files: dict) -> None:
    for path, payload in files.values():
        if isinstance(payload, GanetModel):
            save_model(payload, path)
        elif isinstance(payload, SpectrumDataset):
            save_csv(payload, path)
        elif isinstance(payload, dict):
            atomic_write(path, dumps_report(payload))
        else:
            atomic_write(path, payload)


def cmd_train(args) -> int:
    cfg = _resolve(args)
    report, files = train_run(args.dataset, cfg, args.out)
    _write_outputs(files)
    t = report["test"]["metrics"]
    print(f"best validation fitness: {report['best_validation_fitness']:.4f}")
    print("test: " + ", ".join(f"{k}={v:.4f}" for k, v in t.items()))
    print(f"wrote {report['artifacts']['model']} and {report['artifacts']['report']}")
    return EXIT_OK


def evaluate_model(model: GanetModel, ds: SpectrumDataset) -> dict:
    unknown = sorted(set(ds.labels) - set(model.classes))
    if unknown:
        raise UnknownLabelError(f"unknown label(s) not seen in training: {', '.join(unknown)}")
    if model.preprocess_config is not None:
        ds = preprocess(ds, model.preprocess_config)
    ref = model.train.wavenumbers
    if ds.n_wavenumbers != ref.size or not np.allclose(ds.wavenumbers, ref, rtol=0, atol=1e-9):
        raise DimensionError(
            f"dataset has {ds.n_wavenumbers} columns after preprocessing; "
            f"the model expects {ref.size} on its training axis"
        )
    counts, m = _score(model, ds, model.positive_label)
    return {"n_samples": len(ds), "counts": counts.to_dict(), "metrics": metrics_dict(m)}


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    ds = load_csv(args.dataset)
    result = evaluate_model(model, ds)
    report = new_report("evaluate", model=str(args.model), dataset=str(args.dataset), **result)
    text = dumps_report(report)
    if args.out:
        atomic_write(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def compare_run(dataset_path, cfg: RunConfig, ks: list[int]) -> tuple[dict, list[list]]:
    ds = load_csv(dataset_path)
    _check_positive(cfg, ds)
    _, (train, validation, test) = _split_and_preprocess(ds, cfg)
    icfg = cfg.importance_config()
    model = run_ganet(train, validation, cfg.ga_config(), icfg, cfg.metric,
                      cfg.preprocess_config())
    rows = []
    counts, m = _score(model, test, cfg.positive_label)
    rows.append(metric_row("ganet", cfg.q, counts, m))
    for k in ks:
        counts, m = _score(lambda d: knng_classify(train, d, k, cfg.metric, icfg), test,
                           cfg.positive_label)
        rows.append(metric_row("knng", k, counts, m))
    report = new_report(
        "compare",
        dataset=str(dataset_path),
        config=cfg.to_dict(),
        seed=cfg.seed,
        split_sizes={"train": len(train), "validation": len(validation), "test": len(test)},
        k_values=ks,
        results=[dict(zip(METRIC_COLUMNS, r)) for r in rows],
    )
    return report, rows


def cmd_compare(args) -> int:
    cfg = _resolve(args)
    try:
        ks = [int(k) for k in args.k.split(",") if k.strip()]
    except ValueError:
        raise InputError(f"--k expects comma-separated integers, got {args.k!r}") from None
    start = time.perf_counter()
    report, rows = compare_run(args.dataset, cfg, ks)
    report["wall_clock_seconds"] = round(time.perf_counter() - start, 3)
    out = Path(args.out)
    table = csv_text(METRIC_COLUMNS, rows)
    atomic_write(out / "comparison.csv", table)
    atomic_write(out / "comparison.json", dumps_report(report))
    sys.stdout.write(table)
    return EXIT_OK


def cmd_datagen(args) -> int:
    spec = SyntheticSpec(
        n_subjects=args.subjects,
        replicates_per_subject=args.replicates,
        n_wavenumbers=args.wavenumbers,
        class_separation=args.separation,
        noise_sd=args.noise,
        seed=derive_seed(args.seed, "datagen"),
    )
    ds = generate_synthetic(spec)
    save_csv(ds, args.output)
    print(f"wrote {ds.n_samples} spectra ({args.subjects} subjects) to {args.output}")
    return EXIT_OK


# ------------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ganet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="apply the preprocessing pipeline to a CSV")
    p.add_argument("input")
    p.add_argument("output")
    _add_config_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="split, preprocess, evolve and test a GANet model")
    p.add_argument("dataset")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model on a dataset")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--out", help="also write the report to this path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="GANet against kNN graphs on identical splits")
    p.add_argument("dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k", default="1,3,5", help="comma-separated kNN sizes")
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("datagen", help="write a synthetic two-class spectral dataset")
    p.add_argument("output")
    p.add_argument("--subjects", type=int, default=53)
    p.add_argument("--replicates", type=int, default=3)
    p.add_argument("--wavenumbers", type=int, default=200)
    p.add_argument("--separation", type=float, default=0.04)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_datagen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GanetError as exc:
        print(f"ganet {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"ganet {args.command}: invalid value: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"ganet {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled error", exc_info=True)
        print(f"ganet {args.command}: runtime error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
