"""Versioned JSON persistence for :class:`~ganet.evolve.GanetModel`.

Floats are written with Python's shortest round-trip repr, so a saved model
loads back bit-for-bit.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ModelFormatError, ModelVersionError
from .evolve import GaConfig, GanetModel, Genome
from .graphcore import ImportanceConfig, MapMatrix
from .spectra import PreprocessConfig, SpectrumDataset

FORMAT = "ganet-model"
VERSION = 1


def _dataset_to_dict(ds: SpectrumDataset) -> dict:
    return {
        "wavenumbers": ds.wavenumbers.tolist(),
        "samples": ds.samples.tolist(),
        "labels": list(ds.labels),
        "subject_ids": list(ds.subject_ids),
        "sample_ids": list(ds.sample_ids),
    }


def _dataset_from_dict(d: dict) -> SpectrumDataset:
    k = len(d["wavenumbers"])
    return SpectrumDataset(
        wavenumbers=np.array(d["wavenumbers"], dtype=float),
        samples=np.array(d["samples"], dtype=float).reshape(len(d["samples"]), k),
        labels=tuple(d["labels"]),
        subject_ids=tuple(d["subject_ids"]),
        sample_ids=tuple(d["sample_ids"]),
    )


def model_to_dict(model: GanetModel) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "metric": model.metric,
        "ga_config": model.ga_config.to_dict(),
        "importance_config": model.importance_config.to_dict(),
        "preprocess_config": (
            model.preprocess_config.to_dict() if model.preprocess_config is not None else None
        ),
        "best_genome": {
            "bits": model.best_genome.bits.tolist(),
            "fitness": model.best_genome.fitness,
        },
        "map": model.map.entries.tolist(),
        "importance": model.importance.tolist(),
        "train": _dataset_to_dict(model.train),
        "validation": _dataset_to_dict(model.validation),
        "history": model.history,
        "positive_label": model.positive_label,
    }


def model_from_dict(d: dict) -> GanetModel:
    if not isinstance(d, dict) or d.get("format") != FORMAT:
        raise ModelFormatError("not a GANet model file")
    if d.get("version") != VERSION:
        raise ModelVersionError(
            f"model file version {d.get('version')!r} is not supported (expected {VERSION})"
        )
    try:
        train = _dataset_from_dict(d["train"])
        entries = np.array(d["map"], dtype=np.int64).reshape(train.n_samples, -1)
        pre = d["preprocess_config"]
        return GanetModel(
            best_genome=Genome(np.array(d["best_genome"]["bits"], dtype=np.uint8),
                               d["best_genome"]["fitness"]),
            map=MapMatrix(entries=entries),
            train=train,
            validation=_dataset_from_dict(d["validation"]),
            importance=np.array(d["importance"], dtype=float),
            metric=d["metric"],
            ga_config=GaConfig.from_dict(d["ga_config"]),
            importance_config=ImportanceConfig.from_dict(d["importance_config"]),
            preprocess_config=PreprocessConfig.from_dict(pre) if pre is not None else None,
            history=list(d["history"]),
            positive_label=str(d["positive_label"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"model file is malformed: {exc}") from None


def save_model(model: GanetModel, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> GanetModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelFormatError(f"{path}: cannot read model file ({exc.strerror})") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: model parse error: {exc}") from None
    return model_from_dict(d)
