"""Spectral datasets: CSV ingestion, per-sample preprocessing and grouped splits.

All transforms are pure: they return a new :class:`SpectrumDataset` and never
touch the input. Wavenumbers are always stored in descending order.
"""
from __future__ import annotations

import csv
import os
import tempfile
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import savgol_filter

from .errors import ConfigError, IngestError, PreprocessError, SplitError

HEADER_PREFIX = ("sample_id", "subject_id", "label")

STEP_SMOOTH = "smooth"
STEP_DIFFERENTIATE = "differentiate"
STEP_NORMALIZE = "normalize"
STEP_TRUNCATE = "truncate"
KNOWN_STEPS = (STEP_SMOOTH, STEP_DIFFERENTIATE, STEP_NORMALIZE, STEP_TRUNCATE)

PREPROCESS_PRESETS = {
    "amide-i": (STEP_NORMALIZE, STEP_TRUNCATE),
    "smoot-diff-norm": (STEP_SMOOTH, STEP_DIFFERENTIATE, STEP_NORMALIZE, STEP_TRUNCATE),
    "none": (),
}


@dataclass(frozen=True, eq=False)
class SpectrumDataset:
    """Labelled absorbance spectra sharing one wavenumber axis.

    ``samples`` has shape ``(n_samples, n_wavenumbers)``. Each row carries a
    class label, the subject it was measured from (replicates share a subject)
    and a unique sample id.
    """

    wavenumbers: np.ndarray
    samples: np.ndarray
    labels: tuple[str, ...]
    subject_ids: tuple[str, ...]
    sample_ids: tuple[str, ...]

    def __post_init__(self):
        wn = np.asarray(self.wavenumbers, dtype=float).ravel()
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 1 and wn.size == 0 and x.size == 0:
            x = x.reshape(0, 0)
        if x.ndim != 2:
            raise ValueError("samples must be a 2-D matrix")
        if x.shape[1] != wn.size:
            raise ValueError(
                f"samples have {x.shape[1]} columns but there are {wn.size} wavenumbers"
            )
        n = x.shape[0]
        labels = tuple(str(v) for v in self.labels)
        subjects = tuple(str(v) for v in self.subject_ids)
        ids = tuple(str(v) for v in self.sample_ids)
        if not (len(labels) == len(subjects) == len(ids) == n):
            raise ValueError("labels, subject_ids and sample_ids must have one entry per sample")
        if len(set(ids)) != n:
            raise ValueError("sample_ids must be unique")
        if wn.size > 1:
            d = np.diff(wn)
            if np.all(d > 0):
                wn = wn[::-1]
                x = x[:, ::-1]
            elif not np.all(d < 0):
                raise ValueError("wavenumbers must be strictly monotonic")
        wn = wn.copy()
        x = np.ascontiguousarray(x, dtype=float).copy()
        wn.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "wavenumbers", wn)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "subject_ids", subjects)
        object.__setattr__(self, "sample_ids", ids)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_wavenumbers(self) -> int:
        return self.wavenumbers.size

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))

    def __len__(self):
        return self.n_samples

    def with_samples(self, samples: np.ndarray, wavenumbers: np.ndarray | None = None) -> "SpectrumDataset":
        """Same metadata, new spectral matrix (and optionally a new axis)."""
        return SpectrumDataset(
            wavenumbers=self.wavenumbers if wavenumbers is None else wavenumbers,
            samples=samples,
            labels=self.labels,
            subject_ids=self.subject_ids,
            sample_ids=self.sample_ids,
        )

    def subset(self, rows: Sequence[int]) -> "SpectrumDataset":
        rows = list(rows)
        return SpectrumDataset(
            wavenumbers=self.wavenumbers,
            samples=self.samples[rows] if rows else np.empty((0, self.n_wavenumbers)),
            labels=tuple(self.labels[i] for i in rows),
            subject_ids=tuple(self.subject_ids[i] for i in rows),
            sample_ids=tuple(self.sample_ids[i] for i in rows),
        )

    def equals(self, other: "SpectrumDataset", atol: float = 0.0) -> bool:
        return (
            self.labels == other.labels
            and self.subject_ids == other.subject_ids
            and self.sample_ids == other.sample_ids
            and self.wavenumbers.shape == other.wavenumbers.shape
            and self.samples.shape == other.samples.shape
            and np.allclose(self.wavenumbers, other.wavenumbers, rtol=0, atol=atol)
            and np.allclose(self.samples, other.samples, rtol=0, atol=atol)
        )


@dataclass(frozen=True)
class PreprocessConfig:
    """Parameters of the preprocessing pipeline.

    ``step_order`` lists the enabled steps, applied left to right. The
    ``differentiate`` step reuses the Savitzky-Golay window and degree and
    takes the derivative order from ``derivative_order``.
    """

    amide_window: tuple[float, float] = (1630.0, 1660.0)
    savgol_window: int = 9
    savgol_degree: int = 2
    derivative_order: int = 1
    truncate_range: tuple[float, float] = (900.0, 1800.0)
    step_order: tuple[str, ...] = (STEP_SMOOTH, STEP_DIFFERENTIATE, STEP_NORMALIZE, STEP_TRUNCATE)

    def __post_init__(self):
        object.__setattr__(self, "amide_window", tuple(float(v) for v in self.amide_window))
        object.__setattr__(self, "truncate_range", tuple(float(v) for v in self.truncate_range))
        object.__setattr__(self, "step_order", tuple(self.step_order))
        if self.savgol_window % 2 != 1 or self.savgol_window <= self.savgol_degree:
            raise ConfigError("savgol_window must be odd and larger than savgol_degree")
        if self.savgol_degree < 0:
            raise ConfigError("savgol_degree must be non-negative")
        if self.derivative_order not in (0, 1):
            raise ConfigError("derivative_order must be 0 or 1")
        lo, hi = self.truncate_range
        if not lo < hi:
            raise ConfigError("truncate_range lower bound must be below the upper bound")
        if self.amide_window[0] > self.amide_window[1]:
            raise ConfigError("amide_window bounds are reversed")
        unknown = [s for s in self.step_order if s not in KNOWN_STEPS]
        if unknown:
            raise ConfigError(f"unknown preprocessing step(s): {', '.join(unknown)}")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "PreprocessConfig":
        try:
            steps = PREPROCESS_PRESETS[name]
        except KeyError:
            raise ConfigError(
                f"unknown preprocessing preset {name!r}; choose from {sorted(PREPROCESS_PRESETS)}"
            ) from None
        return cls(step_order=steps, **overrides)

    def to_dict(self) -> dict:
        return {
            "amide_window": list(self.amide_window),
            "savgol_window": self.savgol_window,
            "savgol_degree": self.savgol_degree,
            "derivative_order": self.derivative_order,
            "truncate_range": list(self.truncate_range),
            "step_order": list(self.step_order),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessConfig":
        return cls(
            amide_window=tuple(d["amide_window"]),
            savgol_window=int(d["savgol_window"]),
            savgol_degree=int(d["savgol_degree"]),
            derivative_order=int(d["derivative_order"]),
            truncate_range=tuple(d["truncate_range"]),
            step_order=tuple(d["step_order"]),
        )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 93 / 159
    validation_fraction: float = 33 / 159
    test_fraction: float = 33 / 159
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(not 0.0 < f < 1.0 for f in fr):
            raise ConfigError("split fractions must each lie in (0, 1)")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions sum to {sum(fr)!r}, expected 1")
        if self.seed < 0:
            raise ConfigError("split seed must be non-negative")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_fraction, self.validation_fraction, self.test_fraction)


# --------------------------------------------------------------------------- io


def load_csv(path) -> SpectrumDataset:
    """Read ``sample_id,subject_id,label,<wn_1>,...`` rows into a dataset."""
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"{path}: no such file")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if tuple(h.lower() for h in header[:3]) != HEADER_PREFIX:
            raise IngestError(
                f"{path}: header must start with sample_id,subject_id,label (got {header[:3]})"
            )
        if len(header) < 4:
            raise IngestError(f"{path}: header has no wavenumber columns")
        wn = []
        for col, h in enumerate(header[3:], start=4):
            try:
                wn.append(float(h))
            except ValueError:
                raise IngestError(f"{path}: header column {col} ({h!r}) is not a wavenumber") from None
        k = len(wn)
        ids, subjects, labels, rows = [], [], [], []
        seen = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != k + 3:
                raise IngestError(
                    f"{path}: row {lineno} has {len(rec) - 3} values for {k} wavenumber columns"
                )
            sid = rec[0].strip()
            if sid in seen:
                raise IngestError(
                    f"{path}: row {lineno} repeats sample_id {sid!r} (first seen on row {seen[sid]})"
                )
            seen[sid] = lineno
            values = []
            for col, cell in enumerate(rec[3:], start=4):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise IngestError(
                        f"{path}: row {lineno}, column {col} ({header[col - 1]}): "
                        f"non-numeric value {cell!r}"
                    ) from None
            ids.append(sid)
            subjects.append(rec[1].strip())
            labels.append(rec[2].strip())
            rows.append(values)
    try:
        return SpectrumDataset(
            wavenumbers=np.array(wn),
            samples=np.array(rows, dtype=float).reshape(len(rows), k),
            labels=tuple(labels),
            subject_ids=tuple(subjects),
            sample_ids=tuple(ids),
        )
    except ValueError as exc:
        raise IngestError(f"{path}: {exc}") from None


def _fmt(x: float) -> str:
    # shortest repr round-trips float64 exactly
    return repr(float(x))


def save_csv(ds: SpectrumDataset, path) -> None:
    """Write ``ds`` atomically in the schema read by :func:`load_csv`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(HEADER_PREFIX) + [_fmt(v) for v in ds.wavenumbers])
            for i in range(ds.n_samples):
                w.writerow(
                    [ds.sample_ids[i], ds.subject_ids[i], ds.labels[i]]
                    + [_fmt(v) for v in ds.samples[i]]
                )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ------------------------------------------------------------------ transforms


def _window_mask(wavenumbers: np.ndarray, window) -> np.ndarray:
    lo, hi = sorted(float(v) for v in window)
    return (wavenumbers >= lo) & (wavenumbers <= hi)


def normalize_amide(ds: SpectrumDataset, window=(1630.0, 1660.0)) -> SpectrumDataset:
    """Divide each spectrum by its own maximum inside ``window`` (the amide I band)."""
    mask = _window_mask(ds.wavenumbers, window)
    if not mask.any():
        raise PreprocessError(f"amide window {tuple(window)} contains no wavenumber columns")
    peak = ds.samples[:, mask].max(axis=1)
    bad = [ds.sample_ids[i] for i in np.flatnonzero(~(peak > 0))]
    if bad:
        raise PreprocessError(
            "non-positive maximum inside the amide window for sample(s): " + ", ".join(bad)
        )
    return ds.with_samples(ds.samples / peak[:, None])


def _is_uniform(wavenumbers: np.ndarray) -> bool:
    if wavenumbers.size < 3:
        return True
    d = np.diff(wavenumbers)
    return bool(np.allclose(d, d[0], rtol=1e-6, atol=0))


def savgol_smooth(ds: SpectrumDataset, window: int = 9, degree: int = 2, deriv: int = 0) -> SpectrumDataset:
    """Savitzky-Golay filter each spectrum along the wavenumber index.

    ``deriv=1`` returns the first derivative per array index. Edges are handled
    by fitting the polynomial to the outermost full window, so the axis length
    is preserved and low-degree polynomials pass through unchanged.
    """
    if window % 2 != 1 or window < 1:
        raise ConfigError(f"Savitzky-Golay window must be a positive odd integer, got {window}")
    if degree < 0 or degree >= window:
        raise ConfigError(f"Savitzky-Golay degree {degree} must be below the window {window}")
    if deriv not in (0, 1):
        raise ConfigError(f"derivative order must be 0 or 1, got {deriv}")
    if window > ds.n_wavenumbers:
        raise ConfigError(
            f"Savitzky-Golay window {window} exceeds the spectrum length {ds.n_wavenumbers}"
        )
    if deriv == 1 and not _is_uniform(ds.wavenumbers):
        raise ConfigError("differentiation requires a uniformly spaced wavenumber grid")
    if ds.n_samples == 0:
        return ds
    out = savgol_filter(ds.samples, window, degree, deriv=deriv, delta=1.0, axis=1, mode="interp")
    return ds.with_samples(out)


def truncate(ds: SpectrumDataset, range=(900.0, 1800.0)) -> SpectrumDataset:
    """Keep the columns whose wavenumber lies in the closed interval ``range``."""
    lo, hi = (float(v) for v in range)
    if lo > hi:
        raise ConfigError(f"truncation range {tuple(range)} is reversed")
    mask = (ds.wavenumbers >= lo) & (ds.wavenumbers <= hi)
    if not mask.any():
        raise ConfigError(f"truncation range [{lo}, {hi}] keeps no wavenumber columns")
    return ds.with_samples(ds.samples[:, mask], ds.wavenumbers[mask])


def apply_step(ds: SpectrumDataset, step: str, cfg: PreprocessConfig) -> SpectrumDataset:
    if step == STEP_SMOOTH:
        return savgol_smooth(ds, cfg.savgol_window, cfg.savgol_degree, 0)
    if step == STEP_DIFFERENTIATE:
        return savgol_smooth(ds, cfg.savgol_window, cfg.savgol_degree, cfg.derivative_order)
    if step == STEP_NORMALIZE:
        return normalize_amide(ds, cfg.amide_window)
    if step == STEP_TRUNCATE:
        return truncate(ds, cfg.truncate_range)
    raise ConfigError(f"unknown preprocessing step {step!r}")


def preprocess(ds: SpectrumDataset, cfg: PreprocessConfig, trace: list | None = None) -> SpectrumDataset:
    """Run ``cfg.step_order`` over ``ds``.

    If ``trace`` is given, ``(step, n_columns)`` is appended after every step.
    """
    for step in cfg.step_order:
        ds = apply_step(ds, step, cfg)
        if trace is not None:
            trace.append((step, ds.n_wavenumbers))
    return ds


# ---------------------------------------------------------------------- splits


def _subject_table(ds: SpectrumDataset):
    rows = defaultdict(list)
    label_of = {}
    for i, (s, lab) in enumerate(zip(ds.subject_ids, ds.labels)):
        rows[s].append(i)
        if label_of.setdefault(s, lab) != lab:
            raise SplitError(f"subject {s!r} carries more than one label")
    return rows, label_of


def split_by_subject(ds: SpectrumDataset, spec: SplitSpec):
    """Partition subjects into train/validation/test, stratified by label.

    Subjects are shuffled per label with ``spec.seed`` and interleaved across
    labels; each one then goes to the split with the largest remaining sample
    deficit that can still absorb it, preferring splits that lack the
    subject's label and then the split furthest behind its per-label target.
    """
    rows, label_of = _subject_table(ds)
    if len(rows) < 3:
        raise SplitError(f"need at least 3 subjects, found {len(rows)}")
    by_label = defaultdict(list)
    for s in sorted(rows):
        by_label[label_of[s]].append(s)
    few = {lab: len(ss) for lab, ss in by_label.items() if len(ss) < 3}
    if few:
        detail = ", ".join(f"{lab!r} ({n})" for lab, n in sorted(few.items()))
        raise SplitError(f"each label needs at least 3 subjects; too few for {detail}")

    rng = np.random.default_rng(spec.seed)
    fractions = np.array(spec.fractions)
    order = []
    for lab in sorted(by_label):
        ss = by_label[lab]
        perm = rng.permutation(len(ss))
        for rank, j in enumerate(perm):
            order.append(((rank + 0.5) / len(ss), lab, ss[j]))
    order.sort(key=lambda t: (t[0], t[1]))

    target = fractions * ds.n_samples
    filled = np.zeros(3)
    label_total = {lab: sum(len(rows[s]) for s in ss) for lab, ss in by_label.items()}
    label_filled = {lab: np.zeros(3) for lab in by_label}
    assignment = [[], [], []]
    for _, lab, s in order:
        size = len(rows[s])
        deficit = target - filled
        label_deficit = fractions * label_total[lab] - label_filled[lab]
        missing = label_filled[lab] == 0
        key = lambda k: (
            deficit[k] >= size - 1e-9,
            missing[k],
            label_deficit[k],
            deficit[k],
            -k,
        )
        k = max(range(3), key=key)
        assignment[k].append(s)
        filled[k] += size
        label_filled[lab][k] += size

    parts = []
    for subjects in assignment:
        members = sorted(i for s in subjects for i in rows[s])
        parts.append(ds.subset(members))
    return tuple(parts)


def assert_same_axis(*datasets: SpectrumDataset) -> None:
    ref = datasets[0]
    for other in datasets[1:]:
        if other.wavenumbers.shape != ref.wavenumbers.shape or not np.allclose(
            other.wavenumbers, ref.wavenumbers, rtol=0, atol=1e-9
        ):
            raise PreprocessError("datasets do not share a wavenumber axis")
