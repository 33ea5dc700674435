import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ganet.baselines import SyntheticSpec, generate_synthetic
from ganet.spectra import SpectrumDataset


@pytest.fixture
def tiny():
    return SpectrumDataset(
        wavenumbers=[1800.0, 1700.0, 900.0],
        samples=[[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9]],
        labels=["ASD", "control", "ASD"],
        subject_ids=["a", "b", "c"],
        sample_ids=["a1", "b1", "c1"],
    )


@pytest.fixture(scope="session")
def synthetic60():
    """60 spectra: 20 subjects x 3 replicates."""
    return generate_synthetic(SyntheticSpec(n_subjects=20, n_wavenumbers=120,
                                            class_separation=0.04, seed=5))


def blobs(n_per_class=10, dim=4, sep=6.0, seed=0):
    """Two Gaussian clusters as a dataset (labels A and B)."""
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 1.0, (n_per_class, dim))
    b = rng.normal(sep, 1.0, (n_per_class, dim))
    x = np.vstack([a, b])
    n = len(x)
    return SpectrumDataset(
        wavenumbers=np.arange(dim, 0, -1, dtype=float),
        samples=x,
        labels=["A"] * n_per_class + ["B"] * n_per_class,
        subject_ids=[f"s{i}" for i in range(n)],
        sample_ids=[f"x{i}" for i in range(n)],
    )


_ACCEPTANCE = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the summary."""

    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
