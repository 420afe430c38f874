import contextlib

import numpy as np
import pytest

from scgnet.dataset import AttackTaxonomy, label_records, read_records
from scgnet.model import ConvBlock, GruBlock, ScgnetConfig
from scgnet.preprocess import fit_pipeline
from scgnet.synthetic import fixture_path

# criterion name -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@contextlib.contextmanager
def criterion(name):
    """Record one acceptance criterion as PASS or FAIL, re-raising any failure."""
    detail = {"text": ""}
    try:
        yield detail
    except BaseException as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        ACCEPTANCE[name] = (False, msg[:160])
        print(f"FAIL  {name}: {msg[:160]}")
        raise
    ACCEPTANCE[name] = (True, detail["text"])
    print(f"PASS  {name}" + (f": {detail['text']}" if detail["text"] else ""))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def fixture_records():
    return read_records(fixture_path())


@pytest.fixture(scope="session")
def fixture_examples(fixture_records):
    return label_records(fixture_records, AttackTaxonomy.default())


@pytest.fixture(scope="session")
def fixture_pipeline(fixture_records):
    return fit_pipeline(fixture_records)


def tiny_config(task="binary", activation="relu", input_length=12, **kw):
    return ScgnetConfig(
        conv_blocks=(ConvBlock(4, 2, 0.2),),
        gru_blocks=(GruBlock(3, 0.2),),
        dense_units=8,
        task=task,
        activation=activation,
        input_length=input_length,
        **kw,
    )


def toy_xy(n=64, d=12, seed=0, n_classes=2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)).astype(np.float32)
    if n_classes == 2:
        y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(np.int64)
    else:
        y = np.digitize(X[:, 0], np.quantile(X[:, 0], np.linspace(0, 1, n_classes + 1)[1:-1]))
    return X, y
