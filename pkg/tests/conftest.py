import csv

import numpy as np
import pytest

from bsac.data import TAIWAN_CONTINUOUS, TAIWAN_TARGET


def write_taiwan_like(path, n_rows=400, seed=0, code_row=True):
    """A file with the UCI Taiwan layout; the label depends on PAY_0 and LIMIT_BAL."""
    gen = np.random.default_rng(seed)
    header = ["ID", "LIMIT_BAL", "SEX", "EDUCATION", "MARRIAGE", "AGE", "PAY_0", "PAY_2", "PAY_3",
              "PAY_4", "PAY_5", "PAY_6"] + [f"BILL_AMT{i}" for i in range(1, 7)] \
        + [f"PAY_AMT{i}" for i in range(1, 7)] + [TAIWAN_TARGET]
    assert set(TAIWAN_CONTINUOUS) <= set(header)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if code_row:
            w.writerow([""] + [f"X{i}" for i in range(1, 24)] + ["Y"])
        w.writerow(header)
        for i in range(n_rows):
            pay = gen.integers(-2, 9, size=6)
            limit = int(gen.integers(1, 80)) * 10000
            risk = 0.8 * pay[0] - limit / 400000 + gen.normal(0, 0.6)
            y = int(risk > 4.0)
            row = [i + 1, limit, int(gen.integers(1, 3)), int(gen.integers(0, 7)), int(gen.integers(0, 4)),
                   int(gen.integers(21, 75))] + list(pay)
            row += list(gen.integers(-1000, 200000, size=6)) + list(gen.integers(0, 20000, size=6)) + [y]
            w.writerow(row)
    return path


def blobs(n=200, d=2, seed=0, gap=3.0):
    """Two well-separated Gaussian clouds scaled to [0, 1]; labels 0/1 balanced."""
    gen = np.random.default_rng(seed)
    y = np.repeat([0, 1], [n - n // 2, n // 2])
    x = gen.normal(0, 0.5, size=(n, d)) + gap * y[:, None]
    x = (x - x.min(0)) / (x.max(0) - x.min(0))
    return x, y.astype(np.float64)


@pytest.fixture
def taiwan_csv(tmp_path):
    return write_taiwan_like(tmp_path / "taiwan.csv")


ACCEPTANCE_LINES: list = []


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line for the acceptance summary."""
    def record(number, passed, detail):
        ACCEPTANCE_LINES.append((number, f"[C{number}] {'PASS' if passed else 'FAIL'}  {detail}"))
        print(ACCEPTANCE_LINES[-1][1])
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
