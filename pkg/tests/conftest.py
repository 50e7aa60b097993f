"""
Shared fixtures for the sieve_var test suite
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def plm_frame():
    """Small partially linear sample: y = 2 x1 - x2 + sin(2 z) + noise"""
    gen = np.random.default_rng(11)
    n = 200
    z = gen.uniform(-2.0, 2.0, n)
    x1 = 0.5 * z + gen.normal(size=n)
    x2 = gen.normal(size=n)
    y = 2.0 * x1 - x2 + np.sin(2.0 * z) + 0.1 * gen.normal(size=n)
    return pd.DataFrame({"x1": x1, "x2": x2, "z": z, "y": y})


@pytest.fixture
def price_csv(tmp_path):
    """Writes a price CSV from a dict of columns and returns its path"""
    def write(columns, dates=None, name="prices.csv"):
        n = len(next(iter(columns.values())))
        dates = dates or [str(d.date()) for d in pd.bdate_range("2020-01-01", periods=n)]
        lines = ["date," + ",".join(columns)]
        for i in range(n):
            lines.append(",".join([dates[i]] + [str(columns[c][i]) for c in columns]))
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path
    return write
