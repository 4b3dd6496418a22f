import csv
import math

import numpy as np

from crowlattice.utils import circular_mean, format_float, is_rational_flux, rational_flux, split_seed, worker_count, write_csv


def test_split_seed():
    """Test child seeds depend only on (seed, salt, index)"""

    assert split_seed(7, 0, "lattice") == split_seed(7, 0, "lattice")
    seeds = {split_seed(7, k, salt) for k in range(20) for salt in ("lattice", "crow")}
    assert len(seeds) == 40
    assert split_seed(7, 0) != split_seed(8, 0)
    assert 0 <= split_seed(7, 0) < 2 ** 64


def test_format_float():
    """Test floats are written with round-trip precision"""

    assert format_float(0.1) == "0.10000000000000001"
    assert float(format_float(1 / 3)) == 1 / 3
    assert format_float(float("nan")) == "nan"
    assert format_float(2.0) == "2"


def test_rational_flux():
    """Test alpha is reduced modulo 1 to p/q"""

    assert rational_flux(0.25).denominator == 4
    assert rational_flux(1.25) == rational_flux(0.25)
    assert rational_flux(-0.25).numerator == 3
    assert is_rational_flux(1 / 3, 10)
    assert not is_rational_flux(1 / math.pi, 10)


def test_circular_mean():
    """Test the mean of angles straddling +-pi"""

    assert abs(abs(circular_mean([math.pi - 0.1, -math.pi + 0.1])) - math.pi) < 1e-12
    assert abs(circular_mean([0.1, 0.3]) - 0.2) < 1e-12


def test_worker_count(monkeypatch):
    """Test the worker environment variable and its fallbacks"""

    monkeypatch.delenv("CROWLATTICE_WORKERS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("CROWLATTICE_WORKERS", "4")
    assert worker_count() == 4
    monkeypatch.setenv("CROWLATTICE_WORKERS", "many")
    assert worker_count() == 1
    monkeypatch.setenv("CROWLATTICE_WORKERS", "0")
    assert worker_count(2) == 2


def test_write_csv(tmp_path):
    """Test floats, nan and strings in the CSV writer"""

    path = write_csv(tmp_path / "sub" / "table.csv", ["a", "b", "c"], [[0.5, float("nan"), "x"], [np.float64(1.5), 2, "y"]])
    assert path.read_text() == "a,b,c\n0.5,nan,x\n1.5,2,y\n"
    with open(path) as f:
        assert len(list(csv.reader(f))) == 3


def test_split_seed_children_distinct():
    """Test a million child seeds of one parent never collide"""

    seeds = {split_seed(7, k, "lattice") for k in range(10 ** 6)}
    assert len(seeds) == 10 ** 6
