import csv
import hashlib
import json
import math
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence, Union

import numpy as np

WORKERS_ENV = "CROWLATTICE_WORKERS"


def split_seed(seed: int, index: int, salt: str = "") -> int:
    """Derive the child seed of work unit `index` from a parent seed

    The splitter is the first 8 bytes (big endian) of
    sha256("<seed>|<salt>|<index>"), so child seeds depend only on
    (seed, salt, index) and never on scheduling.

    """
    digest = hashlib.sha256("{}|{}|{}".format(seed, salt, index).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def format_float(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return "{:.17g}".format(float(value))


def rational_flux(alpha: float, max_denominator: int = 1000) -> Fraction:
    """Best rational approximation p/q of alpha taken modulo 1"""
    return Fraction(float(alpha) % 1.0).limit_denominator(max_denominator)


def is_rational_flux(alpha: float, max_denominator: int, tol: float = 1e-9) -> bool:
    frac = rational_flux(alpha, max_denominator)
    reduced = float(alpha) % 1.0
    return abs(reduced - float(frac)) < tol


def circular_mean(angles: Iterable[float]) -> float:
    angles = np.asarray(list(angles), dtype=float)
    return float(np.angle(np.mean(np.exp(1j * angles))))


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return default
    try:
        count = int(raw)
    except ValueError:
        return default
    return count if count >= 1 else default


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def canonical_json(data: Dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
