"""Seeded simulation of observed ``(L, Z, A, Y)`` records and CSV I/O.

Randomness is counter based so that results never depend on platform,
numpy version or execution order. The generator is SplitMix64: the ``k``-th
64-bit output of the stream keyed by ``seed`` is

    mix64(seed + (k + 1) * 0x9E3779B97F4A7C15  mod 2**64)

with ``mix64`` the SplitMix64 finaliser. Row ``i`` consumes outputs
``k = 5*i + j`` for ``j = 0..4`` in the order (cell, latent type, instrument,
treatment, outcome); each output becomes a uniform on [0, 1) from its top
53 bits. Replication ``r`` of an experiment keyed by ``master_seed`` uses
``child_seed(master_seed, r)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, DomainError, EmptyDatasetError, ValidationError
from .model import StructuralModel

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
DRAWS_PER_ROW = 5
HEADER = ("l", "z", "a", "y")


def mix64(x: int) -> int:
    """SplitMix64 finaliser on a Python int."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _M1) & MASK64
    x = ((x ^ (x >> 27)) * _M2) & MASK64
    return x ^ (x >> 31)


def _mix64_array(x: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_M1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_M2)
    return x ^ (x >> np.uint64(31))


def child_seed(master_seed: int, r: int) -> int:
    """Seed of replication ``r``; distinct ``r`` give unrelated streams."""
    if r < 0:
        raise ValueError("replication index must be nonnegative")
    return mix64(mix64(master_seed) ^ mix64((r + 1) * GOLDEN))


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the stream as uniforms on [0, 1)."""
    k = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    state = np.uint64(seed & MASK64) + k * np.uint64(GOLDEN)
    bits = _mix64_array(state)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass(frozen=True, eq=False)
class ObservedRow:
    l: int
    z: int
    a: int
    y: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed records stored column-wise."""

    l: np.ndarray
    z: np.ndarray
    a: np.ndarray
    y: np.ndarray
    cell_count: int

    @classmethod
    def from_columns(cls, l, z, a, y, cell_count=None):
        l = np.asarray(l, dtype=np.int64)
        z = np.asarray(z, dtype=np.int64)
        a = np.asarray(a, dtype=np.int64)
        y = np.asarray(y, dtype=np.float64)
        n = l.size
        if not (l.ndim == z.ndim == a.ndim == y.ndim == 1 and z.size == a.size == y.size == n):
            raise ValidationError("columns must be 1-d and of equal length", "dataset")
        if n == 0:
            raise EmptyDatasetError("dataset has no rows", "dataset")
        if cell_count is None:
            cell_count = int(l.max()) + 1
        if l.min() < 0 or l.max() >= cell_count:
            raise ValidationError(f"cell ids must lie in [0, {cell_count})", "dataset.l")
        for name, col in (("z", z), ("a", a)):
            if not np.all((col == 1) | (col == -1)):
                raise ValidationError("values must be -1 or +1", f"dataset.{name}")
        if not np.all(np.isfinite(y)):
            raise ValidationError("non-finite outcome", "dataset.y")
        for col in (l, z, a, y):
            col.setflags(write=False)
        return cls(l=l, z=z, a=a, y=y, cell_count=int(cell_count))

    @classmethod
    def from_rows(cls, rows, cell_count=None):
        rows = list(rows)
        return cls.from_columns([r.l for r in rows], [r.z for r in rows],
                                [r.a for r in rows], [r.y for r in rows], cell_count)

    def __len__(self):
        return self.l.size

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.cell_count == other.cell_count
                and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in HEADER))

    def rows(self):
        for i in range(len(self)):
            yield ObservedRow(int(self.l[i]), int(self.z[i]), int(self.a[i]), float(self.y[i]))

    def replace(self, **columns) -> "Dataset":
        cols = {c: columns.get(c, getattr(self, c)) for c in HEADER}
        return Dataset.from_columns(**cols, cell_count=self.cell_count)


def _padded(model: StructuralModel, attr: str) -> np.ndarray:
    width = max(c.n_types for c in model.cells)
    out = np.zeros((model.n_cells, width))
    for i, c in enumerate(model.cells):
        v = getattr(c, attr)
        out[i, : v.size] = v
    return out


def sample(model: StructuralModel, n: int, seed: int) -> Dataset:
    """Draw ``n`` iid records from ``model``.

    Per row: ``l ~ cell_probs``; ``u ~ u_probs(l)``; ``z = +1`` w.p. ``pi_z(l)``
    (independent of ``u``); ``a = +1`` w.p. ``q_z(l, u)``; ``y ~ Bernoulli(m_a(l, u))``.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    draws = uniforms(seed, 0, n * DRAWS_PER_ROW).reshape(n, DRAWS_PER_ROW)

    cum_l = np.cumsum(model.cell_probs)
    l = np.minimum(np.searchsorted(cum_l, draws[:, 0], side="right"), model.n_cells - 1)

    probs = _padded(model, "u_probs")
    n_types = np.array([c.n_types for c in model.cells])
    cum_u = np.cumsum(probs, axis=1)[l]
    u = np.minimum((cum_u <= draws[:, 1:2]).sum(axis=1), n_types[l] - 1)

    pi = np.array([c.pi_z for c in model.cells])
    z = np.where(draws[:, 2] < pi[l], 1, -1)
    q = np.where(z == 1, _padded(model, "q_plus")[l, u], _padded(model, "q_minus")[l, u])
    a = np.where(draws[:, 3] < q, 1, -1)
    m = np.where(a == 1, _padded(model, "m_plus")[l, u], _padded(model, "m_minus")[l, u])
    y = (draws[:, 4] < m).astype(np.float64)
    return Dataset.from_columns(l, z, a, y, cell_count=model.n_cells)


# --- CSV -------------------------------------------------------------------

def _format_y(v: float) -> str:
    return repr(int(v)) if float(v).is_integer() and abs(v) < 2**53 else repr(float(v))


def dumps_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    buf.write(",".join(HEADER) + "\n")
    for l, z, a, y in zip(dataset.l.tolist(), dataset.z.tolist(),
                          dataset.a.tolist(), dataset.y.tolist()):
        buf.write(f"{l},{z},{a},{_format_y(y)}\n")
    return buf.getvalue()


def write_csv(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_csv(dataset))


def _parse_int(text, name, line):
    try:
        return int(text)
    except ValueError:
        raise DataFormatError(f"{name}={text!r} is not an integer", line=line) from None


def loads_csv(text: str, source=None) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDatasetError("file is empty", source) from None
    if tuple(h.strip() for h in header) != HEADER:
        raise DataFormatError(f"expected header {','.join(HEADER)!r}", line=1, path=source)
    cols = ([], [], [], [])
    for line, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != 4:
            raise DataFormatError(f"expected 4 fields, got {len(rec)}", line=line, path=source)
        l = _parse_int(rec[0], "l", line)
        z = _parse_int(rec[1], "z", line)
        a = _parse_int(rec[2], "a", line)
        try:
            y = float(rec[3])
        except ValueError:
            raise DataFormatError(f"y={rec[3]!r} is not a number", line=line, path=source) from None
        if l < 0:
            raise DomainError(f"l={l} is negative", line=line, path=source)
        if z not in (-1, 1):
            raise DomainError(f"z={z} not in {{-1, 1}}", line=line, path=source)
        if a not in (-1, 1):
            raise DomainError(f"a={a} not in {{-1, 1}}", line=line, path=source)
        if not math.isfinite(y):
            raise DomainError(f"y={rec[3]!r} is not finite", line=line, path=source)
        for col, v in zip(cols, (l, z, a, y)):
            col.append(v)
    if not cols[0]:
        raise EmptyDatasetError("no data rows after header", source)
    return Dataset.from_columns(*cols)


def read_csv(path) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValidationError("file not found", str(path)) from None
    return loads_csv(text, source=str(path))
