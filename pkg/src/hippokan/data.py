"""Series loading, synthetic generators and per-window normalized datasets."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SYNTHETIC_KINDS = ("sine", "step", "random_walk", "ar1")

_SYNTHETIC_DEFAULTS = {
    "sine": {"amplitude": 1.0, "period": 60.0, "offset": 10.0, "phase": 0.0, "noise": 0.0},
    "step": {"amplitude": 1.0, "period": 40.0, "offset": 10.0, "noise": 0.0},
    "random_walk": {"offset": 100.0, "scale": 0.1},
    "ar1": {"mean": 10.0, "coefficient": 0.9, "sigma": 0.1},
}


class DataError(ValueError):
    pass


class MissingFileError(DataError, FileNotFoundError):
    pass


class MissingColumnError(DataError):
    pass


class ParseError(DataError):
    pass


class EmptySeriesError(DataError):
    pass


class DegenerateWindowError(DataError):
    pass


@dataclass(frozen=True)
class RawSeries:
    values: np.ndarray
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise EmptySeriesError("series is empty")
        if not np.all(np.isfinite(values)):
            raise DataError("series contains non-finite values")
        object.__setattr__(self, "values", values)
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype=np.int64)
            if ts.shape != values.shape:
                raise DataError("timestamps and values differ in length")
            if np.any(np.diff(ts) <= 0):
                raise DataError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return self.values.size


def load_csv(path, value_column: str = "close", timestamp_column: str | None = None) -> RawSeries:
    """Read one numeric column (and optionally integer timestamps) from a headed CSV."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    values, stamps = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in filter(None, (value_column, timestamp_column)):
            if col not in header:
                raise MissingColumnError(f"column {col!r} not found in {path} (have {header})")
        # line 1 is the header
        for lineno, row in enumerate(reader, start=2):
            cell = (row.get(value_column) or "").strip()
            try:
                values.append(float(cell))
            except ValueError:
                raise ParseError(f"{path}: row {lineno}: non-numeric {value_column!r} value {cell!r}") from None
            if not np.isfinite(values[-1]):
                raise ParseError(f"{path}: row {lineno}: non-finite value {cell!r}")
            if timestamp_column:
                try:
                    stamps.append(int(row[timestamp_column]))
                except (TypeError, ValueError):
                    raise ParseError(f"{path}: row {lineno}: bad timestamp {row[timestamp_column]!r}") from None
    if not values:
        raise EmptySeriesError(f"{path} has a header but no data rows")
    return RawSeries(np.array(values), np.array(stamps) if timestamp_column else None)


def gen_synthetic(kind: str, length: int, params: dict | None = None, seed: int = 0) -> RawSeries:
    if kind not in SYNTHETIC_KINDS:
        raise DataError(f"unknown synthetic kind {kind!r}; choose from {SYNTHETIC_KINDS}")
    if length < 1:
        raise DataError("length must be >= 1")
    p = dict(_SYNTHETIC_DEFAULTS[kind])
    unknown = set(params or {}) - set(p)
    if unknown:
        raise DataError(f"unknown {kind} parameters: {sorted(unknown)}")
    p.update(params or {})
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=float)

    if kind in ("sine", "step"):
        if not p["period"] > 0:
            raise DataError("period must be positive")
        if kind == "sine":
            x = p["amplitude"] * np.sin(2 * np.pi * t / p["period"] + p["phase"]) + p["offset"]
        else:
            high = np.mod(t, p["period"]) < p["period"] / 2
            x = p["offset"] + np.where(high, p["amplitude"], -p["amplitude"])
        if p["noise"] < 0:
            raise DataError("noise must be non-negative")
        x = x + p["noise"] * rng.standard_normal(length)
    elif kind == "random_walk":
        if p["scale"] < 0:
            raise DataError("scale must be non-negative")
        x = p["offset"] + np.cumsum(p["scale"] * rng.standard_normal(length))
    else:
        phi, sigma = p["coefficient"], p["sigma"]
        if not -1 < phi < 1:
            raise DataError("AR(1) coefficient must lie in (-1, 1)")
        if sigma < 0:
            raise DataError("sigma must be non-negative")
        eps = sigma * rng.standard_normal(length)
        dev = np.empty(length)
        dev[0] = eps[0] / np.sqrt(1 - phi**2)  # stationary start
        for i in range(1, length):
            dev[i] = phi * dev[i - 1] + eps[i]
        x = p["mean"] + dev
    return RawSeries(x)


@dataclass(frozen=True)
class NormalizationRecord:
    mu: float


def _degenerate(mu, scale) -> np.ndarray:
    return np.abs(mu) < 1e-9 * (scale + 1e-12)


def normalize_window(window, targets=()):
    """Map window and targets through ``(u - mu) / mu`` with ``mu`` the window mean."""
    w = np.asarray(window, dtype=float)
    y = np.asarray(targets, dtype=float)
    if w.size == 0:
        raise DataError("window is empty")
    mu = w.mean()
    if _degenerate(mu, np.abs(w).max()):
        raise DegenerateWindowError(f"window mean {mu!r} is too close to zero to normalize by")
    return (w - mu) / mu, (y - mu) / mu, NormalizationRecord(float(mu))


def denormalize(x, record: NormalizationRecord):
    if np.ndim(x):
        x = np.asarray(x, dtype=float)
    return (1.0 + x) * record.mu


@dataclass(frozen=True)
class WindowedDataset:
    """Normalized ``(window, targets, mu)`` triples stored as stacked arrays."""

    windows: np.ndarray  # (S, L)
    targets: np.ndarray  # (S, h)
    mu: np.ndarray  # (S,)
    start: int = 0  # index in the source series of the first window's first sample

    @property
    def window_size(self) -> int:
        return self.windows.shape[1]

    @property
    def horizon(self) -> int:
        return self.targets.shape[1]

    def __len__(self) -> int:
        return self.windows.shape[0]

    def __getitem__(self, i: int):
        return self.windows[i], self.targets[i], NormalizationRecord(float(self.mu[i]))

    @property
    def samples(self):
        return [self[i] for i in range(len(self))]

    def subset(self, lo: int, hi: int) -> WindowedDataset:
        return WindowedDataset(self.windows[lo:hi], self.targets[lo:hi], self.mu[lo:hi], self.start + lo)

    def raw_targets(self) -> np.ndarray:
        return (1.0 + self.targets) * self.mu[:, None]

    def raw_last(self) -> np.ndarray:
        return (1.0 + self.windows[:, -1]) * self.mu


def windowize(series: RawSeries | np.ndarray, window_size: int, horizon: int = 1) -> WindowedDataset:
    values = series.values if isinstance(series, RawSeries) else np.asarray(series, dtype=float)
    if window_size < 1 or horizon < 1:
        raise DataError("window size and horizon must be >= 1")
    if values.size < window_size + horizon:
        raise DataError(f"series of length {values.size} is shorter than window + horizon = {window_size + horizon}")
    frames = sliding_window_view(values, window_size + horizon)
    raw_w, raw_y = frames[:, :window_size], frames[:, window_size:]
    mu = raw_w.mean(axis=1)
    bad = _degenerate(mu, np.abs(raw_w).max(axis=1))
    if np.any(bad):
        raise DegenerateWindowError(f"window starting at index {int(np.argmax(bad))} has mean too close to zero")
    return WindowedDataset((raw_w - mu[:, None]) / mu[:, None], (raw_y - mu[:, None]) / mu[:, None], mu)


def chronological_split(ds: WindowedDataset, fractions=(0.8, 0.1, 0.1)):
    """Contiguous train / validation / test blocks, in time order."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise DataError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    n = len(ds)
    n_train = int(n * fractions[0])
    n_val = int(n * fractions[1])
    if n_train < 1 or n - n_train - n_val < 1:
        raise DataError(f"{n} samples is too few for a {fractions} split")
    return ds.subset(0, n_train), ds.subset(n_train, n_train + n_val), ds.subset(n_train + n_val, n)
