"""Return panels: container type, CSV ingestion and emission.

CSV layout: a header row of asset labels (optionally preceded by a date
column), then one row of decimal returns per observation. Portfolio weight
files carry a ticker column plus one column per portfolio.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "ReturnPanel",
    "load_returns_csv",
    "write_panel_csv",
    "load_weights_csv",
    "bundled_weights_path",
    "portfolio_returns",
]


@dataclass(frozen=True)
class ReturnPanel:
    """T x p matrix of asset returns with labels and optional timestamps."""

    values: np.ndarray
    labels: tuple
    timestamps: Optional[tuple] = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.values, dtype=float))
        if X.ndim != 2:
            raise ValidationError(f"panel must be 2-dimensional, got shape {X.shape}")
        labels = tuple(str(c) for c in self.labels)
        if len(labels) != X.shape[1]:
            raise ValidationError(
                f"{len(labels)} labels for {X.shape[1]} columns"
            )
        if len(set(labels)) != len(labels):
            raise ValidationError("duplicate asset labels")
        bad = ~np.all(np.isfinite(X), axis=1)
        if bad.any():
            r = int(np.flatnonzero(bad)[0])
            c = int(np.flatnonzero(~np.isfinite(X[r]))[0])
            raise ValidationError(
                f"non-finite value at row {r}, asset {labels[c]!r}"
            )
        object.__setattr__(self, "values", X)
        object.__setattr__(self, "labels", labels)
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != X.shape[0]:
                raise ValidationError("timestamp count does not match row count")
            object.__setattr__(self, "timestamps", ts)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def demeaned(self) -> "ReturnPanel":
        """Subtract the per-asset sample mean (optional preprocessing)."""
        return ReturnPanel(
            self.values - self.values.mean(axis=0),
            self.labels,
            self.timestamps,
        )


def load_returns_csv(path) -> ReturnPanel:
    """Read a return panel from CSV.

    The first row must be a header of asset labels; an optional leading
    date column is detected by a non-numeric first data cell. Missing or
    non-numeric cells are rejected with their row index and asset label.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    rows = [r for r in rows if r]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if len(rows) < 2:
        raise ValidationError(f"{path}: no data rows")
    first = rows[1]
    has_dates = False
    if first:
        try:
            float(first[0])
        except ValueError:
            has_dates = True
    labels = header[1:] if has_dates else header
    if len(set(labels)) != len(labels):
        raise ValidationError(f"{path}: duplicate asset labels in header")
    n_cols = len(labels)
    values = np.empty((len(rows) - 1, n_cols))
    dates = [] if has_dates else None
    for r, row in enumerate(rows[1:]):
        cells = row[1:] if has_dates else row
        if len(cells) != n_cols:
            raise ValidationError(
                f"{path}: ragged row {r} ({len(cells)} cells, expected {n_cols})"
            )
        if has_dates:
            dates.append(row[0].strip())
        for c, cell in enumerate(cells):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise ValidationError(
                    f"{path}: non-numeric cell at row {r}, asset {labels[c]!r}: {cell!r}"
                ) from None
    try:
        return ReturnPanel(values, labels, tuple(dates) if dates else None)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_panel_csv(panel: ReturnPanel, path) -> None:
    """Write a panel back to CSV with full float precision."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if panel.timestamps is not None:
            writer.writerow(["date", *panel.labels])
            for ts, row in zip(panel.timestamps, panel.values):
                writer.writerow([ts, *(repr(float(v)) for v in row)])
        else:
            writer.writerow(list(panel.labels))
            for row in panel.values:
                writer.writerow([repr(float(v)) for v in row])


def load_weights_csv(path) -> list[tuple[str, dict]]:
    """Read portfolio weights keyed by ticker.

    Returns a list of (portfolio_name, {ticker: weight}) in column order.
    Weight sums are unconstrained (geared and long-short portfolios are
    legitimate); alignment against a panel happens at use time by label.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    rows = [r for r in rows if r]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    names = header[1:]
    if not names:
        raise ValidationError(f"{path}: no portfolio columns")
    weights: list[dict] = [dict() for _ in names]
    for r, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise ValidationError(f"{path}: ragged row {r}")
        ticker = row[0].strip()
        for k, cell in enumerate(row[1:]):
            try:
                weights[k][ticker] = float(cell)
            except ValueError:
                raise ValidationError(
                    f"{path}: non-numeric weight at row {r}, portfolio {names[k]!r}"
                ) from None
    return list(zip(names, weights))


def bundled_weights_path() -> Path:
    """Path of the packaged 25-asset, 5-portfolio weight fixture."""
    return Path(resources.files("eigengarch").joinpath("data/portfolios.csv"))


def align_weights(weight_map: dict, labels: Sequence[str]) -> np.ndarray:
    """Order a {ticker: weight} mapping to match panel labels."""
    missing = [c for c in labels if c not in weight_map]
    if missing:
        raise ValidationError(f"weights missing for assets {missing}")
    return np.array([weight_map[c] for c in labels], dtype=float)


def portfolio_returns(panel: ReturnPanel, weight_map: dict) -> np.ndarray:
    """Per-period portfolio returns w'X_t with label alignment."""
    w = align_weights(weight_map, panel.labels)
    return panel.values @ w
