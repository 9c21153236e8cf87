"""Datasets with per-cell missingness and their delimited-text format."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

MISSING = np.nan


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``n x d`` matrix with a boolean mask (True = observed).

    Missing cells of ``values`` hold NaN and are never used in arithmetic;
    code gathers observed entries through ``mask``.
    """

    values: np.ndarray
    mask: np.ndarray
    columns: tuple = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2:
            raise ValidationError("values must be a 2-d matrix")
        if mask.shape != values.shape:
            raise ValidationError(
                f"mask shape {mask.shape} != values shape {values.shape}")
        if values.shape[0] == 0:
            raise ValidationError("dataset has zero rows")
        empty = np.flatnonzero(~mask.any(axis=1))
        if empty.size:
            raise ValidationError(
                f"row {int(empty[0])} has no observed values")
        if not np.all(np.isfinite(values[mask])):
            raise ValidationError("observed values must be finite")
        values[~mask] = MISSING
        values.setflags(write=False)
        mask.setflags(write=False)
        columns = tuple(self.columns) or tuple(
            f"x{j + 1}" for j in range(values.shape[1]))
        if len(columns) != values.shape[1]:
            raise ValidationError("column names do not match column count")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "columns", columns)

    @classmethod
    def from_array(cls, x, columns=()):
        """Build from an array where NaN marks a missing cell."""
        x = np.asarray(x, dtype=float)
        return cls(values=x, mask=~np.isnan(x), columns=columns)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    @property
    def fully_observed(self):
        return bool(self.mask.all())

    def with_mask(self, mask):
        return Dataset(self.values_filled(), mask, self.columns)

    def values_filled(self, fill=0.0):
        out = self.values.copy()
        out[~self.mask] = fill
        return out

    def patterns(self):
        """Group rows by missingness pattern.

        Returns a list of ``(observed_mask, row_indices)`` pairs, ordered by the
        first row carrying each pattern.
        """
        return self._patterns

    @cached_property
    def _patterns(self):
        uniq, first, inverse = np.unique(
            self.mask, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(first, kind="stable")
        return [(uniq[k], np.flatnonzero(inverse == k)) for k in order]

    @cached_property
    def pattern_groups(self):
        """Per pattern: ``(observed_mask, rows, observed_idx, missing_idx, x_obs)``."""
        out = []
        for pattern, rows in self.patterns():
            obs = np.flatnonzero(pattern)
            out.append((pattern, rows, obs, np.flatnonzero(~pattern),
                        self.values[np.ix_(rows, obs)]))
        return out


@dataclass(frozen=True)
class ObservationView:
    """Observed and missing coordinate indices of a single row (0-based)."""

    row: int
    observed_idx: tuple
    missing_idx: tuple

    @property
    def d_obs(self):
        return len(self.observed_idx)


def observation_views(ds):
    views = []
    for i, row in enumerate(ds.mask):
        views.append(ObservationView(
            row=i,
            observed_idx=tuple(int(j) for j in np.flatnonzero(row)),
            missing_idx=tuple(int(j) for j in np.flatnonzero(~row)),
        ))
    return views


def _sniff_delimiter(header_line):
    return "\t" if "\t" in header_line and "," not in header_line else ","


def load_dataset(path, missing_token="NA"):
    """Read a delimited numeric file with a header row.

    Cells equal to ``missing_token`` or empty are missing.  Comma or tab
    delimiters are detected from the header.  Row numbers in errors count
    data rows from 1.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise ValidationError(f"{path}: missing header row")
        delim = _sniff_delimiter(header_line)
        columns = next(csv.reader([header_line], delimiter=delim))
        columns = [c.strip() for c in columns]
        rows, masks = [], []
        for r, cells in enumerate(csv.reader(fh, delimiter=delim), start=1):
            if not cells:
                continue
            if len(cells) != len(columns):
                raise ParseError(
                    f"expected {len(columns)} cells, found {len(cells)}", row=r)
            vals, obs = [], []
            for c, cell in enumerate(cells, start=1):
                cell = cell.strip()
                if cell == "" or cell == missing_token:
                    vals.append(MISSING)
                    obs.append(False)
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"cannot parse {cell!r}", row=r,
                                     column=c) from None
                if not np.isfinite(v):
                    raise ParseError(f"non-finite value {cell!r}", row=r,
                                     column=c)
                vals.append(v)
                obs.append(True)
            if not any(obs):
                raise ValidationError(f"row {r} has no observed values")
            rows.append(vals)
            masks.append(obs)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return Dataset(np.array(rows), np.array(masks), tuple(columns))


def write_dataset(ds, path, missing_token="NA", delimiter=","):
    """Write ``ds`` in the format read by :func:`load_dataset`.

    Floats are written with ``repr`` so a reload is bit-exact.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(ds.columns)
        for vals, obs in zip(ds.values, ds.mask):
            writer.writerow([repr(float(v)) if o else missing_token
                             for v, o in zip(vals, obs)])
