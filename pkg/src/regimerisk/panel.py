"""Date-aligned multi-market log-return panel."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    """
    Log returns for ``m`` markets on common dates.

    ``values[n, j]`` is ``log(P_n / P_{n-1})`` of market ``names[j]`` on
    ``dates[n]``.
    """

    dates: np.ndarray
    names: tuple
    values: np.ndarray
    provenance: tuple = field(default=())

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        names = tuple(str(n) for n in self.names)
        if values.ndim != 2 or values.shape[0] != dates.shape[0]:
            raise DataError(f"values shape {values.shape} does not match {dates.shape[0]} dates")
        if values.shape[1] != len(names):
            raise DataError(f"{values.shape[1]} columns but {len(names)} names")
        if len(set(names)) != len(names):
            raise DataError(f"duplicate market names in {names}")
        if not np.all(np.isfinite(values)):
            raise DataError("panel contains missing or non-finite returns")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise DataError("dates must be strictly ascending and unique")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_assets(self):
        return self.values.shape[1]

    def column(self, asset):
        """Return series of ``asset`` (name or column index)."""
        return self.values[:, self.index(asset)]

    def index(self, asset):
        if isinstance(asset, (int, np.integer)):
            if not 0 <= asset < self.n_assets:
                raise KeyError(asset)
            return int(asset)
        try:
            return self.names.index(asset)
        except ValueError:
            raise KeyError(f"unknown market {asset!r}; have {self.names}") from None

    def slice(self, start=None, stop=None):
        """Rows ``start:stop`` (integer positions)."""
        return ReturnPanel(self.dates[start:stop], self.names, self.values[start:stop], self.provenance)

    def between(self, first=None, last=None):
        """Rows with ``first <= date <= last`` (ISO strings or datetime64)."""
        mask = np.ones(len(self), dtype=bool)
        if first is not None:
            mask &= self.dates >= np.datetime64(first, "D")
        if last is not None:
            mask &= self.dates <= np.datetime64(last, "D")
        return ReturnPanel(self.dates[mask], self.names, self.values[mask], self.provenance)

    def select(self, names):
        idx = [self.index(n) for n in names]
        return ReturnPanel(self.dates, tuple(self.names[i] for i in idx), self.values[:, idx], self.provenance)


def business_dates(count, start="2000-01-03"):
    """``count`` consecutive weekdays from ``start``."""
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(count), roll="forward")
