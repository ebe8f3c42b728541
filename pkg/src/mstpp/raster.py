"""Regular-grid covariate rasters.

Reads and writes the ESRI ASCII grid format, standardizes layers, and
extracts covariate vectors at arbitrary planar positions by containing-cell
lookup. Rasters and stacks are immutable after construction and safe for
concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateLayerError,
    GridFormatError,
    NoDataError,
    OutOfDomainError,
)

# Canonical header keys, in the order they must appear in the file.
_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


@dataclass(frozen=True)
class RasterHeader:
    """Georeferencing of a regular grid with square cells.

    The extent is half open: x in [xll, xll + ncols*cellsize) and
    y in [yll, yll + nrows*cellsize). Units are meters.
    """

    ncols: int
    nrows: int
    xll: float
    yll: float
    cellsize: float
    nodata: float

    def __post_init__(self):
        if self.ncols < 1 or self.nrows < 1:
            raise ValueError("ncols and nrows must be >= 1")
        if not self.cellsize > 0:
            raise ValueError("cellsize must be > 0")

    @property
    def xmax(self) -> float:
        return self.xll + self.ncols * self.cellsize

    @property
    def ymax(self) -> float:
        return self.yll + self.nrows * self.cellsize

    def contains(self, x, y):
        """Vectorized half-open extent test."""
        return (
            (np.asarray(x) >= self.xll)
            & (np.asarray(x) < self.xmax)
            & (np.asarray(y) >= self.yll)
            & (np.asarray(y) < self.ymax)
        )

    def cell_index(self, x, y):
        """Map positions to (row, col) of the containing cell.

        Row 0 is the northernmost row. A position on a shared cell edge
        belongs to the right/upper neighbor; callers must ensure the
        position is inside the extent.
        """
        col = np.floor((np.asarray(x) - self.xll) / self.cellsize).astype(int)
        row_from_bottom = np.floor((np.asarray(y) - self.yll) / self.cellsize).astype(int)
        return self.nrows - 1 - row_from_bottom, col

    def cell_center(self, row, col):
        """Planar coordinates of the center of cell (row, col)."""
        x = self.xll + (np.asarray(col) + 0.5) * self.cellsize
        y = self.yll + (self.nrows - np.asarray(row) - 0.5) * self.cellsize
        return x, y


@dataclass(frozen=True)
class Raster:
    """One covariate layer: a header plus an nrows x ncols value grid.

    ``values[0, :]`` is the northernmost row. Cells equal to the header's
    nodata sentinel are missing; every other value must be finite.
    """

    header: RasterHeader
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.header.nrows, self.header.ncols):
            raise ValueError(
                f"value grid shape {values.shape} does not match header "
                f"({self.header.nrows}, {self.header.ncols})"
            )
        valid = values != self.header.nodata
        if not np.all(np.isfinite(values[valid])):
            raise ValueError("raster contains non-finite values outside nodata cells")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def nodata_mask(self) -> np.ndarray:
        return self.values == self.header.nodata

    def value_at(self, row: int, col: int) -> float:
        return float(self.values[row, col])


@dataclass(frozen=True)
class CovariateStack:
    """Ordered covariate layers sharing one georeferencing.

    When ``includes_intercept`` is true, extracted design vectors carry a
    leading 1 followed by the layer values in order, so the coefficient
    vector has length ``p = 1 + len(layers)``.
    """

    layers: tuple
    includes_intercept: bool = True

    def __post_init__(self):
        layers = tuple((str(name), raster) for name, raster in self.layers)
        if not layers:
            raise ValueError("a covariate stack needs at least one layer")
        names = [name for name, _ in layers]
        if len(set(names)) != len(names):
            raise ValueError(f"layer names must be unique, got {names}")
        head = layers[0][1].header
        for name, raster in layers[1:]:
            if raster.header != head:
                raise ValueError(f"layer {name!r} header differs from {layers[0][0]!r}")
        object.__setattr__(self, "layers", layers)

    @property
    def header(self) -> RasterHeader:
        return self.layers[0][1].header

    @property
    def names(self) -> list:
        base = ["intercept"] if self.includes_intercept else []
        return base + [name for name, _ in self.layers]

    @property
    def p(self) -> int:
        return len(self.layers) + (1 if self.includes_intercept else 0)

    def valid_mask(self, xy: np.ndarray) -> np.ndarray:
        """True for positions inside the extent and non-nodata in all layers."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        ok = self.header.contains(xy[:, 0], xy[:, 1])
        if np.any(ok):
            row, col = self.header.cell_index(xy[ok, 0], xy[ok, 1])
            good = np.ones(row.shape, dtype=bool)
            for _, raster in self.layers:
                good &= ~raster.nodata_mask[row, col]
            ok[ok] = good
        return ok

    def extract_many(self, xy: np.ndarray) -> np.ndarray:
        """Design matrix for positions known to be valid (no checks)."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        row, col = self.header.cell_index(xy[:, 0], xy[:, 1])
        w = np.empty((xy.shape[0], self.p))
        off = 0
        if self.includes_intercept:
            w[:, 0] = 1.0
            off = 1
        for k, (_, raster) in enumerate(self.layers):
            w[:, off + k] = raster.values[row, col]
        return w

    def extract(self, s) -> np.ndarray:
        """Covariate vector w(s) at a planar position.

        Uses the value of the containing cell in each layer (no
        interpolation), so w(s) is piecewise constant over cells.

        Raises
        ------
        OutOfDomainError
            If s lies outside the raster extent.
        NoDataError
            If the containing cell is nodata in any layer.
        """
        x, y = float(s[0]), float(s[1])
        if not self.header.contains(x, y):
            raise OutOfDomainError(f"position ({x}, {y}) outside raster extent", position=(x, y))
        row, col = self.header.cell_index(x, y)
        row, col = int(row), int(col)
        out = []
        for name, raster in self.layers:
            v = raster.values[row, col]
            if v == raster.header.nodata:
                raise NoDataError(
                    f"position ({x}, {y}) falls on a nodata cell of layer {name!r}",
                    position=(x, y),
                )
            out.append(v)
        if self.includes_intercept:
            out.insert(0, 1.0)
        return np.array(out)

    def design_matrix(self):
        """(W, valid) over all cells in row-major order.

        W has shape (nrows*ncols, p); rows for nodata cells are zero and
        flagged False in ``valid``.
        """
        head = self.header
        valid = np.ones(head.nrows * head.ncols, dtype=bool)
        for _, raster in self.layers:
            valid &= ~raster.nodata_mask.ravel()
        w = np.zeros((head.nrows * head.ncols, self.p))
        off = 0
        if self.includes_intercept:
            w[:, 0] = 1.0
            off = 1
        for k, (_, raster) in enumerate(self.layers):
            w[:, off + k] = raster.values.ravel()
        w[~valid] = 0.0
        return w, valid


def _parse_header_line(line: str, lineno: int, expected_key: str):
    parts = line.split()
    if len(parts) != 2:
        raise GridFormatError(f"line {lineno}: expected '<key> <value>', got {line!r}")
    key, value = parts
    if key.lower() != expected_key:
        raise GridFormatError(f"line {lineno}: expected header key {expected_key!r}, got {key!r}")
    try:
        return float(value)
    except ValueError:
        raise GridFormatError(f"line {lineno}: non-numeric value {value!r} for {key!r}") from None


def read_ascii_grid(path) -> Raster:
    """Read an ESRI ASCII grid file.

    The file must carry the six header lines ncols, nrows, xllcorner,
    yllcorner, cellsize, NODATA_value (case-insensitive keys) followed by
    nrows rows of ncols whitespace-separated numbers, top row northernmost.
    Malformed input raises :class:`GridFormatError` naming the line.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 6:
        raise GridFormatError(f"line {len(lines) + 1}: truncated header (6 lines required)")
    raw = [_parse_header_line(lines[i], i + 1, key) for i, key in enumerate(_HEADER_KEYS)]
    ncols, nrows = raw[0], raw[1]
    if ncols != int(ncols) or nrows != int(nrows):
        raise GridFormatError("line 1: ncols and nrows must be integers")
    header = RasterHeader(
        ncols=int(ncols), nrows=int(nrows), xll=raw[2], yll=raw[3], cellsize=raw[4], nodata=raw[5]
    )

    values = np.empty((header.nrows, header.ncols))
    body = lines[6:]
    row = 0
    for offset, line in enumerate(body):
        lineno = 7 + offset
        tokens = line.split()
        if not tokens:
            continue  # tolerate blank lines, e.g. a trailing newline
        if row >= header.nrows:
            raise GridFormatError(f"line {lineno}: extra data row (expected {header.nrows} rows)")
        if len(tokens) != header.ncols:
            raise GridFormatError(
                f"line {lineno}: expected {header.ncols} values, got {len(tokens)}"
            )
        try:
            values[row] = [float(tok) for tok in tokens]
        except ValueError:
            raise GridFormatError(f"line {lineno}: non-numeric token in data row") from None
        row += 1
    if row != header.nrows:
        raise GridFormatError(f"line {7 + len(body)}: expected {header.nrows} data rows, got {row}")
    return Raster(header=header, values=values)


def write_ascii_grid(raster: Raster, path) -> None:
    """Write a raster in the ESRI ASCII grid format.

    Numbers are emitted with 10 significant digits, which makes
    write(read(write(read(f)))) byte-identical to write(read(f)).
    """
    head = raster.header
    with open(path, "w") as fh:
        fh.write(f"ncols {head.ncols}\n")
        fh.write(f"nrows {head.nrows}\n")
        fh.write(f"xllcorner {head.xll:.10g}\n")
        fh.write(f"yllcorner {head.yll:.10g}\n")
        fh.write(f"cellsize {head.cellsize:.10g}\n")
        fh.write(f"NODATA_value {head.nodata:.10g}\n")
        for row in raster.values:
            fh.write(" ".join(f"{v:.10g}" for v in row))
            fh.write("\n")


def standardize(raster: Raster):
    """Center and scale a layer to mean 0, sd 1 over non-nodata cells.

    Uses the population (divide-by-n) standard deviation. Nodata cells are
    preserved. Returns ``(standardized, mean, sd)`` so fitted coefficients
    can be mapped back to the original scale.

    Raises
    ------
    DegenerateLayerError
        If fewer than 2 non-nodata cells exist or the layer is constant.
    """
    valid = ~raster.nodata_mask
    cells = raster.values[valid]
    if cells.size < 2:
        raise DegenerateLayerError("standardize needs at least 2 non-nodata cells")
    mean = float(cells.mean())
    sd = float(cells.std())  # population denominator
    if sd == 0.0:
        raise DegenerateLayerError("constant layer has zero standard deviation")
    values = raster.values.copy()
    values[valid] = (cells - mean) / sd
    return Raster(header=raster.header, values=values), mean, sd
