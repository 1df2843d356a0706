"""File formats: binary tensors, CSV ingestion, annotation JSON and INI configs.

Binary tensor file (``.ehgt``), all fields little-endian::

    offset  size  field
    0       4     magic b"EHGT"
    4       4     uint32 version (= 1)
    8       12    uint32 m, n, t
    20      8     float64 sample rate in Hz (0 when unknown)
    28      8*m*n*t  float64 payload, mode-1 fastest (Fortran order)
"""

import configparser
import csv
import hashlib
import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, IngestionError, ValidationError
from .evaluation import AnnotationSet
from .tensor import as_tensor3

MAGIC = b"EHGT"
VERSION = 1
_HEADER = struct.Struct("<4sIIIId")
HEADER_SIZE = _HEADER.size


def atomic_write(path, data):
    """Write bytes or text to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def tensor_bytes(x, fs=0.0):
    x = as_tensor3(x)
    m, n, t = x.shape
    header = _HEADER.pack(MAGIC, VERSION, m, n, t, float(fs or 0.0))
    return header + np.asarray(x, dtype="<f8").tobytes(order="F")


def write_tensor(path, x, fs=0.0):
    atomic_write(path, tensor_bytes(x, fs))


def parse_tensor(buf, source="<bytes>"):
    if len(buf) < HEADER_SIZE:
        raise FormatError(f"{source}: truncated header, expected {HEADER_SIZE} bytes, got {len(buf)}", offset=len(buf))
    magic, version, m, n, t, fs = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version} (this reader handles {VERSION})", offset=4)
    expected = HEADER_SIZE + 8 * m * n * t
    if len(buf) != expected:
        kind = "truncated" if len(buf) < expected else "oversized"
        raise FormatError(
            f"{source}: {kind} payload, expected {expected} bytes for {m}x{n}x{t}, got {len(buf)}",
            offset=min(len(buf), expected),
        )
    flat = np.frombuffer(buf, dtype="<f8", offset=HEADER_SIZE, count=m * n * t)
    x = flat.astype(np.float64).reshape((m, n, t), order="F")
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(flat))[0])
        raise FormatError(f"{source}: non-finite value in payload", offset=HEADER_SIZE + 8 * bad)
    return x, float(fs)


def read_tensor(path):
    """Returns ``(tensor, fs)``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    return parse_tensor(buf, os.fspath(path))


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- CSV ingestion ------------------------------------------------------------------


@dataclass(frozen=True)
class CsvLayout:
    """Where each CSV column goes on the electrode grid.

    ``channel_order[c] = (row, col)`` for data column ``c``.  ``skip_columns``
    leading columns (e.g. a time stamp) are ignored.  Values are taken as
    millivolts unless ``units_mv`` is false, in which case they are volts and
    scaled by 1000.
    """

    channel_order: tuple
    sample_rate_hz: float
    units_mv: bool = True
    has_header: bool = True
    skip_columns: int = 0
    delimiter: str = ","

    def __post_init__(self):
        order = tuple(tuple(int(v) for v in rc) for rc in self.channel_order)
        object.__setattr__(self, "channel_order", order)
        if not order:
            raise ValidationError("layout needs at least one channel")
        if any(r < 0 or c < 0 for r, c in order):
            raise ValidationError("grid positions must be non-negative")
        if len(set(order)) != len(order):
            raise ValidationError("a grid position is mapped more than once")
        rows, cols = self.grid
        if len(order) != rows * cols:
            raise ValidationError(f"{len(order)} channels do not cover the {rows}x{cols} grid exactly once")
        if not self.sample_rate_hz > 0:
            raise ValidationError("sample_rate_hz must be positive")

    @property
    def grid(self):
        return (max(r for r, _ in self.channel_order) + 1, max(c for _, c in self.channel_order) + 1)

    @classmethod
    def row_major(cls, rows, cols, sample_rate_hz, **kw):
        return cls(tuple((r, c) for r in range(rows) for c in range(cols)), sample_rate_hz, **kw)

    @classmethod
    def two_by_two(cls, sample_rate_hz, **kw):
        """Four exported channels on a 2x2 grid, row-major: S1 S2 / S3 S4.

        Three-channel bipolar exports supply the fourth cell as an extra
        column before ingestion (see the README export recipe).
        """
        return cls.row_major(2, 2, sample_rate_hz, **kw)

    def to_dict(self):
        return {
            "channel_order": [list(rc) for rc in self.channel_order],
            "sample_rate_hz": self.sample_rate_hz,
            "units_mv": self.units_mv,
            "has_header": self.has_header,
            "skip_columns": self.skip_columns,
            "delimiter": self.delimiter,
        }


def ingest_csv(path, layout):
    """Read an exported recording into an (rows, cols, T) tensor in millivolts."""
    n_data = len(layout.channel_order)
    width = layout.skip_columns + n_data
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=layout.delimiter)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and layout.has_header:
                if len(row) != width:
                    raise IngestionError(f"{path}: header has {len(row)} columns, layout expects {width}", row=1)
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != width:
                raise IngestionError(f"{path}: row {lineno} has {len(row)} columns, expected {width}", row=lineno)
            parsed = []
            for col, cell in enumerate(row[layout.skip_columns :], start=layout.skip_columns + 1):
                try:
                    v = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"{path}: non-numeric cell {cell!r} at row {lineno}, column {col}", row=lineno, column=col
                    ) from None
                if not math.isfinite(v):
                    raise IngestionError(f"{path}: non-finite cell at row {lineno}, column {col}", row=lineno, column=col)
                parsed.append(v)
            values.append(parsed)
    if len(values) < 2:
        raise IngestionError(f"{path}: need at least two data rows, got {len(values)}")
    data = np.asarray(values, dtype=np.float64)
    if not layout.units_mv:
        data = data * 1000.0
    rows, cols = layout.grid
    x = np.zeros((rows, cols, data.shape[0]))
    for c, (r, k) in enumerate(layout.channel_order):
        x[r, k, :] = data[:, c]
    return x


# -- annotations -----------------------------------------------------------------------


def read_annotations(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return AnnotationSet.from_dict(doc)


def write_annotations(path, ann):
    atomic_write(path, dumps_json(ann.to_dict()))


# -- JSON and INI ------------------------------------------------------------------------


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, (tuple, set, frozenset)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps_json(obj):
    """Deterministic JSON; floats use the shortest repr that round-trips."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps_json(obj))


def read_config(path):
    """INI file as ``{section: {key: value}}`` with string values."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return {s: dict(parser[s]) for s in parser.sections()}
