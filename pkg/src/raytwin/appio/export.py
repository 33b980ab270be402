"""Field files: CSV with a metadata line, or a little-endian binary grid.

Binary layout (64-byte header, then float64 values row-major by y then x)::

    0   4s   magic b"RTWF"
    4   u32  format version (1)
    8   u32  nx
    12  u32  ny
    16  f64  spacing [m]
    24  3f64 origin [m] (cell (0, 0) centre is origin + (0, 0, rx_height))
    48  f64  no-data sentinel
    56  8x   padding

CSV rows are ``x,y,value`` in the same order; values use the shortest
round-trip repr, ``-inf``/``inf`` for infinities and ``nodata`` for cells
outside the valid mask, so CSV <-> binary conversion is lossless.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"RTWF"
VERSION = 1
NODATA = -9999.0
HEADER = struct.Struct("<4sIIId3dd8x")
assert HEADER.size == 64


class FieldFormatError(ValueError):
    pass


@dataclass
class FieldGrid:
    """A single exported field with the grid geometry needed to place it."""

    values: np.ndarray  # (ny, nx) float64, NaN = no data
    origin: tuple
    spacing: float
    name: str = ""
    rx_height: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("field values must be a 2-D (ny, nx) array")
        self.origin = tuple(float(v) for v in self.origin)
        self.spacing = float(self.spacing)
        self.rx_height = float(self.rx_height)

    @property
    def shape(self):
        return self.values.shape


def _fmt(v):
    if math.isnan(v):
        return "nodata"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _parse(s):
    if s == "nodata":
        return math.nan
    return float(s)


def write_csv(path, fg):
    ny, nx = fg.shape
    ox, oy, oz = fg.origin
    lines = [f"# raytwin-field name={fg.name} nx={nx} ny={ny} spacing={fg.spacing!r} "
             f"origin={ox!r},{oy!r},{oz!r} rx_height={fg.rx_height!r}",
             "x,y,value"]
    for j in range(ny):
        y = oy + j * fg.spacing
        for i in range(nx):
            x = ox + i * fg.spacing
            lines.append(f"{x!r},{y!r},{_fmt(fg.values[j, i])}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    with open(path, "r", encoding="ascii") as fh:
        meta = fh.readline()
        if not meta.startswith("# raytwin-field "):
            raise FieldFormatError(f"{path}: missing raytwin-field metadata line")
        kv = dict(item.split("=", 1) for item in meta[len("# raytwin-field "):].split())
        if fh.readline().strip() != "x,y,value":
            raise FieldFormatError(f"{path}: expected 'x,y,value' header")
        nx, ny = int(kv["nx"]), int(kv["ny"])
        vals = []
        for line in fh:
            if line.strip():
                vals.append(_parse(line.rstrip("\n").split(",")[2]))
    if len(vals) != nx * ny:
        raise FieldFormatError(f"{path}: expected {nx * ny} rows, found {len(vals)}")
    origin = tuple(float(v) for v in kv["origin"].split(","))
    return FieldGrid(np.array(vals, dtype=np.float64).reshape(ny, nx), origin,
                     float(kv["spacing"]), kv.get("name", ""), float(kv.get("rx_height", 0.0)))


def write_binary(path, fg, nodata=NODATA):
    ny, nx = fg.shape
    data = np.where(np.isnan(fg.values), nodata, fg.values).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, nx, ny, float(fg.spacing), *map(float, fg.origin),
                             float(nodata)))
        fh.write(np.ascontiguousarray(data).tobytes())


def read_binary(path, name="", rx_height=0.0):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER.size:
        raise FieldFormatError(f"{path}: truncated header")
    magic, version, nx, ny, spacing, ox, oy, oz, nodata = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FieldFormatError(f"{path}: unsupported version {version}")
    body = raw[HEADER.size:]
    if len(body) != 8 * nx * ny:
        raise FieldFormatError(f"{path}: expected {nx * ny} values")
    vals = np.frombuffer(body, dtype="<f8").reshape(ny, nx).astype(np.float64)
    vals = np.where(vals == nodata, np.nan, vals)
    return FieldGrid(vals, (ox, oy, oz), spacing, name, rx_height)


EXTENSIONS = {"csv": ".csv", "binary": ".bin"}


def write_field(path_stem, fg, fmt):
    path = f"{path_stem}{EXTENSIONS[fmt]}"
    if fmt == "csv":
        write_csv(path, fg)
    else:
        write_binary(path, fg)
    return path


def read_field(path):
    if str(path).endswith(".csv"):
        return read_csv(path)
    if str(path).endswith(".bin"):
        return read_binary(path)
    raise FieldFormatError(f"{path}: unknown field file extension")


def csv_to_binary(src, dst):
    write_binary(dst, read_csv(src))


def binary_to_csv(src, dst, name="", rx_height=0.0):
    write_csv(dst, read_binary(src, name, rx_height))
