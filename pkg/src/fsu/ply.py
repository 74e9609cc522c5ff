"""Minimal PLY reader/writer for vertex clouds (ascii and binary_little_endian)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .core import PointCloud

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_FORMATS = ("ascii", "binary_little_endian")


class PlyError(ValueError):
    """Raised for malformed or unsupported PLY input."""


@dataclass
class _Property:
    name: str
    dtype: str
    count_dtype: str = ""  # set for list properties

    @property
    def is_list(self):
        return bool(self.count_dtype)


@dataclass
class _Element:
    name: str
    count: int
    properties: List[_Property] = field(default_factory=list)


@dataclass
class PlyHeaderInfo:
    format: str
    vertex_count: int
    has_color: bool
    property_names: List[str]


def _parse_header(fh):
    """Parse the header; returns (format, elements, body offset in bytes)."""
    offset = 0
    line_no = 0

    def next_line():
        nonlocal offset, line_no
        raw = fh.readline()
        if not raw:
            raise PlyError(f"unexpected end of file in header at line {line_no + 1} "
                           f"(byte {offset})")
        offset += len(raw)
        line_no += 1
        return raw.decode("ascii", errors="replace").strip()

    if next_line() != "ply":
        raise PlyError("missing 'ply' magic at line 1 (byte 0)")
    fmt = None
    elements: List[_Element] = []
    while True:
        where = f"line {line_no + 1} (byte {offset})"
        line = next_line()
        if not line or line.startswith(("comment", "obj_info")):
            continue
        tokens = line.split()
        key = tokens[0]
        if key == "format":
            if len(tokens) != 3 or tokens[1] not in _FORMATS:
                raise PlyError(f"unsupported format {line!r} at {where}")
            fmt = tokens[1]
        elif key == "element":
            if len(tokens) != 3:
                raise PlyError(f"malformed element declaration at {where}")
            try:
                count = int(tokens[2])
            except ValueError:
                raise PlyError(f"bad element count {tokens[2]!r} at {where}") from None
            if count < 0:
                raise PlyError(f"negative element count at {where}")
            elements.append(_Element(tokens[1], count))
        elif key == "property":
            if not elements:
                raise PlyError(f"property before any element at {where}")
            if len(tokens) == 5 and tokens[1] == "list":
                if tokens[2] not in _PLY_TYPES or tokens[3] not in _PLY_TYPES:
                    raise PlyError(f"unknown list types at {where}")
                prop = _Property(tokens[4], _PLY_TYPES[tokens[3]], _PLY_TYPES[tokens[2]])
            elif len(tokens) == 3:
                if tokens[1] not in _PLY_TYPES:
                    raise PlyError(f"unknown property type {tokens[1]!r} at {where}")
                prop = _Property(tokens[2], _PLY_TYPES[tokens[1]])
            else:
                raise PlyError(f"malformed property declaration at {where}")
            elements[-1].properties.append(prop)
        elif key == "end_header":
            break
        else:
            raise PlyError(f"unexpected header keyword {key!r} at {where}")
    if fmt is None:
        raise PlyError("header has no format line")
    return fmt, elements, offset


def _vertex_element(elements):
    for el in elements:
        if el.name == "vertex":
            names = [p.name for p in el.properties]
            missing = {"x", "y", "z"} - set(names)
            if missing:
                raise PlyError(f"vertex element lacks properties {sorted(missing)}")
            return el
    raise PlyError("no vertex element declared")


def read_ply_header(path) -> PlyHeaderInfo:
    with open(path, "rb") as fh:
        fmt, elements, _ = _parse_header(fh)
    vertex = _vertex_element(elements)
    names = [p.name for p in vertex.properties]
    return PlyHeaderInfo(fmt, vertex.count, {"red", "green", "blue"} <= set(names), names)


def _read_ascii(fh, elements, vertex, offset):
    lines = fh.read().decode("ascii", errors="replace").splitlines()
    line_at = 0
    for el in elements:
        if el is vertex:
            break
        line_at += el.count  # one record per line in ascii PLY
    rows = lines[line_at:line_at + vertex.count]
    if len(rows) < vertex.count:
        raise PlyError(f"truncated body: expected {vertex.count} vertex lines, "
                       f"found {len(rows)} (after header ending at byte {offset})")
    if any(p.is_list for p in vertex.properties):
        table = []
        for i, row in enumerate(rows):
            tokens = row.split()
            values, pos = [], 0
            for p in vertex.properties:
                if p.is_list:
                    pos += 1 + int(tokens[pos])
                    values.append(np.nan)
                else:
                    values.append(float(tokens[pos]))
                    pos += 1
            table.append(values)
        data = np.asarray(table, dtype=np.float64).reshape(-1, len(vertex.properties))
    else:
        nprop = len(vertex.properties)
        try:
            data = np.asarray(" ".join(rows).split(), dtype=np.float64)
        except ValueError as exc:
            raise PlyError(f"non-numeric vertex data: {exc}") from None
        if data.size != nprop * vertex.count:
            raise PlyError(f"vertex body has {data.size} values, expected "
                           f"{nprop * vertex.count} (after header ending at byte {offset})")
        data = data.reshape(vertex.count, nprop)
    return {p.name: data[:, i].astype(p.dtype)
            for i, p in enumerate(vertex.properties) if not p.is_list}


def _skip_binary_element(buf, pos, el, offset):
    if not any(p.is_list for p in el.properties):
        size = sum(np.dtype(p.dtype).itemsize for p in el.properties)
        return pos + size * el.count
    for _ in range(el.count):
        for p in el.properties:
            if p.is_list:
                cdt = np.dtype("<" + p.count_dtype)
                if pos + cdt.itemsize > len(buf):
                    raise PlyError(f"truncated body at byte {offset + pos}")
                n = int(np.frombuffer(buf, cdt, 1, pos)[0])
                pos += cdt.itemsize + n * np.dtype(p.dtype).itemsize
            else:
                pos += np.dtype(p.dtype).itemsize
    return pos


def _read_binary(fh, elements, vertex, offset):
    buf = fh.read()
    pos = 0
    for el in elements:
        if el is vertex:
            break
        pos = _skip_binary_element(buf, pos, el, offset)
    if any(p.is_list for p in vertex.properties):
        raise PlyError("list properties inside binary vertex element are not supported")
    dt = np.dtype([(p.name, "<" + p.dtype) for p in vertex.properties])
    need = dt.itemsize * vertex.count
    if pos + need > len(buf):
        raise PlyError(f"truncated body: need {need} vertex bytes at byte {offset + pos}, "
                       f"file has {len(buf) - pos}")
    rec = np.frombuffer(buf, dt, vertex.count, pos)
    return {name: rec[name] for name in dt.names}


def read_ply(path) -> PointCloud:
    """Read the vertex element of a PLY file.

    Colors are attached when red, green and blue are all present. Other
    vertex properties and other elements are ignored.
    """
    with open(path, "rb") as fh:
        fmt, elements, offset = _parse_header(fh)
        vertex = _vertex_element(elements)
        if fmt == "ascii":
            cols = _read_ascii(fh, elements, vertex, offset)
        else:
            cols = _read_binary(fh, elements, vertex, offset)
    positions = np.column_stack([cols["x"], cols["y"], cols["z"]]).astype(np.float64)
    colors = None
    if all(c in cols for c in ("red", "green", "blue")):
        colors = np.column_stack([cols["red"], cols["green"], cols["blue"]])
        colors = np.clip(np.rint(colors), 0, 255).astype(np.uint8)
    return PointCloud(positions.reshape(-1, 3), colors)


def _color_bytes(colors):
    return np.clip(np.rint(np.asarray(colors, dtype=np.float64)), 0, 255).astype(np.uint8)


def write_ply(cloud: PointCloud, path, format: str = "binary_little_endian",
              double: bool = False) -> None:
    """Write ``cloud`` as x, y, z (float32, or float64 with ``double``) then
    red, green, blue uchar."""
    if format == "binary":
        format = "binary_little_endian"
    if format not in _FORMATS:
        raise PlyError(f"unsupported output format {format!r}")
    ptype = "double" if double else "float"
    n = len(cloud)
    header = ["ply", f"format {format} 1.0", f"element vertex {n}"]
    header += [f"property {ptype} {a}" for a in "xyz"]
    if cloud.has_colors:
        header += [f"property uchar {c}" for c in ("red", "green", "blue")]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")

    fields = [(a, "<f8" if double else "<f4") for a in "xyz"]
    if cloud.has_colors:
        fields += [(c, "u1") for c in ("red", "green", "blue")]
    rec = np.empty(n, dtype=np.dtype(fields))
    for i, a in enumerate("xyz"):
        rec[a] = cloud.positions[:, i]
    if cloud.has_colors:
        col = _color_bytes(cloud.colors)
        for i, c in enumerate(("red", "green", "blue")):
            rec[c] = col[:, i]

    with open(path, "wb") as fh:
        fh.write(head)
        if format == "binary_little_endian":
            fh.write(rec.tobytes())
        else:
            cols = [rec[a].astype(np.float64) for a in "xyz"]
            fmt = ["%.17g" if double else "%.9g"] * 3
            if cloud.has_colors:
                cols += [rec[c].astype(np.float64) for c in ("red", "green", "blue")]
                fmt += ["%d"] * 3
            if n:
                np.savetxt(fh, np.column_stack(cols), fmt=fmt)
