"""File formats: GML trace ingestion, plan/trajectory serialization,
grayscale image read/write, and SVG export.

Parsers reject malformed input instead of repairing it, and every
error carries location context (XML line, JSON field path, byte
offset).  Serialization is deterministic: stable field order and
shortest exact float formatting.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .initplan import Polyline
from .model import MotorPlan, Trajectory, VirtualTarget
from .render import BezierPath, RasterImage

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class GmlParseError(ValueError):
    """Malformed or empty GML input."""


class SchemaError(ValueError):
    """Structured-text document violating the plan/trajectory schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ImageFormatError(ValueError):
    """Unsupported or corrupt image data."""


# ---------------------------------------------------------------------------
# GML
# ---------------------------------------------------------------------------

@dataclass
class GmlDocument:
    """Strokes of a recorded tag with the source screen dimensions."""

    strokes: list[Polyline] = field(default_factory=list)
    dims: tuple[float, float] | None = None
    version: str | None = None


def _child_float(pt, names) -> float | None:
    for name in names:
        node = pt.find(name)
        if node is not None and node.text is not None:
            return float(node.text)
    return None


def parse_gml(text: str) -> GmlDocument:
    """Parse the tag/drawing/stroke/pt subset of Graffiti Markup Language.

    Coordinates are divided by the header screenBounds when present,
    otherwise they are assumed to be normalized already.  Timestamps
    (t or time elements) are optional but must be consistent within a
    stroke.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise GmlParseError(f"malformed XML at line {line}, column {col}: "
                            f"{exc.msg if hasattr(exc, 'msg') else exc}") from exc
    version = root.get("spec") or root.get("version")
    bounds = root.find(".//screenBounds")
    dims = None
    if bounds is not None:
        bx = _child_float(bounds, ("x",))
        by = _child_float(bounds, ("y",))
        if bx and by and bx > 0 and by > 0:
            dims = (bx, by)
    strokes = []
    for si, stroke in enumerate(root.iter("stroke")):
        pts, times = [], []
        for pi, pt in enumerate(stroke.findall("pt")):
            x = _child_float(pt, ("x",))
            y = _child_float(pt, ("y",))
            if x is None or y is None:
                raise GmlParseError(f"stroke {si} point {pi} lacks x/y")
            if dims:
                x, y = x / dims[0], y / dims[1]
            pts.append((x, y))
            times.append(_child_float(pt, ("t", "time")))
        if len(pts) < 2:
            raise GmlParseError(f"stroke {si} has fewer than 2 points")
        has_t = [t is not None for t in times]
        if any(has_t) and not all(has_t):
            raise GmlParseError(f"stroke {si} mixes timed and untimed points")
        strokes.append(Polyline(points=np.asarray(pts),
                                times=np.asarray(times, dtype=float) if all(has_t) else None))
    if not strokes:
        raise GmlParseError("document contains no strokes")
    return GmlDocument(strokes=strokes, dims=dims, version=version)


def export_gml(doc: GmlDocument) -> str:
    """Write the same GML subset parse_gml reads; round-trips exactly."""
    lines = [f'<gml spec="{doc.version}">' if doc.version else "<gml>", " <tag>"]
    if doc.dims:
        lines += ["  <header>", "   <environment>", "    <screenBounds>",
                  f"     <x>{doc.dims[0]!r}</x>", f"     <y>{doc.dims[1]!r}</y>",
                  "    </screenBounds>", "   </environment>", "  </header>"]
    lines.append("  <drawing>")
    sx, sy = doc.dims if doc.dims else (1.0, 1.0)
    for stroke in doc.strokes:
        lines.append("   <stroke>")
        for i, (x, y) in enumerate(stroke.points):
            lines.append("    <pt>")
            lines.append(f"     <x>{x * sx!r}</x>")
            lines.append(f"     <y>{y * sy!r}</y>")
            if stroke.times is not None:
                lines.append(f"     <t>{stroke.times[i]!r}</t>")
            lines.append("    </pt>")
        lines.append("   </stroke>")
    lines += ["  </drawing>", " </tag>", "</gml>"]
    return "\n".join(lines) + "\n"


def concat_strokes(doc: GmlDocument) -> tuple[Polyline, list[int]]:
    """Join all strokes into one polyline, reporting where each new
    stroke begins (pen-up gap markers); the fitting pipeline works on
    single continuous traces."""
    points = np.vstack([s.points for s in doc.strokes])
    gaps, at = [], 0
    for s in doc.strokes[:-1]:
        at += len(s)
        gaps.append(at)
    return Polyline(points=points), gaps


# ---------------------------------------------------------------------------
# Images (binary PGM mandatory, 8-bit grayscale PNG read optional)
# ---------------------------------------------------------------------------

def _parse_pgm(blob: bytes) -> np.ndarray:
    pos = 2  # past "P5"
    fields = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM header")
        fields.append(blob[start:pos])
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise ImageFormatError(f"bad PGM header fields {fields}") from exc
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"zero image dimension {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"only 8-bit PGM supported, maxval={maxval}")
    pos += 1  # single whitespace byte after maxval
    payload = blob[pos:pos + width * height]
    if len(payload) != width * height:
        raise ImageFormatError(
            f"truncated PGM payload: expected {width * height} bytes, "
            f"got {len(payload)}")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return data.astype(float) / 255.0


def read_image(path) -> RasterImage:
    """Read a grayscale image: binary PGM (P5), or 8-bit grayscale PNG."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] == b"P5":
        return RasterImage.from_array(_parse_pgm(blob))
    if blob[:8] == _PNG_MAGIC:
        from PIL import Image
        import io as _io
        img = Image.open(_io.BytesIO(blob)).convert("L")
        if img.width == 0 or img.height == 0:
            raise ImageFormatError("zero image dimension")
        return RasterImage.from_array(np.asarray(img, dtype=float) / 255.0)
    raise ImageFormatError(f"unsupported image format in {path}")


def write_image(img: RasterImage, path) -> None:
    """Write binary PGM (P5, 8-bit)."""
    data = np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


# ---------------------------------------------------------------------------
# SVG export
# ---------------------------------------------------------------------------

def export_svg(path: BezierPath, canvas: tuple[int, int], widths=None) -> str:
    """Minimal SVG document: one cubic path element per segment.

    Stroke width defaults to the mean of the segment's endpoint radii,
    or 1.0 when the path carries no radii.
    """
    if len(path) == 0:
        raise ValueError("cannot export an empty path")
    width, height = canvas
    if widths is not None:
        widths = np.asarray(widths, dtype=float)
        if len(widths) != len(path):
            raise ValueError("one width per segment required")
    elif path.radii.size:
        widths = 0.5 * (path.radii[:-1] + path.radii[1:])
    else:
        widths = np.full(len(path), 1.0)
    f = lambda v: f"{v:.3f}"
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
    ]
    for seg, w in zip(path.segments, widths):
        d = (f"M {f(seg[0, 0])} {f(seg[0, 1])} "
             f"C {f(seg[1, 0])} {f(seg[1, 1])}, "
             f"{f(seg[2, 0])} {f(seg[2, 1])}, "
             f"{f(seg[3, 0])} {f(seg[3, 1])}")
        lines.append(f'  <path d="{d}" fill="none" stroke="black" '
                     f'stroke-width="{f(w)}" stroke-linecap="round"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Plan / trajectory documents (JSON schema)
# ---------------------------------------------------------------------------

def _require(obj, key, path, kind):
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing")
    val = obj[key]
    if kind == "number":
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise SchemaError(f"{path}.{key}" if path else key, "must be a number")
    elif kind == "list":
        if not isinstance(val, list):
            raise SchemaError(f"{path}.{key}" if path else key, "must be a list")
    return val


def _vec3(val, path) -> np.ndarray:
    if (not isinstance(val, list) or len(val) != 3
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in val)):
        raise SchemaError(path, "must be a list of 3 numbers")
    return np.asarray(val, dtype=float)


def serialize_plan(plan: MotorPlan) -> str:
    doc = {
        "p0": list(plan.p0),
        "strokes": [
            {"p": list(s.p), "delta": s.delta, "dt": s.dt, "T": s.T, "Ac": s.Ac}
            for s in plan.strokes
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_plan(text: str) -> MotorPlan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    p0 = _vec3(_require(doc, "p0", "", "list"), "p0")
    strokes_doc = _require(doc, "strokes", "", "list")
    if not strokes_doc:
        raise SchemaError("strokes", "must contain at least one stroke")
    strokes = []
    for k, item in enumerate(strokes_doc):
        path = f"strokes[{k}]"
        p = _vec3(_require(item, "p", path, "list"), f"{path}.p")
        kwargs = {}
        for key in ("delta", "dt", "T", "Ac"):
            kwargs[key] = float(_require(item, key, path, "number"))
        try:
            strokes.append(VirtualTarget(p=p, **kwargs))
        except ValueError as exc:
            raise SchemaError(path, str(exc)) from exc
    try:
        return MotorPlan(p0=p0, strokes=strokes)
    except ValueError as exc:
        raise SchemaError("$", str(exc)) from exc


def serialize_trajectory(traj: Trajectory) -> str:
    doc = {
        "t": list(traj.t),
        "x": [list(row) for row in traj.x],
        "v": [list(row) for row in traj.v],
        "a": [list(row) for row in traj.a],
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_trajectory(text: str) -> Trajectory:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    t = _require(doc, "t", "", "list")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in t):
        raise SchemaError("t", "must be a list of numbers")
    arrays = {"t": np.asarray(t, dtype=float)}
    for key in ("x", "v", "a"):
        rows = _require(doc, key, "", "list")
        for i, row in enumerate(rows):
            _vec3(row, f"{key}[{i}]")
        arrays[key] = np.asarray(rows, dtype=float).reshape(-1, 3)
    try:
        return Trajectory(**arrays)
    except ValueError as exc:
        raise SchemaError("$", str(exc)) from exc
