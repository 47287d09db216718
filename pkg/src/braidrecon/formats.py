"""Text file formats: strands, mid-line annotations, params, traces, PLY, PGM."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .strands import GrayImage, MidLineAnnotation, Strand, StrandSet, ValidationError, orient_root_first
from .synth import BraidParams


class ParseError(ValidationError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


class UnsupportedFormatError(ValidationError):
    pass


class DecodeError(ValidationError):
    pass


def _num(x: float) -> str:
    return repr(float(x))


def save_strands(strands: StrandSet, path) -> None:
    lines = [f"STRANDS {len(strands)}"]
    for s in strands:
        if any(c.isspace() for c in s.id) or not s.id:
            raise ValidationError(f"strand id {s.id!r} cannot be written (empty or contains whitespace)")
        lines.append(f"S {s.id} {len(s)}")
        lines.extend(" ".join(_num(v) for v in p) for p in s.points)
    Path(path).write_text("\n".join(lines) + "\n")


def load_strands(path, root_first: bool = True) -> StrandSet:
    """Read a strand file; strands are flipped root-first unless disabled."""
    text = Path(path).read_text().splitlines()
    if not text:
        raise ParseError(path, 1, "empty file")
    head = text[0].split()
    if len(head) != 2 or head[0] != "STRANDS" or not head[1].isdigit():
        raise ParseError(path, 1, "expected 'STRANDS <n>'")
    count = int(head[1])
    strands, ids = [], set()
    pos = 1
    for _ in range(count):
        if pos >= len(text):
            raise ParseError(path, pos + 1, "unexpected end of file")
        parts = text[pos].split()
        if len(parts) != 3 or parts[0] != "S" or not parts[2].isdigit():
            raise ParseError(path, pos + 1, "expected 'S <id> <k>'")
        sid, k = parts[1], int(parts[2])
        if sid in ids:
            raise ParseError(path, pos + 1, f"duplicate strand id {sid!r}")
        ids.add(sid)
        rows = []
        for j in range(k):
            line_no = pos + 2 + j
            if line_no - 1 >= len(text):
                raise ParseError(path, line_no, "unexpected end of file")
            try:
                xyz = [float(v) for v in text[line_no - 1].split()]
            except ValueError:
                xyz = []
            if len(xyz) != 3:
                raise ParseError(path, line_no, "expected '<x> <y> <z>'")
            rows.append(xyz)
        try:
            strand = Strand(sid, np.array(rows).reshape(-1, 3))
        except ValidationError as exc:
            raise ParseError(path, pos + 1, str(exc)) from None
        strands.append(orient_root_first(strand) if root_first else strand)
        pos += 1 + k
    if any(line.strip() for line in text[pos:]):
        raise ParseError(path, pos + 1, "trailing content after last strand")
    return StrandSet(tuple(strands))


def save_midline(midline: MidLineAnnotation, path) -> None:
    lines = [f"MIDLINE {len(midline.polyline)} width_px={_num(midline.width_px)}"]
    lines.extend(f"{_num(x)} {_num(y)}" for x, y in midline.polyline)
    Path(path).write_text("\n".join(lines) + "\n")


def load_midline(path) -> MidLineAnnotation:
    """Read ``MIDLINE <n> width_px=<w>`` followed by n ``<x> <y>`` lines."""
    text = [line for line in Path(path).read_text().splitlines()]
    if not text:
        raise ParseError(path, 1, "empty file")
    head = text[0].split()
    if len(head) != 3 or head[0] != "MIDLINE" or not head[2].startswith("width_px="):
        raise ParseError(path, 1, "expected 'MIDLINE <n> width_px=<w>'")
    try:
        n = int(head[1])
        width = float(head[2].split("=", 1)[1])
    except ValueError:
        raise ParseError(path, 1, "bad point count or width") from None
    rows = []
    for j in range(n):
        if j + 1 >= len(text):
            raise ParseError(path, j + 2, "unexpected end of file")
        try:
            xy = [float(v) for v in text[j + 1].split()]
        except ValueError:
            xy = []
        if len(xy) != 2:
            raise ParseError(path, j + 2, "expected '<x> <y>'")
        rows.append(xy)
    try:
        return MidLineAnnotation.from_points(np.array(rows).reshape(-1, 2), width)
    except ValidationError as exc:
        raise ParseError(path, 1, str(exc)) from None


def params_to_dict(params: BraidParams) -> dict:
    out = {}
    for name in ("a", "b", "w", "t_step", "n_points", "n_bunches", "radius", "t_scale"):
        out[name] = getattr(params, name)
    for name in ("shift_x", "shift_y", "shift_z"):
        value = getattr(params, name)
        out[name] = value.tolist() if isinstance(value, np.ndarray) else value
    out["noise"] = list(params.noise) if params.noise is not None else None
    return out


def save_params(params: BraidParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params), indent=1, sort_keys=True) + "\n")


def load_params(path) -> BraidParams:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg) from None
    try:
        return BraidParams(**data)
    except TypeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _read_gray(path, accept_any: bool) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if not accept_any and im.format not in ("PNG", "PPM"):
                raise UnsupportedFormatError(f"{path}: unsupported format {im.format}; use PNG or PGM")
            im.load()
            if im.mode not in ("L", "1", "P", "RGB", "RGBA", "LA"):
                raise UnsupportedFormatError(f"{path}: unsupported pixel mode {im.mode}")
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise DecodeError(f"{path}: cannot decode image ({exc})") from None


def load_mask(path) -> GrayImage:
    """8-bit PNG or PGM mask, scaled to [0, 1]."""
    return GrayImage(_read_gray(path, accept_any=False))


def load_image(path) -> GrayImage:
    """Any Pillow-readable photo as luminance in [0, 1]."""
    return GrayImage(_read_gray(path, accept_any=True))


def save_pgm(image: GrayImage, path) -> None:
    data = np.rint(image.pixels * 255.0).astype(np.uint8)
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


BUNCH_COLORS = [(255, 0, 0), (0, 0, 255), (0, 255, 0)]
UNALLOCATED = (128, 128, 128)


def export_ply(strands: StrandSet, path, bunch_of: dict | None = None) -> None:
    """ASCII PLY point cloud; bunches 0/1/2 red/blue/green, everything else gray.

    ``bunch_of`` maps strand id to bunch index; an Allocation's ``bunch_of``
    works directly.
    """
    bunch_of = getattr(bunch_of, "bunch_of", bunch_of) or {}
    n = strands.n_points
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {n}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    for s in strands:
        b = bunch_of.get(s.id)
        color = BUNCH_COLORS[b] if b is not None and b < len(BUNCH_COLORS) else UNALLOCATED
        rgb = " ".join(str(c) for c in color)
        lines.extend(f"{_num(x)} {_num(y)} {_num(z)} {rgb}" for x, y, z in s.points)
    Path(path).write_text("\n".join(lines) + "\n")


TRACE_COLUMNS = ("epoch", "l_pc", "l_proj", "l_reg", "l_total", "lr")


def save_trace(trace, path) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for e, (rep, lr) in enumerate(zip(trace.reports, trace.lrs)):
        lines.append(",".join([str(e)] + [_num(v) for v in (rep.l_pc, rep.l_proj, rep.l_reg, rep.l_total, lr)]))
    Path(path).write_text("\n".join(lines) + "\n")
