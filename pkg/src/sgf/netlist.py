"""Netlist model, GSRC bookshelf reader and the canonical JSON format."""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass

import numpy as np

from .config import CanvasConfig


class NetlistError(ValueError):
    """Raised on malformed or invalid netlist input."""


@dataclass(frozen=True)
class Module:
    id: int
    name: str
    width: int
    height: int

    @property
    def area(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class Net:
    id: int
    pins: tuple[int, ...]


@dataclass(frozen=True)
class Netlist:
    name: str
    modules: tuple[Module, ...]
    nets: tuple[Net, ...]

    @property
    def n_modules(self) -> int:
        return len(self.modules)

    def index(self, name: str) -> int:
        for m in self.modules:
            if m.name == name:
                return m.id
        raise KeyError(name)

    def content_hash(self) -> str:
        return hashlib.sha256(serialize_canonical(self).encode()).hexdigest()[:16]


def build_netlist(name: str, modules, nets) -> Netlist:
    """Build a netlist from ``[(name, w, h), ...]`` and ``[[pin names], ...]``.

    Duplicate pins inside a net are collapsed; nets that end up with fewer
    than two distinct modules raise.
    """
    if not modules:
        raise NetlistError("netlist has no modules")
    mods = []
    ids = {}
    for i, (mname, w, h) in enumerate(modules):
        if not isinstance(mname, str) or not mname:
            raise NetlistError(f"module {i}: name must be a nonempty string")
        if mname in ids:
            raise NetlistError(f"duplicate module name {mname!r}")
        if not isinstance(w, int) or isinstance(w, bool) or w < 1:
            raise NetlistError(f"module {mname!r}: width must be ≥1")
        if not isinstance(h, int) or isinstance(h, bool) or h < 1:
            raise NetlistError(f"module {mname!r}: height must be ≥1")
        ids[mname] = i
        mods.append(Module(i, mname, w, h))
    out_nets = []
    for j, pins in enumerate(nets):
        try:
            pin_ids = [ids[p] for p in pins]
        except KeyError as e:
            raise NetlistError(f"net {j}: unknown module {e.args[0]!r}") from None
        uniq = tuple(dict.fromkeys(pin_ids))
        if len(uniq) < 2:
            raise NetlistError(f"net {j}: needs ≥2 distinct pins")
        out_nets.append(Net(j, uniq))
    return Netlist(name, tuple(mods), tuple(out_nets))


# ----------------------------------------------------------------- canonical

def serialize_canonical(n: Netlist) -> str:
    doc = {
        "name": n.name,
        "modules": [{"name": m.name, "w": m.width, "h": m.height} for m in n.modules],
        "nets": [[n.modules[p].name for p in net.pins] for net in n.nets],
    }
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def parse_canonical(text: str) -> Netlist:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetlistError(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise NetlistError("top level must be an object")
    for key in ("name", "modules", "nets"):
        if key not in doc:
            raise NetlistError(f"missing field {key!r}")
    if not isinstance(doc["modules"], list) or not isinstance(doc["nets"], list):
        raise NetlistError("'modules' and 'nets' must be lists")
    mods = []
    for i, m in enumerate(doc["modules"]):
        if not isinstance(m, dict) or set(m) != {"name", "w", "h"}:
            raise NetlistError(f"module {i}: expected fields name, w, h")
        mods.append((m["name"], m["w"], m["h"]))
    for j, net in enumerate(doc["nets"]):
        if not isinstance(net, list) or not all(isinstance(p, str) for p in net):
            raise NetlistError(f"net {j}: expected a list of module names")
    return build_netlist(str(doc["name"]), mods, doc["nets"])


def load_netlist(path) -> Netlist:
    with open(path, encoding="utf-8") as fh:
        return parse_canonical(fh.read())


# ---------------------------------------------------------------------- GSRC

_HDR_BLOCKS = re.compile(r"^UCSC\s+blocks\s+[\d.]+$")
_HDR_NETS = re.compile(r"^UCSC\s+nets\s+[\d.]+$")
_POINT = re.compile(r"\(\s*(-?[\d.eE+-]+)\s*,\s*(-?[\d.eE+-]+)\s*\)")


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _rect_from_outline(pts, lineno):
    if len(pts) != 4:
        raise NetlistError(f"line {lineno}: outline must have 4 corners")
    xs = sorted({p[0] for p in pts})
    ys = sorted({p[1] for p in pts})
    if len(xs) != 2 or len(ys) != 2:
        raise NetlistError(f"line {lineno}: non-rectangular outline")
    corners = {(x, y) for x in xs for y in ys}
    if set(pts) != corners:
        raise NetlistError(f"line {lineno}: non-rectangular outline")
    return xs[1] - xs[0], ys[1] - ys[0]


def parse_gsrc(blocks_text: str, nets_text: str, cfg: CanvasConfig | None = None,
               name: str = "gsrc") -> Netlist:
    """Read GSRC bookshelf ``.blocks`` and ``.nets`` text.

    With ``cfg`` None, dimensions are kept in file units (rounded up to whole
    cells). With a canvas, the largest module dimension is scaled to
    ``ceil(W/4)`` cells and every dimension is rounded up. Soft blocks become
    squares of equal area. Terminals are dropped from nets.
    """
    lines = list(_content_lines(blocks_text))
    if not lines or not _HDR_BLOCKS.match(lines[0][1]):
        ln = lines[0][0] if lines else 1
        raise NetlistError(f"line {ln}: malformed blocks header")
    raw_dims: list[tuple[str, float, float]] = []
    terminals: set[str] = set()
    for lineno, line in lines[1:]:
        if ":" in line and line.split(":")[0].strip().startswith("Num"):
            continue
        toks = line.split()
        if len(toks) < 2:
            raise NetlistError(f"line {lineno}: cannot parse block line")
        bname, kind = toks[0], toks[1].lower()
        if kind == "terminal":
            terminals.add(bname)
        elif kind == "hardrectilinear":
            pts = [(float(a), float(b)) for a, b in _POINT.findall(line)]
            try:
                count = int(toks[2])
            except (IndexError, ValueError):
                raise NetlistError(f"line {lineno}: missing corner count") from None
            if count != len(pts):
                raise NetlistError(f"line {lineno}: expected {count} corners, found {len(pts)}")
            w, h = _rect_from_outline(pts, lineno)
            if w <= 0 or h <= 0:
                raise NetlistError(f"line {lineno}: degenerate outline")
            raw_dims.append((bname, w, h))
        elif kind == "softrectangular":
            try:
                area = float(toks[2])
            except (IndexError, ValueError):
                raise NetlistError(f"line {lineno}: soft block needs an area") from None
            side = math.sqrt(area)
            raw_dims.append((bname, side, side))
        else:
            raise NetlistError(f"line {lineno}: unknown block type {toks[1]!r}")
    if not raw_dims:
        raise NetlistError("no blocks found")

    if cfg is None:
        scale = 1.0
    else:
        largest = max(max(w, h) for _, w, h in raw_dims)
        scale = math.ceil(cfg.W / 4) / largest
    modules = []
    for bname, w, h in raw_dims:
        # guard against 3.0000000001-style float noise before ceil
        cw = max(1, math.ceil(round(w * scale, 9)))
        ch = max(1, math.ceil(round(h * scale, 9)))
        modules.append((bname, cw, ch))
    known = {b for b, _, _ in raw_dims}

    nlines = list(_content_lines(nets_text))
    if not nlines or not _HDR_NETS.match(nlines[0][1]):
        ln = nlines[0][0] if nlines else 1
        raise NetlistError(f"line {ln}: malformed nets header")
    nets: list[list[str]] = []
    current: list[str] | None = None
    remaining = 0
    for lineno, line in nlines[1:]:
        head = line.split(":")[0].strip()
        if head == "NetDegree":
            if remaining:
                raise NetlistError(f"line {lineno}: previous net is missing {remaining} pins")
            try:
                remaining = int(line.split(":")[1].split()[0])
            except (IndexError, ValueError):
                raise NetlistError(f"line {lineno}: malformed NetDegree") from None
            current = []
            nets.append(current)
            continue
        if head in ("NumNets", "NumPins"):
            continue
        if current is None or remaining == 0:
            raise NetlistError(f"line {lineno}: pin outside a net")
        pin = line.split()[0]
        if pin in terminals:
            pass
        elif pin in known:
            current.append(pin)
        else:
            raise NetlistError(f"line {lineno}: unknown pin name {pin!r}")
        remaining -= 1
    if remaining:
        raise NetlistError("last net is missing pins")
    kept = [list(dict.fromkeys(p)) for p in nets]
    kept = [p for p in kept if len(p) >= 2]
    return build_netlist(name, modules, kept)


# -------------------------------------------------------------- derived data

def net_count_matrix(n: Netlist) -> np.ndarray:
    """Symmetric matrix whose (a, b) entry counts the nets containing both a and b."""
    m = np.zeros((n.n_modules, n.n_modules), dtype=np.int64)
    for net in n.nets:
        pins = net.pins
        for i, a in enumerate(pins):
            for b in pins[i + 1:]:
                m[a, b] += 1
                m[b, a] += 1
    return m


def degrees(m: np.ndarray) -> np.ndarray:
    return (m > 0).sum(axis=1)


def validate(n: Netlist, cfg: CanvasConfig) -> list[str]:
    """Return human-readable violations; empty means the netlist fits ``cfg``."""
    out = []
    if not n.modules:
        out.append("netlist has no modules")
    seen: set[str] = set()
    for i, m in enumerate(n.modules):
        if m.id != i:
            out.append(f"module {m.name!r}: id {m.id} out of sequence (expected {i})")
        if m.name in seen:
            out.append(f"module {m.name!r}: duplicate name")
        seen.add(m.name)
        if m.width < 1 or m.height < 1:
            out.append(f"module {m.name!r}: dimensions must be ≥1")
        if m.width > cfg.W or m.height > cfg.H:
            out.append(f"module {m.name!r}: {m.width}x{m.height} exceeds canvas {cfg.W}x{cfg.H}")
    for net in n.nets:
        if len(set(net.pins)) < 2:
            out.append(f"net {net.id}: fewer than 2 distinct pins")
        if any(p < 0 or p >= len(n.modules) for p in net.pins):
            out.append(f"net {net.id}: invalid pin id")
    return out


def random_netlist(n_modules: int, n_nets: int, seed: int, max_dim: int = 4,
                   max_degree: int = 3, name: str | None = None) -> Netlist:
    """Seeded synthetic netlist with module sides in ``1..max_dim``."""
    rng = np.random.default_rng(seed)
    mods = [(f"m{i}", int(rng.integers(1, max_dim + 1)), int(rng.integers(1, max_dim + 1)))
            for i in range(n_modules)]
    nets = []
    if n_modules >= 2:
        for _ in range(n_nets):
            deg = int(rng.integers(2, min(max_degree, n_modules) + 1))
            pins = rng.choice(n_modules, size=deg, replace=False)
            nets.append([f"m{int(p)}" for p in pins])
    return build_netlist(name or f"rand{n_modules}_{seed}", mods, nets)


def toy3() -> Netlist:
    """Three-module fixture: A 2x2, B 2x1, C 1x1; nets {A,B}, {B,C}, {A,B}."""
    return build_netlist("toy3", [("A", 2, 2), ("B", 2, 1), ("C", 1, 1)],
                         [["A", "B"], ["B", "C"], ["A", "B"]])
