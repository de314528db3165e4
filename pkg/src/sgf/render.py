"""SVG floorplan rendering: one panel per layer, laid out left to right."""
from __future__ import annotations

import hashlib
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .config import CanvasConfig
from .env import IllegalAction
from .netlist import Netlist, NetlistError

CELL = 10       # svg units per grid cell
GAP = 20        # space between panels
MARGIN = 10
TITLE = 16      # room above each panel for its caption


def module_color(name: str) -> str:
    """Stable pastel fill derived from the module name."""
    h = hashlib.md5(name.encode("utf-8")).digest()
    r, g, b = (128 + v // 2 for v in h[:3])
    return f"#{r:02x}{g:02x}{b:02x}"


def check_placement(placement: dict, n: Netlist, cfg: CanvasConfig) -> None:
    """Raise ``IllegalAction`` on out-of-bounds or overlapping modules."""
    occ = np.zeros((cfg.Z, cfg.H, cfg.W), dtype=bool)
    for name, pos in placement.items():
        try:
            m = n.modules[n.index(name)]
        except KeyError:
            raise NetlistError(f"placement names unknown module {name!r}") from None
        x, y, z = int(pos["x"]), int(pos["y"]), int(pos["z"])
        if x < 0 or y < 0 or not 0 <= z < cfg.Z or x + m.width > cfg.W or y + m.height > cfg.H:
            raise IllegalAction(f"module {name!r} at ({x}, {y}, {z}) is out of bounds")
        cells = occ[z, y:y + m.height, x:x + m.width]
        if cells.any():
            raise IllegalAction(f"module {name!r} at ({x}, {y}, {z}) overlaps another module")
        cells[:] = True


def render_svg(placement: dict, n: Netlist, cfg: CanvasConfig) -> str:
    """Render ``{name: {x, y, z}}`` as SVG text.

    The y axis points up, so anchor (0, 0) sits at the lower-left of its panel.
    """
    check_placement(placement, n, cfg)
    pw, ph = cfg.W * CELL, cfg.H * CELL
    width = 2 * MARGIN + cfg.Z * pw + (cfg.Z - 1) * GAP
    height = 2 * MARGIN + TITLE + ph
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
    ]
    for z in range(cfg.Z):
        ox = MARGIN + z * (pw + GAP)
        oy = MARGIN + TITLE
        out.append(f'<g class="layer" id="layer{z}">')
        out.append(f'<text x="{ox}" y="{oy - 4}" font-size="12">layer {z}</text>')
        out.append(f'<rect class="canvas" x="{ox}" y="{oy}" width="{pw}" height="{ph}" '
                   'fill="white" stroke="black"/>')
        for m in n.modules:
            pos = placement.get(m.name)
            if pos is None or int(pos["z"]) != z:
                continue
            x = ox + int(pos["x"]) * CELL
            y = oy + (cfg.H - int(pos["y"]) - m.height) * CELL
            w, h = m.width * CELL, m.height * CELL
            out.append(f'<rect class="module" x="{x}" y="{y}" width="{w}" height="{h}" '
                       f'fill="{module_color(m.name)}" stroke="black">'
                       f'<title>{escape(m.name)}</title></rect>')
            out.append(f'<text x="{x + w / 2:g}" y="{y + h / 2:g}" font-size="{min(10, h // 2 + 4)}" '
                       f'text-anchor="middle" dominant-baseline="middle" '
                       f'data-module={quoteattr(m.name)}>{escape(m.name)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
