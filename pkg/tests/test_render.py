import xml.etree.ElementTree as ET

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgf.config import CanvasConfig
from sgf.env import FloorplanEnv, IllegalAction, placement_json
from sgf.netlist import NetlistError, build_netlist, random_netlist
from sgf.pipeline import gen_random
from sgf.render import CELL, module_color, render_svg

NS = {"s": "http://www.w3.org/2000/svg"}


def modules(root):
    return root.findall(".//s:rect[@class='module']", NS)


def test_empty_placement(toy3, small_cfg):
    root = ET.fromstring(render_svg({}, toy3, small_cfg))
    assert len(root.findall("s:g[@class='layer']", NS)) == small_cfg.Z
    assert modules(root) == []


def test_toy3_full(toy3, small_cfg):
    placement = {"A": {"x": 0, "y": 0, "z": 0}, "B": {"x": 2, "y": 0, "z": 0},
                 "C": {"x": 0, "y": 0, "z": 1}}
    root = ET.fromstring(render_svg(placement, toy3, small_cfg))
    layers = root.findall("s:g[@class='layer']", NS)
    assert [len(modules(g)) for g in layers] == [2, 1]
    labels = sorted(t.text for t in root.iter("{http://www.w3.org/2000/svg}text")
                    if t.get("data-module"))
    assert labels == ["A", "B", "C"]
    a = modules(layers[0])[0]
    assert (int(a.get("width")), int(a.get("height"))) == (2 * CELL, 2 * CELL)
    # y axis points up: a module at y=0 touches the bottom edge of its panel
    canvas = layers[0].find("s:rect[@class='canvas']", NS)
    assert int(a.get("y")) + int(a.get("height")) == int(canvas.get("y")) + int(canvas.get("height"))
    assert a.get("fill") == module_color("A")


def test_panels_left_to_right(toy3, small_cfg):
    root = ET.fromstring(render_svg({}, toy3, small_cfg))
    xs = [int(g.find("s:rect[@class='canvas']", NS).get("x")) for g in root.findall("s:g", NS)]
    assert xs == sorted(xs) and len(set(xs)) == small_cfg.Z


def test_overlap_refused(toy3, small_cfg):
    placement = {"A": {"x": 0, "y": 0, "z": 0}, "B": {"x": 1, "y": 1, "z": 0}}
    with pytest.raises(IllegalAction, match="overlap"):
        render_svg(placement, toy3, small_cfg)


@pytest.mark.parametrize("pos", [{"x": 5, "y": 0, "z": 0}, {"x": 0, "y": 0, "z": 2},
                                 {"x": -1, "y": 0, "z": 0}])
def test_out_of_bounds_refused(toy3, small_cfg, pos):
    with pytest.raises(IllegalAction, match="out of bounds"):
        render_svg({"A": pos}, toy3, small_cfg)


def test_unknown_module(toy3, small_cfg):
    with pytest.raises(NetlistError):
        render_svg({"Q": {"x": 0, "y": 0, "z": 0}}, toy3, small_cfg)


def test_color_stable():
    assert module_color("A") == module_color("A") != module_color("B")
    assert module_color("blk0").startswith("#") and len(module_color("blk0")) == 7


@given(st.integers(0, 1000))
def test_random_layouts_well_formed(seed):
    cfg = CanvasConfig(10, 8, 2)
    n = random_netlist(6, 5, seed, max_dim=3, name="r")
    (tr,) = gen_random(n, cfg, 1, seed)
    env = FloorplanEnv(n, cfg)
    s = env.reset()
    for rec in tr.steps:
        s, _, _ = env.step(s, rec.action)
    text = render_svg(placement_json(env, s), n, cfg)
    assert len(modules(ET.fromstring(text))) == 6
    assert text == render_svg(placement_json(env, s), n, cfg)


def test_markup_in_names_escaped(small_cfg):
    n = build_netlist("x", [("a<b&c", 1, 1), ('q"', 1, 1)], [])
    text = render_svg({"a<b&c": {"x": 0, "y": 0, "z": 0}, 'q"': {"x": 1, "y": 0, "z": 0}}, n, small_cfg)
    root = ET.fromstring(text)
    assert sorted(t.get("data-module") for t in root.iter("{http://www.w3.org/2000/svg}text")
                  if t.get("data-module")) == ['a<b&c', 'q"']
