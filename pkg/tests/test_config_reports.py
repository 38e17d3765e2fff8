import json
from fractions import Fraction

import pytest

from staircase_flow.config import ConfigError, config_from_dict, load_config, parse_q, parse_qnum
from staircase_flow.exact import DEFAULT_Q, QuadraticQ, RealQ
from staircase_flow.reports import csv_text, exact_cell, format_cell, polygon_svg, write_csv
from staircase_flow.staircase import classical_staircase
from staircase_flow.suspension import SuspensionFlow


def test_defaults():
    cfg = load_config(None)
    assert cfg.q == DEFAULT_Q and cfg.depth == 6 and cfg.level == (3, 0)
    assert cfg.t_grid == [10, 20, 40, 80]
    assert cfg.windows[0] == (0, Fraction(1, 4))
    assert json.loads(cfg.to_json()) == {}


def test_q_modes():
    assert parse_q({"mode": "quadratic", "alpha": -1, "beta": 1, "gamma": 1, "d": 2}) == QuadraticQ(-1, 1, 1, 2)
    real = parse_q({"mode": "real", "value": "0.70710678118654752440084436", "bits": 80})
    assert isinstance(real, RealQ)
    for bad in [{"mode": "complex"}, {"mode": "quadratic", "alpha": "x", "beta": 1, "gamma": 2, "d": 2},
                {"mode": "quadratic", "alpha": 0, "beta": 1, "gamma": 2, "d": 4}, {"mode": "real"}, 5]:
        with pytest.raises(ConfigError):
            parse_q(bad)


@pytest.mark.parametrize("text,a,b", [
    ("1/2", Fraction(1, 2), 0), ("q", 0, 1), ("3/4q", 0, Fraction(3, 4)), ("2*q", 0, 2),
    ("1+2*q", 1, 2), ("1/3-1/5*q", Fraction(1, 3), Fraction(-1, 5)), ({"a": "1/2", "b": 3}, Fraction(1, 2), 3),
    (3, 3, 0),
])
def test_parse_qnum_forms(text, a, b):
    assert parse_qnum(text, DEFAULT_Q, "x") == DEFAULT_Q.num(a, b)


def test_parse_qnum_rejects_junk():
    for bad in ["1/0", "abc", {"a": 1, "c": 2}, 0.5, True]:
        with pytest.raises(ConfigError):
            parse_qnum(bad, DEFAULT_Q, "x")


@pytest.mark.parametrize("data", [
    [], {"bogus": 1}, {"depth": -1}, {"depth": "3"}, {"level": [1]}, {"delta": 1.5}, {"eps": 0},
    {"t_grid": []}, {"t_grid": ["20", "10"]}, {"windows": [["1/2", "1/4"]]}, {"seed": 2 ** 64},
    {"staircase": {"kind": "nope"}}, {"A": [{"level": [2, 0]}]}, {"times": ["-1"]},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_load_config_reports_json_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"depth": 3,\n  "k": }')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(str(p))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))


def test_format_cell():
    assert format_cell(None) == ""
    assert format_cell(True) == "true"
    assert format_cell(7) == "7"
    assert format_cell(Fraction(1, 4)) == "2.50000000000000000e-01"
    assert format_cell(float("nan")) == "nan"
    assert format_cell(DEFAULT_Q.num(0, 1)) == "7.07106781186547524e-01"
    assert exact_cell(DEFAULT_Q.num(Fraction(1, 2), -3)) == "1/2-3*q"
    assert exact_cell(Fraction(5, 7)) == "5/7"
    with pytest.raises(TypeError):
        format_cell(object())


def test_csv_text_is_deterministic(tmp_path):
    rows = [{"a": 1, "b": Fraction(1, 3)}, {"a": 2, "b": None}]
    text = csv_text(["a", "b"], rows)
    assert text == "a,b\n1,3.33333333333333333e-01\n2,\n"
    with pytest.raises(KeyError):
        csv_text(["a"], [{"a": 1, "zzz": 2}])
    path = write_csv(str(tmp_path / "sub" / "x.csv"), ["a", "b"], rows)
    assert open(path, newline="").read() == text


def test_svg_has_outline_and_segments():
    fl = SuspensionFlow(classical_staircase())
    ens = fl.flow_segments(fl.level_ensemble(3, 0), 30)
    svg = polygon_svg(fl, ens, title="t")
    assert svg.startswith("<?xml") or svg.startswith("<svg")
    assert svg.count('class="segment"') == len(ens)
    for cls in ("ident-sides", "ident-step", "ident-roof"):
        assert cls in svg
    empty = polygon_svg(fl)
    assert 'class="segment"' not in empty
    assert polygon_svg(fl, ens) == polygon_svg(fl, ens)
