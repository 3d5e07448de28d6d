import numpy as np
import pytest

from qroc.svgplot import Series, svg_plot, _ticks


def _count(text, token):
    return text.count(token)


class TestSvgPlot:
    def test_deterministic_bytes(self, tmp_path):
        s = [Series((0.0, 0.5, 1.0), (0.2, 0.9, 0.4), "a", "#ff0000"),
             Series((0.0, 1.0), (0.0, 1.0), "b", "#0000ff", kind="step")]
        t1 = svg_plot(None, s, title="t", xlabel="x", ylabel="y")
        t2 = svg_plot(None, s, title="t", xlabel="x", ylabel="y")
        assert t1 == t2
        p = tmp_path / "p.svg"
        svg_plot(str(p), s, title="t", xlabel="x", ylabel="y")
        assert p.read_text() == t1

    def test_structure(self):
        s = [Series((0.0, 1.0), (0.0, 1.0), "curve")]
        text = svg_plot(None, s, title="hello", xlabel="xx", ylabel="yy")
        assert text.startswith('<?xml version="1.0"')
        assert text.rstrip().endswith("</svg>")
        assert "hello" in text
        assert "xx" in text and "yy" in text
        assert _count(text, "<polyline") == 1  # legend samples use <line>
        assert "curve" in text

    def test_no_timestamps_or_metadata(self):
        text = svg_plot(None, [Series((0.0, 1.0), (0.5, 0.5))])
        for token in ("date", "Date", "generator", "timestamp"):
            assert token not in text

    def test_step_inserts_risers(self):
        s = [Series((0.0, 0.5, 1.0), (0.0, 0.5, 1.0), kind="step")]
        text = svg_plot(None, s, legend=False)
        line = [l for l in text.splitlines() if "<polyline" in l][0]
        coords = line.split('points="')[1].split('"')[0].split()
        # 3 points become 2*3 - 1 vertices
        assert len(coords) == 5

    def test_band_polygon_behind_curves(self):
        x = (0.1, 0.5, 0.9)
        text = svg_plot(None, [Series(x, (0.5, 0.6, 0.7))],
                        band=(x, (0.4, 0.5, 0.6), (0.6, 0.7, 0.8)))
        assert "<polygon" in text
        assert text.index("<polygon") < text.index("<polyline")

    def test_label_escaping(self):
        text = svg_plot(None, [Series((0.0, 1.0), (0.0, 1.0), "a<b&c")])
        assert "a&lt;b&amp;c" in text
        assert "a<b&c" not in text

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            svg_plot(None, [])
        with pytest.raises(ValueError):
            svg_plot(None, [Series((), ())])

    def test_mismatched_coords_rejected(self):
        with pytest.raises(ValueError):
            svg_plot(None, [Series((0.0, 1.0), (0.0,))])


class TestTicks:
    def test_unit_interval(self):
        t = _ticks(0.0, 1.0)
        assert t[0] == 0.0
        assert t[-1] == 1.0
        assert all(b > a for a, b in zip(t, t[1:]))

    def test_small_span(self):
        t = _ticks(0.42, 0.43)
        assert len(t) >= 2
        assert t[0] >= 0.42 - 1e-12
        assert t[-1] <= 0.43 + 1e-12

    def test_negative_range(self):
        t = _ticks(-3.0, 7.0)
        assert any(v == 0.0 for v in t)
        assert "-0" not in [f"{v:g}" for v in t]
