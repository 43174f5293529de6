import numpy as np
import pytest

from bakernewton.dynamics import Classification, ClassifyLimits, Kind, classify, find_zero
from bakernewton.geometry import spiral_point
from bakernewton.render import (GridSpec, Image, default_palette, pnm_bytes, read_pnm,
                                render_grid, tile_spans, write_csv, write_pnm)
from bakernewton.verify import escaping_in_u


def small_grid(chain, bounds, n=6):
    center = complex(spiral_point(2.5 * bounds.r1, chain.params.c))
    return GridSpec(center, 40.0, 40.0, n, n, ClassifyLimits.defaults(bounds))


def test_pixel_layout():
    g = GridSpec(0j, 2.0, 2.0, 3, 3, ClassifyLimits())
    assert g.pixel(1, 1) == 0j
    assert g.pixel(0, 0).imag > 0 > g.pixel(0, 0).real
    assert g.pixels().shape == (3, 3) and g.pixels()[0, 2] == g.pixel(2, 0)


def test_tile_spans_cover():
    for n, t in ((10, 3), (36, 64), (7, 1)):
        spans = tile_spans(n, t)
        assert spans[0][0] == 0 and spans[-1][1] == n
        assert all(a[1] == b[0] for a, b in zip(spans, spans[1:]))


def test_converged_pixel(chain, bounds):
    xi = find_zero(chain, complex(spiral_point(20.0, chain.params.c)) * 1.25)
    g = GridSpec(xi, 1e-9, 1e-9, 1, 1, ClassifyLimits.defaults(bounds))
    img = render_grid(chain, bounds, g)
    assert img.kinds[0, 0].kind is Kind.CONVERGED
    want = default_palette(classify(chain, bounds, xi, g.limits))
    assert tuple(img.rgb[0, 0]) == want


def test_tiles_do_not_change_image(chain, bounds):
    g = small_grid(chain, bounds)
    a = render_grid(chain, bounds, g, tiles=1)
    b = render_grid(chain, bounds, g, tiles=64)
    assert pnm_bytes(a) == pnm_bytes(b)


def test_u_pixels_escape(chain, bounds):
    g = small_grid(chain, bounds, 8)
    img = render_grid(chain, bounds, g)
    inside, bad = escaping_in_u(chain, bounds, g, img)
    assert inside > 0 and bad == 0


def test_pnm_white(tmp_path):
    img = Image(1, 1, np.full((1, 1, 3), 255, np.uint8), np.array([[Classification(Kind.UNRESOLVED, 0)]], dtype=object))
    write_pnm(img, tmp_path / "w.pnm")
    data = (tmp_path / "w.pnm").read_bytes()
    assert data == b"P6\n1 1\n255\n\xff\xff\xff" and len(data) == 11 + 3
    assert read_pnm(tmp_path / "w.pnm").tolist() == [[[255, 255, 255]]]


def test_csv_full_precision(tmp_path):
    vals = [np.pi, 1 / 3, 2.5e-300, -1.7976931348623157e308]
    write_csv([(i, v) for i, v in enumerate(vals)], tmp_path / "v.csv", ("i", "v"))
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "i,v"
    assert [float(l.split(",")[1]) for l in lines[1:]] == vals
