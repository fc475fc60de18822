import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.internal.errors import ContractViolationError, DegenerateClusterError
from app.services.geometry.cobweb import OUTSIDE, build_cobweb, cut_ring, cut_wedge, locate
from app.services.geometry.hull import convex_hull
from app.services.geometry.polygon import ConvexPolygon, clip_halfplane, shoelace_area


def _brute_hull_vertices(pts):
    """Points that start an edge with every other point strictly to its left"""
    found = set()
    for i in range(pts.shape[0]):
        rel = pts - pts[i]
        for j in range(pts.shape[0]):
            if i == j:
                continue
            cross = rel[j, 0] * rel[:, 1] - rel[j, 1] * rel[:, 0]
            cross[[i, j]] = 1.0
            if np.all(cross > 0.0):
                found.add(tuple(pts[i]))
                break
    return found


def _random_hull(seed, n=40):
    rng = np.random.default_rng(seed)
    return convex_hull(rng.uniform(-5, 5, size=(n, 2)) * rng.uniform(0.2, 3.0, size=2))


@pytest.mark.parametrize("seed", range(100))
def test_convex_hull_matches_brute_force(seed):
    pts = np.random.default_rng(seed).normal(size=(60, 2))
    hull = convex_hull(pts)
    assert {tuple(v) for v in hull.vertices} == _brute_hull_vertices(pts)
    assert hull.area > 0
    assert tuple(hull.vertices[0]) == tuple(pts[np.lexsort((pts[:, 1], pts[:, 0]))[0]])


def test_convex_hull_drops_collinear_and_duplicate_points():
    pts = np.array([[0, 0], [1, 0], [2, 0], [2, 2], [0, 2], [1, 1], [2, 2], [0, 1]], dtype=float)
    hull = convex_hull(pts)
    assert {tuple(v) for v in hull.vertices} == {(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)}


@pytest.mark.parametrize(
    "pts",
    [[[0, 0], [1, 1]], [[0, 0], [1, 1], [2, 2], [3, 3]], [[1, 1], [1, 1], [1, 1]]],
)
def test_convex_hull_degenerate_inputs(pts):
    with pytest.raises(DegenerateClusterError):
        convex_hull(np.array(pts, dtype=float))


def test_polygon_rejects_clockwise_and_reflex_vertices():
    with pytest.raises(ContractViolationError):
        ConvexPolygon(np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float))
    with pytest.raises(ContractViolationError):
        ConvexPolygon(np.array([[0, 0], [2, 0], [1, 0.5], [2, 2], [0, 2]], dtype=float))


def test_polygon_from_vertices_reorients(unit_square):
    flipped = ConvexPolygon.from_vertices(unit_square.vertices[::-1])
    assert flipped.area == pytest.approx(1.0)
    np.testing.assert_allclose(flipped.centroid, [0.5, 0.5])


def test_contains(unit_square):
    assert unit_square.contains([0.5, 0.5])
    assert unit_square.contains([1.0, 0.5])
    assert not unit_square.contains([1.1, 0.5])


def test_clip_halfplane_square(unit_square):
    half = clip_halfplane(unit_square, np.array([0.5, 0.0]), np.array([1.0, 0.0]))
    assert half.area == pytest.approx(0.5)
    assert clip_halfplane(unit_square, np.array([-1.0, 0.0]), np.array([1.0, 0.0])) is None


def test_section_ids_are_wedge_major(unit_square):
    part = build_cobweb(unit_square, m=3, t=7)
    assert part.n_sections == 12
    assert part.last_hit.shape == (4, 3)
    assert np.all(part.last_hit == 7)
    assert part.section_id(2, 1) == 6
    assert part.section_of(8) == (2, 3)
    assert sum(part.section_area(s) for s in range(12)) == pytest.approx(1.0)


def test_centroid_lands_in_an_innermost_section(unit_square):
    part = build_cobweb(unit_square, m=3)
    sid = locate(part, part.centroid)
    assert part.section_of(sid)[1] == 1


def test_points_outside_are_not_located(unit_square):
    part = build_cobweb(unit_square, m=2)
    assert locate(part, [2.0, 2.0]) is None
    assert locate(part, [0.5, -0.01]) is None
    assert locate(part, [0.5, 0.01]) == part.section_id(0, 2)


def _margin(vertices, p):
    e = np.roll(vertices, -1, axis=0) - vertices
    rel = p - vertices
    return np.min((e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0]) / np.linalg.norm(e, axis=1))


@pytest.mark.parametrize("seed", range(10))
def test_locate_matches_point_in_section_brute_force(seed):
    hull = _random_hull(seed)
    m = 1 + seed % 4
    part = build_cobweb(hull, m=m)
    rng = np.random.default_rng(1000 + seed)
    lo, hi = hull.vertices.min(axis=0) - 1, hull.vertices.max(axis=0) + 1
    queries = rng.uniform(lo, hi, size=(1000, 2))
    located = part.locator.locate_many(queries)
    sections = [part.section_vertices(s) for s in range(part.n_sections)]
    compared = 0
    for q, got in zip(queries, located):
        margins = np.array([_margin(v, q) for v in sections])
        if np.any(np.abs(margins) < 1e-9):
            continue
        inside = np.flatnonzero(margins > 0)
        expected = int(inside[0]) if inside.size else OUTSIDE
        assert got == expected
        compared += 1
    assert compared > 900


def test_cut_wedge_truncates_along_inner_boundary(unit_square):
    part = build_cobweb(unit_square, m=2)
    cut = cut_wedge(unit_square, part.wedges[0])
    assert cut.area == pytest.approx(0.75)
    assert cut.vertices[:, 1].min() == pytest.approx(0.25)


def test_cutting_every_wedge_with_one_ring_retires_polygon(unit_square):
    part = build_cobweb(unit_square, m=1)
    polygon = unit_square
    for wedge in part.wedges:
        polygon = cut_wedge(polygon, wedge)
        if polygon is None:
            break
    assert polygon is None


def test_cut_ring(unit_square):
    shrunk = cut_ring(unit_square, 3, 3)
    assert shrunk.area == pytest.approx(4.0 / 9.0)
    np.testing.assert_allclose(shrunk.centroid, [0.5, 0.5])
    assert cut_ring(unit_square, 1, 1) is None
    with pytest.raises(ContractViolationError):
        cut_ring(unit_square, 2, 3)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.lists(st.integers(0, 1000), min_size=1, max_size=12))
def test_cuts_keep_polygons_convex_and_never_grow(seed, m, picks):
    hull = _random_hull(seed, n=25)
    part = build_cobweb(hull, m=m)
    polygon, rings = hull, m
    for pick in picks:
        before = polygon.area
        if pick % 5 == 0 and rings == m:
            polygon = cut_ring(polygon, rings, rings)
            rings -= 1
        else:
            polygon = cut_wedge(polygon, part.wedge(pick % part.n_wedges, ring=max(rings, 1)))
        if polygon is None:
            break
        assert shoelace_area(polygon.vertices) > 0
        assert polygon.area <= before + 1e-12
