# tests/test_persistence.py
import numpy as np
import pytest

from app.analysis.embedding import PointCloud
from app.analysis.landscape import l1_closed_form, landscape_from_diagram, lp_norm_grid
from app.analysis.persistence import (
    PersistenceDiagram,
    build_rips,
    diagram_for_cloud,
    pairwise_distances,
    reduce_h1,
    reduce_standard,
)
from app.core.errors import DomainError, InsufficientDataError

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
EQUILATERAL = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]])


def circle(n: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(theta), np.sin(theta)])


def test_pairwise_distances():
    D = pairwise_distances([[0.0, 0.0], [3.0, 4.0]])
    assert D[0, 1] == 5.0
    np.testing.assert_array_equal(pairwise_distances(np.zeros((4, 3))), np.zeros((4, 4)))
    D = pairwise_distances(np.random.default_rng(1).standard_normal((10, 4)))
    assert np.array_equal(D, D.T)
    with pytest.raises(InsufficientDataError):
        pairwise_distances([[1.0, 2.0]])


def test_pairwise_distances_accepts_point_cloud():
    cloud = PointCloud(points=SQUARE, anchor_date=np.datetime64("2021-01-01"))
    assert pairwise_distances(cloud)[0, 2] == pytest.approx(np.sqrt(2.0))


def test_build_rips_counts():
    D = np.ones((3, 3)) - np.eye(3)
    cx = build_rips(D, 2.0)
    assert cx.n_vertices == 3
    np.testing.assert_array_equal(cx.edge_values, [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(cx.triangle_values, [1.0])
    cx = build_rips(D, 0.5)
    assert len(cx.edges) == 0
    assert len(cx.triangles) == 0
    with pytest.raises(DomainError):
        build_rips(D, 0.0)


def test_build_rips_filtration_order(rng):
    D = pairwise_distances(rng.standard_normal((12, 3)))
    cx = build_rips(D, float(D.max()))
    for (a, b, c), value in zip(cx.triangles, cx.triangle_values):
        assert value == max(D[a, b], D[a, c], D[b, c])
    simplices = cx.simplices()
    values = [v for _, v in simplices]
    assert values == sorted(values)
    position = {s: k for k, (s, _) in enumerate(simplices)}
    for s, _ in simplices:
        if len(s) > 1:
            for face in [tuple(x for x in s if x != v) for v in s]:
                assert position[face] < position[s]


def test_equilateral_triangle_has_no_loop():
    assert len(diagram_for_cloud(EQUILATERAL)) == 0


def test_unit_square_single_pair():
    diag = diagram_for_cloud(SQUARE)
    assert len(diag) == 1
    assert diag.pairs[0, 0] == pytest.approx(1.0)
    assert diag.pairs[0, 1] == pytest.approx(np.sqrt(2.0))
    assert diag.n_essential == 0


def test_collinear_points_have_no_loop():
    points = np.column_stack([np.arange(8.0), 2.0 * np.arange(8.0)])
    assert len(diagram_for_cloud(points)) == 0


def test_circle_has_one_dominant_loop():
    diag = diagram_for_cloud(circle(50))
    persistence = diag.persistence
    assert (persistence > 0.5).sum() == 1
    assert np.all(persistence[persistence <= 0.5] < 0.1)
    grid = lp_norm_grid(landscape_from_diagram(diag), 1.0)
    assert grid == pytest.approx(l1_closed_form(diag), rel=0.05)


def test_degenerate_clouds():
    assert len(diagram_for_cloud(np.zeros((10, 2)))) == 0
    with pytest.raises(InsufficientDataError):
        diagram_for_cloud(np.zeros((2, 2)))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_cohomology_matches_standard_reduction(seed):
    points = np.random.default_rng(seed).standard_normal((20, 4))
    fast = diagram_for_cloud(points, method="cohomology")
    slow = diagram_for_cloud(points, method="standard")
    assert fast.same_as(slow)


def random_clouds(seed: int, count: int, max_points: int):
    """Gaussian clouds in R^2..R^4; every third one snapped to a small integer grid for ties."""
    gen = np.random.default_rng(seed)
    for k in range(count):
        n = int(gen.integers(4, max_points + 1))
        dim = int(gen.integers(2, 5))
        points = gen.standard_normal((n, dim))
        if k % 3 == 0:
            points = np.round(2.0 * points)
        yield points


def test_cohomology_matches_standard_reduction_on_200_clouds():
    for points in random_clouds(7, 200, 20):
        fast = diagram_for_cloud(points)
        slow = diagram_for_cloud(points, method="standard")
        assert fast.same_as(slow), points


@pytest.mark.slow
def test_cohomology_matches_standard_reduction_up_to_50_points():
    for points in random_clouds(11, 200, 50):
        assert diagram_for_cloud(points).same_as(diagram_for_cloud(points, method="standard")), points


@pytest.mark.slow
def test_cohomology_matches_standard_reduction_n50():
    points = np.random.default_rng(20251220).standard_normal((50, 4))
    assert diagram_for_cloud(points).same_as(diagram_for_cloud(points, method="standard"))


def test_standard_degree0_has_one_infinite_class(rng):
    D = pairwise_distances(rng.standard_normal((8, 2)))
    diag = reduce_standard(build_rips(D, float(D.max())), degree=0)
    assert np.isinf(diag.deaths).sum() == 1
    assert len(diag) == 8
    with pytest.raises(DomainError):
        reduce_standard(build_rips(D, 1.0), degree=2)


def test_truncated_scale_marks_essential_classes():
    cx = build_rips(pairwise_distances(SQUARE), 1.2)
    diag = reduce_h1(cx)
    assert diag.n_essential == 1
    np.testing.assert_allclose(diag.pairs, [[1.0, 1.2]])


def test_invariances(rng):
    points = rng.standard_normal((15, 3))
    base = diagram_for_cloud(points)
    scaled = diagram_for_cloud(2.0 * points)
    np.testing.assert_allclose(scaled.pairs, 2.0 * base.pairs, rtol=1e-12)
    shuffled = diagram_for_cloud(points[rng.permutation(len(points))])
    np.testing.assert_allclose(shuffled.pairs, base.pairs, rtol=1e-12)
    moved = diagram_for_cloud(points + np.array([5.0, -3.0, 1.0]))
    np.testing.assert_allclose(moved.pairs, base.pairs, rtol=1e-9)


def test_duplicate_point_leaves_diagram_unchanged(rng):
    points = rng.standard_normal((14, 2))
    doubled = np.vstack([points, points[3:4]])
    assert diagram_for_cloud(doubled).same_as(diagram_for_cloud(points))


def test_diagram_rejects_bad_pairs_and_renders_text():
    with pytest.raises(DomainError):
        PersistenceDiagram(degree=1, pairs=[[2.0, 1.0]])
    diag = PersistenceDiagram(degree=1, pairs=[[1.0, 3.0], [0.5, 2.0]])
    assert diag.to_text() == "0.5\t2.0\n1.0\t3.0\n"
    assert PersistenceDiagram.empty().same_as(PersistenceDiagram(degree=1, pairs=[]))
