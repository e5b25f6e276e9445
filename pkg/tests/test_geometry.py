"""Measurement geometry tests.

Radii oracles are closed forms evaluated independently of the hull code:
    icosahedron / dodecahedron  sqrt(3)(3+sqrt5)/(3 sqrt(10+2 sqrt5))
    truncated cube              1/sqrt(5-2 sqrt2)
    truncated octahedron        sqrt(3/5)
    truncated tetrahedron+ap    2 sqrt2/sqrt(11)
    rhombicuboctahedron         (1+sqrt2)/sqrt(5+2 sqrt2)
    octahedron / cube           1/sqrt(3)
"""

from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhsmodels.errors import LhsError
from lhsmodels.geometry import (
    BlochDirection,
    depolarized_projector,
    insphere_radius,
    measurement_set,
    projector,
    random_directions,
    set_from_json,
    set_to_json,
    solid_directions,
    strategies,
)

RADII = {
    "icosahedron": sqrt(3) * (3 + sqrt(5)) / (3 * sqrt(10 + 2 * sqrt(5))),
    "dodecahedron": sqrt(3) * (3 + sqrt(5)) / (3 * sqrt(10 + 2 * sqrt(5))),
    "truncated-cube": 1 / sqrt(5 - 2 * sqrt(2)),
    "truncated-octahedron": sqrt(3 / 5),
    "truncated-tetrahedron-antipodal": 2 * sqrt(2) / sqrt(11),
    "rhombicuboctahedron": (1 + sqrt(2)) / sqrt(5 + 2 * sqrt(2)),
    "octahedron": 1 / sqrt(3),
    "cube": 1 / sqrt(3),
}

COUNTS = {
    "icosahedron": (6, 12),
    "dodecahedron": (10, 20),
    "truncated-cube": (12, 24),
    "truncated-octahedron": (12, 24),
    "truncated-tetrahedron-antipodal": (12, 24),
    "rhombicuboctahedron": (12, 24),
    "octahedron": (3, 6),
    "cube": (4, 8),
}


class TestSolids:
    @pytest.mark.parametrize("name", sorted(RADII))
    def test_radius_matches_closed_form(self, name):
        s = solid_directions(name)
        assert s.insphere == pytest.approx(RADII[name], abs=1e-9)

    @pytest.mark.parametrize("name", sorted(COUNTS))
    def test_counts(self, name):
        s = solid_directions(name)
        m, verts = COUNTS[name]
        assert len(s) == m
        assert s.vertexCount == verts

    def test_unknown_solid(self):
        with pytest.raises(LhsError) as exc:
            solid_directions("tetrahedron")
        assert exc.value.code == "unknown-solid"

    def test_directions_are_unit_and_canonical(self):
        s = solid_directions("rhombicuboctahedron")
        mat = s.direction_matrix()
        np.testing.assert_allclose(np.linalg.norm(mat, axis=1), 1.0, atol=1e-12)
        for row in mat:
            assert tuple(row) >= tuple(-row)


class TestInsphere:
    def test_cube_vertices_raw(self):
        verts = [
            (sx / sqrt(3), sy / sqrt(3), sz / sqrt(3))
            for sx in (1, -1)
            for sy in (1, -1)
            for sz in (1, -1)
        ]
        s = measurement_set(verts, "cube-raw")
        assert insphere_radius(s) == pytest.approx(1 / sqrt(3), abs=1e-12)

    def test_coplanar_rejected(self):
        pts = [(1, 0, 0), (0, 1, 0), (-1 / sqrt(2), 1 / sqrt(2), 0)]
        with pytest.raises(LhsError) as exc:
            measurement_set(pts, "flat")
        assert exc.value.code == "degenerate-polytope"

    def test_monotone_under_added_direction(self):
        base = solid_directions("octahedron")
        added = measurement_set(
            list(base.direction_matrix()) + [np.array([1, 1, 1]) / sqrt(3)], "oct+1"
        )
        assert added.insphere >= base.insphere - 1e-10


class TestRandomDirections:
    def test_deterministic(self):
        a = random_directions(6, seed=1)
        b = random_directions(6, seed=1)
        np.testing.assert_array_equal(a.direction_matrix(), b.direction_matrix())

    def test_too_few(self):
        with pytest.raises(LhsError) as exc:
            random_directions(2, seed=0)
        assert exc.value.code == "too-few"

    def test_insphere_strictly_inside_ball(self):
        s = random_directions(6, seed=42)
        assert 0.0 < s.insphere < 1.0

    def test_sphere_mean_is_small(self):
        rng = np.random.default_rng(2)
        vecs = rng.normal(size=(100_000, 3))
        vecs /= np.linalg.norm(vecs, axis=1)[:, None]
        assert np.linalg.norm(vecs.mean(axis=0)) < 0.02


class TestProjectors:
    def test_plus_z(self):
        p = projector(BlochDirection((0.0, 0.0, 1.0)), 0)
        np.testing.assert_allclose(p.entries, np.diag([1.0, 0.0]), atol=1e-15)

    def test_plus_x(self):
        p = projector(BlochDirection((1.0, 0.0, 0.0)), 0)
        np.testing.assert_allclose(p.entries, np.full((2, 2), 0.5), atol=1e-15)

    def test_completeness_and_idempotence(self):
        rng = np.random.default_rng(8)
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        u = BlochDirection(tuple(v))
        p0, p1 = projector(u, 0), projector(u, 1)
        np.testing.assert_allclose(p0.entries + p1.entries, np.eye(2), atol=1e-14)
        np.testing.assert_allclose(p0.entries @ p0.entries, p0.entries, atol=1e-14)

    def test_depolarized_mixture(self):
        u = BlochDirection((0.0, 0.0, 1.0))
        eff = depolarized_projector(u, 0, 0.5)
        np.testing.assert_allclose(eff.entries, np.diag([0.75, 0.25]), atol=1e-15)

    def test_depolarized_endpoints_and_linearity(self):
        u = BlochDirection((0.0, 1.0, 0.0))
        np.testing.assert_allclose(
            depolarized_projector(u, 1, 1.0).entries, projector(u, 1).entries
        )
        np.testing.assert_allclose(
            depolarized_projector(u, 1, 0.0).entries, np.eye(2) / 2
        )
        r = 0.37
        expect = r * projector(u, 1).entries + (1 - r) * np.eye(2) / 2
        np.testing.assert_array_equal(depolarized_projector(u, 1, r).entries, expect)

    def test_bad_noise(self):
        with pytest.raises(LhsError) as exc:
            depolarized_projector(BlochDirection((0.0, 0.0, 1.0)), 0, 1.5)
        assert exc.value.code == "bad-noise"


class TestStrategies:
    def test_single_measurement(self):
        items = [s.bits for s in strategies(1)]
        assert items == ["0", "1"]

    def test_count_for_icosahedron(self):
        assert sum(1 for _ in strategies(6)) == 64

    def test_exactly_one_matches_any_assignment(self):
        target = (1, 0, 1, 1, 0)
        hits = [
            s
            for s in strategies(5)
            if all(s.outcome(x) == a for x, a in enumerate(target))
        ]
        assert len(hits) == 1

    def test_guardrail(self):
        with pytest.raises(LhsError) as exc:
            list(strategies(15))
        assert exc.value.code == "too-many-strategies"


class TestJson:
    def test_round_trip(self):
        s = solid_directions("icosahedron")
        back = set_from_json(set_to_json(s))
        assert back.name == s.name
        assert back.insphere == pytest.approx(s.insphere, abs=1e-12)
        np.testing.assert_allclose(back.direction_matrix(), s.direction_matrix())


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_insphere_rotation_invariance(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    base = solid_directions("icosahedron")
    rotated = measurement_set(base.direction_matrix() @ q.T, "rotated")
    assert rotated.insphere == pytest.approx(base.insphere, abs=1e-9)
