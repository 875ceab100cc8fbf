"""Hamming cubes, k-subset spaces, probes, and type-2 certificates."""

import math

import numpy as np
import pytest

from embedlab.finite_geometry import (
    GkSpace,
    HammingCube,
    MAX_CUBE_MATRIX_DIM,
    MAX_CUBE_PAIR_DIM,
    cube_distance,
    cube_report,
    enflo_lower_bound,
    enflo_type2_certificate,
    gk_distance,
    gk_probe,
    probe_audit,
)
from embedlab.metric_core import ExponentRegime, lp_distance


class TestHammingCube:
    def test_distance_is_popcount(self):
        cube = HammingCube(3, 1.0)
        assert cube_distance(0b000, 0b111, cube) == 3.0
        assert cube_distance(0b101, 0b101, cube) == 0.0
        assert cube_distance(0b101, 0b100, cube) == 1.0

    def test_root_applied_in_norm_regime(self):
        cube = HammingCube(4, 2.0)
        assert cube.metric(0b0000, 0b1111) == pytest.approx(2.0)
        assert cube.diameter() == pytest.approx(2.0)
        assert HammingCube(9, 1.0).diameter() == 9.0
        assert HammingCube(4, ExponentRegime.from_p(0.5)).diameter() == 4.0

    def test_pairwise_matrix_matches_metric(self):
        cube = HammingCube(4, 1.5)
        mat = cube.pairwise_distances()
        for u in range(cube.n_vertices):
            for v in range(cube.n_vertices):
                assert mat[u, v] == pytest.approx(cube.metric(u, v), abs=1e-12)

    def test_bit_matrix_rows_encode_vertices(self):
        b = HammingCube(3, 1.0).bit_matrix()
        assert b.shape == (8, 3)
        assert np.array_equal(b[5], [1.0, 0.0, 1.0])  # 0b101, low bit first

    def test_caps(self):
        with pytest.raises(ValueError):
            HammingCube(MAX_CUBE_PAIR_DIM + 1, 1.0)
        big = HammingCube(MAX_CUBE_MATRIX_DIM + 1, 1.0)
        with pytest.raises(ValueError):
            big.bit_matrix()
        with pytest.raises(ValueError):
            cube_distance(0, 1 << 5, HammingCube(5, 1.0))
        with pytest.raises(ValueError):
            HammingCube(0, 1.0)


class TestGkSpace:
    def test_element_count_and_matrix(self):
        space = GkSpace(2, 5)
        assert space.n_elements == math.comb(5, 2)
        els = space.elements()
        assert els[0] == (1, 2)
        mat = space.element_matrix()
        assert mat.shape == (10, 5)
        assert np.all(mat.sum(axis=1) == 2)

    def test_distance(self):
        assert gk_distance((1, 2, 3), (1, 2, 3)) == 0.0
        assert gk_distance((1, 2, 3), (4, 5, 6)) == 3.0
        assert gk_distance((1, 2), (2, 3)) == 1.0
        with pytest.raises(ValueError):
            gk_distance((1, 2), (1, 2, 3))
        with pytest.raises(ValueError):
            gk_distance((1, 1), (2, 3))

    def test_construction_caps(self):
        with pytest.raises(ValueError):
            GkSpace(0, 5)
        with pytest.raises(ValueError):
            GkSpace(10, 40)  # comb(40, 10) blows the enumeration cap


class TestProbe:
    def test_image_distance_counts_symmetric_difference(self):
        regime = ExponentRegime.from_p(2.0)
        a, b = (1, 2, 4), (2, 4, 6)
        va = gk_probe(a, 7)
        vb = gk_probe(b, 7)
        sym = 2 * gk_distance(a, b)
        assert lp_distance(va.coords, vb.coords, regime) == pytest.approx(sym ** 0.5)
        reg1 = ExponentRegime.from_p(1.0)
        assert lp_distance(va.coords, vb.coords, reg1) == pytest.approx(sym)

    def test_invalid_subsets(self):
        with pytest.raises(ValueError):
            gk_probe((1, 1, 2), 5)
        with pytest.raises(ValueError):
            gk_probe((0, 2), 5)
        with pytest.raises(ValueError):
            gk_probe((2, 6), 5)

    def test_audit_exact_values_p1(self):
        rep = probe_audit(3, 8, 1.0)
        assert rep.n_pairs == math.comb(math.comb(8, 3), 2)
        assert rep.max_ratio == 2.0
        assert rep.min_nonzero_image == 2.0
        assert rep.violations == 0

    def test_audit_exact_values_p2(self):
        rep = probe_audit(2, 7, 2.0)
        assert rep.max_ratio == pytest.approx(math.sqrt(2.0), rel=1e-15)
        assert rep.min_nonzero_image == pytest.approx(math.sqrt(2.0), rel=1e-15)
        assert rep.violations == 0

    def test_audit_flags_a_too_small_factor(self):
        rep = probe_audit(2, 6, 1.0, lipschitz_factor=1.5)
        assert rep.lipschitz_violations > 0


class TestEnfloBound:
    def test_exponent_form(self):
        assert enflo_lower_bound(9, 2.0, 2.0) == pytest.approx(1.0)
        assert enflo_lower_bound(9, 1.0, 2.0) == pytest.approx(3.0)
        # power-sum regime: diameter m, exponent 1 - 1/q
        assert enflo_lower_bound(4, ExponentRegime.from_p(0.5), 2.0) == pytest.approx(2.0)
        with pytest.raises(ValueError):
            enflo_lower_bound(4, 1.0, 0.5)


class TestTypeTwoCertificate:
    def test_identity_coordinates_are_extremal(self):
        m = 5
        cert = enflo_type2_certificate(HammingCube(m, 1.0).bit_matrix(), m)
        assert cert.diagonal_sum == m * 2 ** (m - 1)
        assert cert.edge_sum == m * 2 ** (m - 1)
        assert cert.ratio == 1.0
        assert not cert.degenerate
        assert cert.distortion_bound(1.0) == pytest.approx(math.sqrt(m))

    def test_callable_and_array_forms_agree(self):
        m = 4
        b = HammingCube(m, 1.0).bit_matrix()
        by_call = enflo_type2_certificate(
            lambda u: [(u >> j) & 1 for j in range(m)], m)
        by_array = enflo_type2_certificate(b, m)
        assert by_call.ratio == by_array.ratio

    def test_euclidean_maps_never_exceed_one(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            cloud = rng.normal(size=(16, 3))
            cert = enflo_type2_certificate(cloud, 4)
            assert cert.ratio <= 1.0 + 1e-12

    def test_constant_map_degenerate(self):
        cert = enflo_type2_certificate(np.ones((8, 2)), 3)
        assert cert.degenerate
        assert cert.ratio == 0.0

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            enflo_type2_certificate(np.zeros((7, 2)), 3)
        with pytest.raises(ValueError):
            enflo_type2_certificate(np.full((8, 2), np.nan), 3)


class TestCubeReport:
    def test_identity_summary(self):
        rep = cube_report(3, 1.0)
        assert rep["m"] == 3
        assert rep["target_type"] == 2.0
        assert rep["bound"] == pytest.approx(math.sqrt(3.0))
        assert rep["bound_exponent"] == pytest.approx(0.5)
        assert rep["measured_distortion"] == pytest.approx(math.sqrt(3.0))
        assert rep["certificate_ratio"] == 1.0
