"""State-factory tests: family conventions, sampling measures, determinism."""

import numpy as np
import pytest

from lhsmodels.errors import LhsError
from lhsmodels.operators import (
    BipartiteCut,
    is_ppt,
    negativity,
    partial_trace,
)
from lhsmodels.states import (
    BELL_VECTORS,
    RngStream,
    amplitude_damped,
    bell_diagonal,
    haar_unitary,
    noisy_tripartite,
    sample_bures,
    sample_hs,
    werner,
)


class TestBellDiagonal:
    def test_white_noise(self):
        rho = bell_diagonal([0.25] * 4)
        np.testing.assert_allclose(rho.entries, np.eye(4) / 4, atol=1e-12)

    def test_pure_bell(self):
        rho = bell_diagonal([1, 0, 0, 0])
        v = BELL_VECTORS[0]
        np.testing.assert_allclose(rho.entries, np.outer(v, v.conj()), atol=1e-12)

    def test_eigenvectors_carry_the_weights(self):
        p = (0.4, 0.3, 0.2, 0.1)
        rho = bell_diagonal(p)
        for w, v in zip(p, BELL_VECTORS):
            np.testing.assert_allclose(rho.entries @ v, w * v, atol=1e-12)

    def test_rank3_paper_point(self):
        rho = bell_diagonal([0.5664, 0.2168, 0.2168, 0.0])
        assert negativity(rho) == pytest.approx(0.0664, abs=1e-10)

    def test_rejects_off_simplex(self):
        for bad in ([0.5, 0.5, 0.5, -0.5], [0.3, 0.3, 0.3, 0.3]):
            with pytest.raises(LhsError) as exc:
                bell_diagonal(bad)
            assert exc.value.code == "bad-probabilities"


class TestWerner:
    def test_pure_at_one(self):
        rho = werner(1.0)
        v = BELL_VECTORS[0]
        np.testing.assert_allclose(rho.entries, np.outer(v, v.conj()), atol=1e-12)

    def test_ppt_boundary_at_third(self):
        assert negativity(werner(1 / 3)) == pytest.approx(0.0, abs=1e-12)
        assert not is_ppt(werner(1 / 3 + 1e-6))

    def test_paper_table_point(self):
        assert negativity(werner(0.4285)) == pytest.approx(0.0714, abs=5e-5)

    def test_negativity_formula_on_grid(self):
        for w in np.linspace(0, 1, 21):
            assert negativity(werner(w)) == pytest.approx(
                max(0.0, (3 * w - 1) / 4), abs=1e-10
            )

    def test_range_check(self):
        with pytest.raises(LhsError) as exc:
            werner(1.2)
        assert exc.value.code == "bad-parameter"


class TestAmplitudeDamped:
    def test_endpoints(self):
        v = BELL_VECTORS[0]
        np.testing.assert_allclose(
            amplitude_damped(1.0).entries, np.outer(v, v.conj()), atol=1e-12
        )
        expect00 = np.zeros((4, 4))
        expect00[0, 0] = 1.0
        np.testing.assert_allclose(amplitude_damped(0.0).entries, expect00, atol=1e-12)

    def test_entangled_for_tiny_eta(self):
        assert negativity(amplitude_damped(0.01)) > 0.0

    def test_marginal_population_on_grid(self):
        for eta in np.linspace(0, 1, 11):
            rho = amplitude_damped(eta)
            for party in (0, 1):
                red = partial_trace(rho, BipartiteCut((party,))).entries
                assert abs(red[0, 1]) < 1e-12
                assert red[1, 1].real == pytest.approx(eta / 2, abs=1e-12)

    def test_range_check(self):
        with pytest.raises(LhsError):
            amplitude_damped(-0.1)


class TestNoisyTripartite:
    def test_white_noise(self):
        np.testing.assert_allclose(
            noisy_tripartite("ghz", 0.0).entries, np.eye(8) / 8, atol=1e-12
        )

    def test_pure_ghz(self):
        rho = noisy_tripartite("ghz", 1.0)
        psi = np.zeros(8)
        psi[0] = psi[7] = 1 / np.sqrt(2)
        np.testing.assert_allclose(rho.entries, np.outer(psi, psi), atol=1e-12)

    def test_ghz_quarter_not_ppt(self):
        assert not is_ppt(noisy_tripartite("ghz", 0.25), BipartiteCut((0,)))

    def test_w_norm(self):
        rho = noisy_tripartite("w", 1.0)
        assert rho.op.trace() == pytest.approx(1.0)
        assert rho.dims == (2, 2, 2)

    def test_unknown_kind(self):
        with pytest.raises(LhsError) as exc:
            noisy_tripartite("cluster", 0.5)
        assert exc.value.code == "bad-parameter"


class TestSampling:
    def test_hs_determinism(self):
        a = sample_hs(RngStream(123, 5))
        b = sample_hs(RngStream(123, 5))
        np.testing.assert_array_equal(a.entries, b.entries)
        c = sample_hs(RngStream(123, 6))
        assert np.abs(a.entries - c.entries).max() > 1e-3

    def test_bures_determinism(self):
        a = sample_bures(RngStream(9, 1))
        b = sample_bures(RngStream(9, 1))
        np.testing.assert_array_equal(a.entries, b.entries)

    def test_invariants_over_many_seeds(self):
        for i in range(500):
            rho = sample_hs(RngStream(1, i))
            assert rho.op.trace() == pytest.approx(1.0, abs=1e-12)
            rho = sample_bures(RngStream(2, i))
            assert rho.op.trace() == pytest.approx(1.0, abs=1e-12)

    def test_hs_purity_mean(self):
        total = 0.0
        n = 4000
        for i in range(n):
            rho = sample_hs(RngStream(11, i)).entries
            total += np.trace(rho @ rho).real
        assert total / n == pytest.approx(8 / 17, abs=0.01)

    def test_hs_separable_fraction(self):
        n = 8000
        sep = sum(is_ppt(sample_hs(RngStream(7, i))) for i in range(n))
        assert sep / n == pytest.approx(0.242, abs=0.02)

    def test_bures_separable_fraction(self):
        n = 8000
        sep = sum(is_ppt(sample_bures(RngStream(8, i))) for i in range(n))
        assert sep / n == pytest.approx(0.073, abs=0.012)


class TestHaarUnitary:
    def test_unitarity(self):
        u = haar_unitary(4, RngStream(0, 0))
        np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)

    def test_d1_phase(self):
        u = haar_unitary(1, RngStream(3, 0))
        assert abs(abs(u[0, 0]) - 1.0) < 1e-12

    def test_column_uniformity(self):
        n = 20000
        total = sum(abs(haar_unitary(4, RngStream(10, i))[0, 0]) ** 2 for i in range(n))
        assert total / n == pytest.approx(0.25, abs=0.015)

    def test_left_invariance_statistic(self):
        # |(VU)_{00}|² should have the same mean as |U_{00}|² for fixed V
        rng = np.random.default_rng(4)
        v = haar_unitary(4, rng)
        n = 5000
        plain = sum(abs(haar_unitary(4, RngStream(12, i))[0, 0]) ** 2 for i in range(n)) / n
        rotated = sum(
            abs((v @ haar_unitary(4, RngStream(12, i)))[0, 0]) ** 2 for i in range(n)
        ) / n
        assert plain == pytest.approx(rotated, abs=0.02)
