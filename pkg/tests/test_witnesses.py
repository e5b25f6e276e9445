import math

import numpy as np
import pytest

from lhsmodels.errors import LhsError
from lhsmodels.operators import (
    BipartiteCut,
    DensityMatrix,
    HermitianOperator,
    negativity,
    partial_transpose,
)
from lhsmodels.states import RngStream, bell_diagonal, noisy_tripartite, sample_hs, werner
from lhsmodels.witnesses import (
    QUANTIFIER_KINDS,
    gme_witness,
    optimal_witness,
    quantify,
    witness_value,
)

PHI_PLUS = bell_diagonal((1.0, 0.0, 0.0, 0.0))
GAMMA_MIXED = HermitianOperator((2,), np.eye(2, dtype=complex) / 2)

ROBUSTNESS_KINDS = QUANTIFIER_KINDS[:5]


def _kw(kind):
    # default gamma = |0><0| diverges on pure states; use I/2 for 1SFR
    if kind == "one-sided-fixed-robustness":
        return {"gamma": GAMMA_MIXED}
    return {}


def test_random_robustness_of_bell_state():
    res = quantify(PHI_PLUS, "random-robustness")
    assert math.isclose(res.mu, 2.0, abs_tol=1e-5)
    assert math.isclose(res.E, 2.0 / 3.0, abs_tol=1e-5)
    assert res.dualFeasible


def test_bell_state_quantifier_table():
    expected = {
        "one-sided-random-robustness": 2.0,
        "one-sided-fixed-robustness": 2.0,
        "one-sided-generalized-robustness": 2.0,
        "random-robustness": 2.0,
        "generalized-robustness": 1.0,
        "best-separable-approximation": 1.0,
        "negativity": 0.5,
    }
    for kind, mu in expected.items():
        res = quantify(PHI_PLUS, kind, **_kw(kind))
        assert math.isclose(res.mu, mu, abs_tol=1e-5), kind
        if kind in ROBUSTNESS_KINDS:
            assert abs(res.E - res.mu / (1 + res.mu)) < 1e-9
        else:
            assert abs(res.E - res.mu) < 1e-9
        assert res.relaxation == ("ppt",)
        assert res.dualFeasible, kind


def test_negativity_kind_matches_spectral():
    rng = RngStream(77, 0).generator
    for _ in range(25):
        rho = sample_hs(rng)
        mu = quantify(rho, "negativity").mu
        assert abs(mu - negativity(rho, BipartiteCut((0,)))) < 1e-6


def test_werner_negativity_formula():
    for w in (0.4, 0.6, 0.8, 1.0):
        mu = quantify(werner(w), "negativity").mu
        assert math.isclose(mu, (3 * w - 1) / 4, abs_tol=1e-6)


def test_ppt_state_gives_zero_for_every_kind():
    rho = DensityMatrix(HermitianOperator(
        (2, 2), np.diag([0.5, 0.1, 0.15, 0.25]).astype(complex)))
    for kind in QUANTIFIER_KINDS:
        res = quantify(rho, kind, **_kw(kind))
        assert res.mu <= 1e-7, kind
        assert res.E <= 1e-7, kind
        assert res.dualFeasible, kind


def test_duality_gap_small_on_random_entangled_states():
    rng = RngStream(78, 0).generator
    states = []
    while len(states) < 8:
        rho = sample_hs(rng)
        if negativity(rho, BipartiteCut((0,))) > 0.02:
            states.append(rho)
    for rho in states:
        for kind in QUANTIFIER_KINDS:
            primal = quantify(rho, kind, **_kw(kind))
            dual = optimal_witness(rho, kind, **_kw(kind))
            gap = abs(primal.mu - (-witness_value(dual.W, rho)))
            assert gap <= 1e-6, (kind, gap)
            assert primal.mu > 0
            assert dual.dualFeasible, kind


def test_optimal_witness_negative_on_its_state():
    dual = optimal_witness(PHI_PLUS, "negativity")
    assert math.isclose(witness_value(dual.W, PHI_PLUS), -0.5, abs_tol=1e-6)
    assert math.isclose(dual.mu, 0.5, abs_tol=1e-6)


def test_negativity_witness_dual_constraints():
    dual = optimal_witness(PHI_PLUS, "negativity")
    wg = partial_transpose(dual.W, BipartiteCut((0,))).entries
    eigs = np.linalg.eigvalsh(wg)
    assert eigs[0] >= -1e-7
    assert eigs[-1] <= 1 + 1e-7


def test_witnesses_nonnegative_on_ppt_states():
    w_rr = optimal_witness(PHI_PLUS, "one-sided-random-robustness").W
    w_neg = optimal_witness(PHI_PLUS, "negativity").W
    rng = RngStream(79, 0).generator
    checked = 0
    while checked < 200:
        rho = sample_hs(rng)
        pt = partial_transpose(rho, BipartiteCut((0,)))
        if np.linalg.eigvalsh(pt.entries)[0] < 0:
            continue
        checked += 1
        assert witness_value(w_rr, rho) >= -1e-8
        assert witness_value(w_neg, rho) >= -1e-8


def test_witness_value_identity_and_linearity():
    eye = HermitianOperator((2, 2), np.eye(4, dtype=complex))
    rho1 = werner(0.7)
    rho2 = werner(0.2)
    assert math.isclose(witness_value(eye, rho1), 1.0, abs_tol=1e-12)
    w = optimal_witness(rho1, "negativity").W
    mid = DensityMatrix(HermitianOperator(
        (2, 2), (rho1.entries + rho2.entries) / 2))
    lhs = witness_value(w, mid)
    rhs = (witness_value(w, rho1) + witness_value(w, rho2)) / 2
    assert math.isclose(lhs, rhs, abs_tol=1e-12)


def test_witness_value_dims_mismatch():
    w = HermitianOperator((2,), np.eye(2, dtype=complex))
    with pytest.raises(LhsError) as err:
        witness_value(w, PHI_PLUS)
    assert err.value.code == "bad-dims"


def test_fixed_robustness_diverges_for_singular_gamma_on_pure_state():
    for fn in (quantify, optimal_witness):
        with pytest.raises(LhsError) as err:
            fn(PHI_PLUS, "one-sided-fixed-robustness")
        assert err.value.code == "unbounded-robustness"


def test_fixed_robustness_finite_on_full_rank_state():
    rho = DensityMatrix(HermitianOperator(
        (2, 2), 0.9 * PHI_PLUS.entries + 0.1 * np.eye(4) / 4))
    primal = quantify(rho, "one-sided-fixed-robustness")
    dual = optimal_witness(rho, "one-sided-fixed-robustness")
    assert primal.mu > 10
    assert abs(primal.mu - dual.mu) <= 1e-5
    assert primal.dualFeasible and dual.dualFeasible


def test_unknown_kind_rejected():
    with pytest.raises(LhsError) as err:
        quantify(PHI_PLUS, "nuclear-norm")
    assert err.value.code == "bad-parameter"


def test_large_dims_need_allow_bound():
    entries = np.zeros((8, 8), dtype=complex)
    idx = [0, 1, 4, 5]  # embed the 2x2 Bell state into 2x4
    for r, i in enumerate(idx):
        for c, j in enumerate(idx):
            entries[i, j] = PHI_PLUS.entries[r, c]
    rho = DensityMatrix(HermitianOperator((2, 4), entries))
    with pytest.raises(LhsError) as err:
        quantify(rho, "negativity")
    assert err.value.code == "ppt-not-exact"
    res = quantify(rho, "negativity", allow_bound=True)
    assert math.isclose(res.mu, 0.5, abs_tol=1e-6)


def test_2x3_dims_accepted():
    entries = np.zeros((6, 6), dtype=complex)
    idx = [0, 1, 3, 4]  # embed the 2x2 Bell state into 2x3
    for r, i in enumerate(idx):
        for c, j in enumerate(idx):
            entries[i, j] = PHI_PLUS.entries[r, c]
    rho = DensityMatrix(HermitianOperator((2, 3), entries))
    res = quantify(rho, "negativity")
    assert math.isclose(res.mu, 0.5, abs_tol=1e-6)


def test_robustness_feasibility_is_monotone():
    # once mu washes out the negativity, any larger mu does too
    pt = partial_transpose(PHI_PLUS, BipartiteCut((0,))).entries
    for mu in (2.0, 2.5, 3.0):
        shifted = pt + mu * np.eye(4) / 4
        assert np.linalg.eigvalsh(shifted)[0] >= -1e-9


def test_gme_witness_on_ghz():
    gw = gme_witness(noisy_tripartite("ghz", 1.0))
    assert math.isclose(gw.value, -1.0 / 6.0, abs_tol=2e-6)
    assert math.isclose(np.trace(gw.W.entries).real, 1.0, abs_tol=1e-9)
    assert gw.W.dims == (2, 2, 2)
    for label, (p, q) in gw.decompositions.items():
        party = {"A|BC": 0, "B|AC": 1, "C|AB": 2}[label]
        assert np.linalg.eigvalsh(p.entries)[0] >= -1e-8
        assert np.linalg.eigvalsh(q.entries)[0] >= -1e-8
        qt = partial_transpose(q, BipartiteCut((party,))).entries
        residual = np.abs(gw.W.entries - p.entries - qt).max()
        assert residual <= 1e-7


def test_gme_witness_on_w_state():
    gw = gme_witness(noisy_tripartite("w", 1.0))
    assert math.isclose(gw.value, -0.135971, abs_tol=1e-4)


def test_gme_inconclusive_on_white_noise():
    # value is tr[W]/8 for every admissible witness, so exactly 1/8
    gw = gme_witness(noisy_tripartite("ghz", 0.0))
    assert math.isclose(gw.value, 0.125, abs_tol=1e-7)


def test_gme_noisy_ghz_sign_flip():
    assert gme_witness(noisy_tripartite("ghz", 0.40)).value > 0
    assert gme_witness(noisy_tripartite("ghz", 0.45)).value < 0


def test_gme_nonnegative_on_biseparable_mixture():
    zero = np.diag([1.0, 0.0]).astype(complex)
    left = np.kron(zero, PHI_PLUS.entries)
    right = np.kron(PHI_PLUS.entries, zero)
    rho = DensityMatrix(HermitianOperator((2, 2, 2), (left + right) / 2))
    assert gme_witness(rho).value >= -1e-8


def test_gme_rejects_bipartite_input():
    with pytest.raises(LhsError) as err:
        gme_witness(PHI_PLUS)
    assert err.value.code == "bad-dims"
