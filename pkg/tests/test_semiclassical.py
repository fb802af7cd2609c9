import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqbethe import semiclassical as sc
from seqbethe import tensor_core as tc
from seqbethe.bae import eval_tau
from seqbethe.errors import CoincidentRapidityError
from seqbethe.scalar_factors import ScalarFactorConfig
from seqbethe.tensor_core import Rapidities

# well separated imaginary parts (≥ 10ħ for ħ ≤ 0.1)
RAP3 = Rapidities((0.4 + 1.0j, -1.3 + 2.5j, 0.9 + 4.0j), 1e-3)
RAP4 = Rapidities((0.4 + 1.0j, -1.3 + 2.5j, 0.9 + 4.0j, -0.2 + 5.5j), 1e-3)
THETA0 = 0.3 + 7.5j


def test_one_site_eigenvalue_coefficients():
    # N = 1 on Ω: τ = i − i·x/(x + iħ) = −ħ/x + iħ²/x² + O(ħ³), x = θ₀₁;
    # the normalized one carries r(−x) ≈ 1 + iħ/(2x)
    rap = Rapidities((0.2 + 0.3j,), 1.0)
    x = THETA0 - rap.values[0]
    o1, o2 = sc.tau_semiclassical(THETA0, sc.SignPattern((1,)), rap, normalized=False)
    assert abs(o1 + 1 / x) < 1e-15
    assert abs(o2 - 1j / x ** 2) < 1e-15
    o1n, o2n = sc.tau_semiclassical(THETA0, sc.SignPattern((1,)), rap)
    assert abs(o1n + 1 / x) < 1e-15
    assert abs(o2n - 0.5j / x ** 2) < 1e-15


def test_one_site_against_exact_eigenvalue():
    rap = Rapidities((0.2 + 0.3j,), 1e-4)
    o1, o2 = sc.tau_semiclassical(THETA0, sc.SignPattern((1,)), rap, normalized=False)
    exact = eval_tau(THETA0, (), rap)
    h = rap.hbar
    assert abs(exact - h * o1 - h * h * o2) < 50 * h ** 3


def test_sign_flip_negates_first_order():
    eps = sc.SignPattern((1, -1, 1))
    flip = sc.SignPattern((-1, 1, -1))
    a, _ = sc.tau_semiclassical(THETA0, eps, RAP3)
    b, _ = sc.tau_semiclassical(THETA0, flip, RAP3)
    assert abs(a + b) < 1e-14


@pytest.mark.parametrize("normalized", [True, False])
def test_operator_expansion(normalized):
    ex = sc.verify_expansion(RAP3, THETA0, 1e-3, "derived", normalized)
    assert ex["order1_rel_dev"] < 1e-4 and ex["order2_rel_dev"] < 1e-4


def test_literal_variant_commutes_but_misses_expansion():
    cm = sc.commutator_norms(RAP4, "literal")
    assert max(cm.values()) < 1e-12
    ex = sc.verify_expansion(RAP3, THETA0, 1e-3, "literal", True)
    assert ex["order2_rel_dev"] > 1e-2


def test_classical_vectors_diagonalize_first_order():
    o1, _ = sc.expand_transfer_ops(RAP3, THETA0)
    assert np.count_nonzero(np.abs(o1 - np.diag(np.diag(o1))) > 1e-15) == 0
    for a in [(1,), (2, 3)]:
        pat = sc.SignPattern.from_assignment(3, a)
        v = sc.classical_vector(pat)
        c1, _ = sc.tau_semiclassical(THETA0, pat, RAP3)
        # operator coefficient is of iħ, eigenvalue coefficient of ħ
        np.testing.assert_allclose(1j * o1 @ v, c1 * v, atol=1e-14)


def test_leading_order_has_no_hbar0_term():
    assert sc.leading_order_slope(RAP3, THETA0) > 0.95


def test_root_scaling_is_quadratic():
    rs = sc.root_scaling((1, 3), RAP3.with_hbar(0.1))
    assert all(1.9 <= s <= 2.1 for s in rs["slopes"])


@pytest.mark.parametrize("normalized", [True, False])
def test_eigenvalue_expansion_slope(normalized):
    es = sc.eigen_expansion_slope(THETA0, (2,), RAP3, normalized=normalized)
    assert es["slope"] >= 2.8


def test_region_check():
    assert sc.region_ok(RAP3, 10, 0.1)
    assert not sc.region_ok(RAP3, 10, 0.2)


@settings(max_examples=25)
@given(st.lists(st.sampled_from([1, -1]), min_size=2, max_size=6))
def test_sign_pattern_roundtrip(eps):
    pat = sc.SignPattern(tuple(eps))
    assert pat.charge == sum(eps)
    assert sc.classical_vector(pat)[pat.index] == 1
    occ = tuple(k + 1 for k, e in enumerate(eps) if e < 0)
    assert sc.SignPattern.from_assignment(len(eps), occ) == pat


def test_classical_f_exchange_symmetry():
    # both normalizations are invariant under simultaneous exchange of
    # rapidities and signs at sites k, k+1
    for norm in sc.NORMALIZATIONS:
        pat = sc.SignPattern((1, -1, -1, 1))
        f = sc.classical_f(pat, RAP4, norm).component()
        sw = sc.SignPattern((-1, 1, -1, 1))
        g = sc.classical_f(sw, RAP4.swapped(1), norm).component()
        assert abs(f - g) < 1e-13 * abs(f)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_classical_residue_pinching_normalization(k):
    for a in [(1,), (2,), (1, 4), (2, 3)]:
        pat = sc.SignPattern.from_assignment(4, a)
        r = sc.classical_residue_check(pat, RAP4, k)
        assert r["pass"]
        if not r["vanishing_case"]:
            assert abs(r["c0"] - 2) < 1e-10
            assert r["last_factor_vs_tau"] < 1e-10


def test_contour_residue_simple_pole():
    res = sc.contour_residue(lambda d: 3.0 / d + d ** 2, 0.1)
    assert abs(res - 3.0) < 1e-14


def test_classical_f_limit_three_sites():
    fl = sc.f_classical_limit((2,), RAP3, ScalarFactorConfig, (1e-3,))[0]
    assert fl["rel_dev"] < 1e-3


def test_limit_commutativity_four_sites():
    base = Rapidities((0.3 - 0.2j, -1.1 + 0.4j, 0.8 + 0.6j, 1.9 - 0.5j), 1.0)
    out = sc.limit_commutativity(base, 2, 2, 1e-2)
    assert out["pass"]


def test_errors():
    with pytest.raises(ValueError):
        sc.hamiltonians(RAP3, "other")
    with pytest.raises(ValueError):
        sc.SignPattern((1, 0))
    with pytest.raises(CoincidentRapidityError):
        sc.expand_transfer_ops(RAP3, RAP3.values[0])
    with pytest.raises(tc.SizeCapError):
        sc.hamiltonians(Rapidities(tuple(np.arange(11) + 1j * np.arange(11)), 1e-3))
    with pytest.raises(ValueError):
        sc.ClassicalF(sc.SignPattern((1, 1)), RAP3)
