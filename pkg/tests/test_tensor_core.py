import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqbethe import tensor_core as tc
from seqbethe.errors import (
    CoincidentRapidityError,
    DimensionError,
    IndexRangeError,
    PoleProximityError,
    SizeCapError,
    ZeroVectorError,
)
from seqbethe.tensor_core import ChargeSector, Rapidities


def _rap(rng, n, hbar=1.0):
    return Rapidities(tuple(rng.uniform(-2, 2, n) + 1j * rng.uniform(-1, 1, n)), hbar)


def _naive_transfer(theta0, rap):
    """Oracle: Γ-weighted partial trace over the auxiliary space of the
    ordered product R_{a1} R_{a2} ⋯ R_{aN}, built entrywise on aux ⊗ chain."""
    n, h = rap.n, rap.hbar
    dim = 2 ** (n + 1)

    def r_aux(j, x):
        # aux = bit n, site j = bit j-1
        m = np.zeros((dim, dim), dtype=complex)
        for col in range(dim):
            a, s = (col >> n) & 1, (col >> (j - 1)) & 1
            m[col, col] += x
            swapped = col ^ ((a ^ s) << n) ^ ((a ^ s) << (j - 1))
            m[swapped, col] += -1j * h
        return m / (x - 1j * h)

    mono = np.eye(dim, dtype=complex)
    for j in range(1, n + 1):
        mono = mono @ r_aux(j, rap.values[j - 1] - theta0)
    half = 2 ** n
    return 1j * mono[:half, :half] - 1j * mono[half:, half:]


# ---------------------------------------------------------------------------
# R-matrix

def test_r_block_frozen_values():
    # at θ = iħ/2: R = −1 + 2P
    r = tc.r_matrix_block(0.5j, 1.0)
    expected = -np.eye(4) + 2 * tc.PERM
    np.testing.assert_allclose(r, expected, atol=1e-15)
    # R(θ)|++> = |++> for every θ (unnormalized)
    r = tc.r_matrix_block(0.37 - 1.2j, 0.8)
    np.testing.assert_allclose(r[0, 0], 1.0, atol=1e-15)
    np.testing.assert_allclose(r[3, 3], 1.0, atol=1e-15)


def test_r_unitarity():
    # R(θ)R(−θ) = (θ² + ħ²)/((θ − iħ)(−θ − iħ)) · 1 = 1
    for th in (0.3 + 0.1j, -2.0 + 0.4j, 1.7j):
        prod = tc.r_matrix_block(th, 1.0) @ tc.r_matrix_block(-th, 1.0)
        np.testing.assert_allclose(prod, np.eye(4), atol=1e-13)


def test_r_pole_guard():
    with pytest.raises(PoleProximityError):
        tc.r_matrix_block(1j, 1.0)


def test_exchange_operator_identity_at_zero():
    np.testing.assert_allclose(tc.exchange_operator(0.0, 1.3), np.eye(4), atol=1e-15)


# ---------------------------------------------------------------------------
# transfer matrix

@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_dense_transfer_matches_naive_oracle(n):
    rng = np.random.default_rng(n)
    rap = _rap(rng, n, 0.7)
    z = complex(0.4, -0.3)
    np.testing.assert_allclose(tc.dense_transfer(z, rap), _naive_transfer(z, rap), atol=1e-12)


def test_transfer_on_reference_state_frozen():
    # 𝒯Ω = (i − i∏ θ₀j/(θ₀j + iħ)) Ω
    rap = Rapidities((0.1 + 0.2j, -0.5 + 0.0j, 0.9 - 0.3j), 1.0)
    z = 0.3 - 0.7j
    x = z - rap.arr
    tau = 1j - 1j * np.prod(x / (x + 1j))
    out = tc.apply_transfer(z, rap, tc.omega(3))
    np.testing.assert_allclose(out, tau * tc.omega(3), atol=1e-14)


@pytest.mark.parametrize("n", [2, 5, 7])
def test_matrix_free_matches_dense(n):
    rng = np.random.default_rng(10 + n)
    rap = _rap(rng, n)
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    z = complex(-0.2, 1.1)
    dense = tc.dense_transfer(z, rap) @ v
    np.testing.assert_allclose(tc.apply_transfer(z, rap, v), dense,
                               atol=1e-12 * np.linalg.norm(dense))


def test_transfer_commutes_and_conserves_charge():
    rng = np.random.default_rng(3)
    rap = _rap(rng, 5)
    a, b = tc.dense_transfer(0.3 + 0.2j, rap), tc.dense_transfer(-1.0 - 0.5j, rap)
    assert np.max(np.abs(a @ b - b @ a)) < 1e-12
    g = tc.total_gamma(5)
    assert np.max(np.abs(a @ g - g @ a)) < 1e-12


def test_ybe():
    from seqbethe.experiments import ybe_deviation
    assert ybe_deviation(0.3 + 0.4j, -1.2 + 0.1j, 1.0) < 1e-13


def test_B_lowers_charge_by_two():
    rng = np.random.default_rng(4)
    rap = _rap(rng, 4)
    w = tc.apply_B(0.2 + 0.1j, rap, tc.omega(4))
    assert tc.charge_of(w) == 2
    w = tc.apply_B(-0.7 + 0.3j, rap, w)
    assert tc.charge_of(w) == 0


def test_B_on_one_site_frozen():
    # one site: B(t)Ω = Γ_− · (−iħ)/(x − iħ) |−>,  x = θ − t
    rap = Rapidities((0.4 + 0.1j,), 1.0)
    t = -0.3 + 0.2j
    x = rap.values[0] - t
    w = tc.apply_B(t, rap, tc.omega(1))
    np.testing.assert_allclose(w, [0, -1j * (-1j) / (x - 1j)], atol=1e-15)


def test_two_site_permutation_matches_dense():
    n = 3
    v = np.arange(8, dtype=complex)
    out = tc.apply_two_site(tc.exchange_operator(0.0, 1.0) @ tc.PERM, 1, n, v)
    np.testing.assert_allclose(out, tc.perm_sites(1, 2, n) @ v)


# ---------------------------------------------------------------------------
# bookkeeping

@given(st.lists(st.sampled_from([1, -1]), min_size=1, max_size=10))
def test_basis_index_charge_roundtrip(signs):
    idx = tc.basis_index(signs)
    n = len(signs)
    assert 0 <= idx < 2 ** n
    assert tc.charges(n)[idx] == sum(signs)
    decoded = [1 if not (idx >> j) & 1 else -1 for j in range(n)]
    assert decoded == signs


@settings(max_examples=30)
@given(st.integers(1, 8), st.data())
def test_sector_dimensions(n, data):
    lam = data.draw(st.integers(0, n))
    sec = ChargeSector.from_magnons(n, lam)
    assert sec.dimension == math.comb(n, lam) == len(sec.indices())
    assert sec.magnon_count == lam


def test_charge_of_mixed_and_errors():
    v = np.zeros(8, dtype=complex)
    v[0] = 1
    v[1] = 1
    assert tc.charge_of(v) == "mixed"
    with pytest.raises(ZeroVectorError):
        tc.charge_of(np.zeros(4))
    with pytest.raises(DimensionError):
        tc.charge_of(np.ones(6))


def test_input_validation():
    with pytest.raises(CoincidentRapidityError):
        Rapidities((0.1, 0.1), 1.0)
    with pytest.raises(PoleProximityError):
        Rapidities((0.0, 1j), 1.0)
    Rapidities((0.0, 1j), 1.0, allow_pinch=True)
    with pytest.raises(ValueError):
        Rapidities((0.0,), -1.0)
    with pytest.raises(ValueError):
        ChargeSector(3, 2)
    rap = Rapidities((0.0, 0.5, 1.0), 1.0)
    with pytest.raises(IndexRangeError):
        rap.swapped(3)
    with pytest.raises(DimensionError):
        tc.apply_transfer(0.2j, rap, np.ones(4))
    with pytest.raises(SizeCapError):
        tc.dense_transfer(0.1j, Rapidities(tuple(np.arange(11) * 0.37), 1.0))


def test_rapidities_helpers():
    rap = Rapidities((1.0, 2.0, 3.0, 4.0), 0.5)
    assert rap.swapped(2).values == (1, 3, 2, 4)
    assert rap.reduced(2).values == (1, 4)
    assert rap.diff(3, 1) == 2.0


def test_B_operators_commute():
    rng = np.random.default_rng(6)
    rap = _rap(rng, 5)
    v = rng.normal(size=32) + 1j * rng.normal(size=32)
    t, s = 0.3 - 0.4j, -1.2 + 0.7j
    ab = tc.apply_B(t, rap, tc.apply_B(s, rap, v))
    ba = tc.apply_B(s, rap, tc.apply_B(t, rap, v))
    assert np.linalg.norm(ab - ba) < 1e-10 * np.linalg.norm(ab)


def test_exchange_then_reverse_is_identity():
    # L(x)L(−x) = R(x)R(−x) = 1 for the unnormalized R
    rng = np.random.default_rng(7)
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    x = 0.8 - 0.3j
    out = tc.apply_two_site(tc.exchange_operator(x, 1.0), 2, 4,
                            tc.apply_two_site(tc.exchange_operator(-x, 1.0), 2, 4, v))
    np.testing.assert_allclose(out, v, atol=1e-13)
