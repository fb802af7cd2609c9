import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqbethe.errors import DegenerateError, ExtrapolationError
from seqbethe.scalar_factors import ScalarFactorConfig
from seqbethe.sequential import (
    PinchPath,
    check_tau_compat,
    extended_path,
    find_families,
    neville,
    proportionality,
    reduced_assignment,
    residue_check,
    z_linear_solve,
)
from seqbethe.tensor_core import Rapidities

BASE3 = Rapidities((0.35 - 0.2j, -0.9 + 0.45j, 1.2 + 0.1j), 1.0)


@pytest.fixture(scope="module", params=[1, -1], ids=["plus", "minus"])
def family(request):
    att = find_families(BASE3, 1, request.param, 1)
    fams = [a.family for a in att if a.status == "sequential"]
    assert fams, [a.message for a in att]
    return fams[0]


@settings(max_examples=40)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=4))
def test_neville_exact_on_polynomials(coeffs):
    xs = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3][:len(coeffs) + 1]
    ys = [np.polyval(coeffs, x) for x in xs]
    assert abs(neville(xs, ys) - coeffs[-1]) < 1e-9 * max(1, max(map(abs, coeffs)))


def test_neville_componentwise():
    xs = [0.1, 0.05, 0.02]
    ys = [np.array([1 + x, 2 - 3 * x * x]) for x in xs]
    np.testing.assert_allclose(neville(xs, ys), [1, 2], atol=1e-14)


def test_reduced_assignment():
    assert reduced_assignment((1, 3, 5), 2, 1) == (1, 3)
    assert reduced_assignment((2, 4), 2, 0) == (2,)
    assert reduced_assignment((2, 3), 2, 0) is None   # another root on the pinched pair
    assert reduced_assignment((2,), 2, 0) == ()


def test_pinch_path_geometry():
    p = PinchPath(BASE3, 1, -1)
    assert p.deltas == (1e-2, 1e-3, 1e-4, 1e-5)
    assert p.target == BASE3.values[0] - 0.5j
    assert p.pinched().values[1] == BASE3.values[0] - 1j
    assert p.reduced().values == (BASE3.values[2],)
    with pytest.raises(ValueError):
        PinchPath(BASE3, 1, 2)
    with pytest.raises(ValueError):
        PinchPath(BASE3, 1, 1, (1e-3, 1e-2))


def test_family_converges_linearly(family):
    assert 0.9 <= family.convergence_slope <= 1.1
    assert family.miss < 1e-3
    assert family.reduced_residual < 1e-9
    assert abs(family.t_lambda_limit - family.pinch.target) < 1e-6


def test_z_formula_matches_fit(family):
    z = z_linear_solve(family.roots_reduced, BASE3, 1, family.pinch.sign)
    assert abs(z - family.z_estimate) / abs(z) < 1e-2


def test_eigenvalue_compatibility(family):
    z0 = [0.7 + 1.3j, -1.5 - 0.6j, 2.2 + 0.2j]
    assert check_tau_compat(family, z0)["max_rel_dev"] < 1e-7


def test_unnormalized_eigenvalue_picks_up_known_factor(family):
    if family.pinch.sign != 1:
        pytest.skip("factor derived for the + pinch")
    z0 = 0.7 + 1.3j
    th_k = BASE3.values[0]
    row = check_tau_compat(family, [z0], normalized=False)["samples"][0]
    expected = (z0 - th_k - 1j) / (z0 - th_k)
    assert abs(row["pinched"] / row["reduced"] - expected) < 1e-9


def test_extended_path_goes_further(family):
    path = extended_path(family, 2)
    assert [d for d, _ in path][-2:] == pytest.approx([1e-6, 1e-7])
    lock = family.locking_index
    assert abs(path[-1][1][lock] - family.pinch.target) < 1e-6


def test_residue_relation(family):
    r = residue_check(family, ScalarFactorConfig(1.0))
    assert r["support_dev"] <= 1e-8
    assert r["ratio_dev"] <= 1e-6
    assert r["pole_order"] >= 1


def test_two_sites_degenerate():
    # N = 2: no reduced roots, Z = 0, the root approaches like √δ
    base = Rapidities((0.2 + 0.1j, -0.6 + 0.3j), 1.0)
    att = find_families(base, 1, 1, 1)
    assert [a.status for a in att] == ["degenerate", "degenerate"]
    assert all(0.4 < a.family.convergence_slope < 0.6 for a in att)
    with pytest.raises(DegenerateError):
        z_linear_solve((), base, 1, 1)


def test_proportionality_helper():
    rhs = np.array([1.0, 0.0, -2.0, 0.5j])
    out = proportionality((3 - 1j) * rhs, rhs)
    assert out["pass"] and abs(out["ratio"] - (3 - 1j)) < 1e-14
    bad = (3 - 1j) * rhs + np.array([0, 1e-3, 0, 0])
    assert proportionality(bad, rhs)["support_dev"] > 1e-4
    with pytest.raises(ExtrapolationError):
        proportionality(rhs, np.zeros(4))
