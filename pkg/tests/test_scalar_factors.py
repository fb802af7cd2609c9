import numpy as np
import pytest

from seqbethe.errors import PoleProximityError, ScalarDomainError, StripError
from seqbethe.scalar_factors import (
    ScalarFactorConfig,
    psi,
    psi_with_error,
    r_scalar,
    sym_prefactor,
)
from seqbethe.tensor_core import Rapidities

mp = pytest.importorskip("mpmath")

# ψ from the single-kernel integral representation, 30 digits (mpmath.quad),
# valid for −3/2 < Im θ/ħ < 1/2.  Frozen here; regenerate with _mp_psi below.
FROZEN_PSI = [
    (0.3 + 0.2j, 1.0, 0.040773066357741396 + 0.17505699111057238j),
    (-1.1 - 0.4j, 1.0, -0.3966462208596858 + 0.8457914798030205j),
    (0.75 + 0.1j, 0.5, 0.11949631537271638 + 0.8521457692175718j),
    (2.5 - 1.0j, 2.0, 0.34949750805966795 + 0.9369372934514254j),
    (0.05 - 0.9j, 1.0, 5.994871226923029 - 9.351950973353663j),
]


def _mp_psi(theta, hbar):
    mp.mp.dps = 30
    a = mp.mpc(theta) / hbar + 0.5j

    def kern(t):
        q2 = mp.e ** (-t)
        return 2 * q2 * (1 + mp.sqrt(q2)) / (1 + q2) ** 2

    integral = mp.quad(lambda t: kern(t) * mp.sin(t * a) / t, [0, 1, 5, 20, 60, 200])
    return complex(mp.tanh(mp.pi * mp.mpc(theta) / (2 * hbar)) * mp.e ** (1j * integral))


@pytest.mark.parametrize("theta,hbar,expected", FROZEN_PSI)
def test_psi_frozen_values(theta, hbar, expected):
    got = psi(theta, ScalarFactorConfig(hbar))
    assert abs(got - expected) < 1e-12 * max(1, abs(expected))


def test_psi_live_oracle():
    # a point outside the frozen list, checked against the oracle itself
    th = -0.6 + 0.35j
    assert abs(psi(th, ScalarFactorConfig(1.0)) - _mp_psi(th, 1.0)) < 1e-12


def test_psi_zero_and_error_estimate():
    cfg = ScalarFactorConfig(1.0)
    assert abs(psi(0.0, cfg)) < 1e-15
    val, err = psi_with_error(0.4 - 0.2j, cfg)
    assert err < 1e-10 * abs(val)


@pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
def test_functional_identities(hbar):
    cfg = ScalarFactorConfig(hbar)
    rng = np.random.default_rng(int(hbar * 10))
    for _ in range(15):
        z = complex(rng.uniform(-3, 3) * hbar, rng.uniform(-0.95, 0.95) * hbar)
        assert abs(psi(-z, cfg) * psi(z - 1j * hbar, cfg) + 1) < 1e-8
        assert abs(psi(z, cfg) - r_scalar(z, cfg) * psi(-z, cfg)) < 1e-8
        assert abs(r_scalar(z, cfg) * r_scalar(z - 1j * hbar, cfg) - (1 - 1j * hbar / z)) < 1e-7
        assert abs(r_scalar(z, cfg) * r_scalar(-z, cfg) - 1) < 1e-10


def test_continuation_far_from_strip():
    # deep in the upper half plane the identity still holds (many peeled modes)
    cfg = ScalarFactorConfig(1.0)
    for z in (0.3 + 6.2j, -1.0 + 12.5j, 2.0 - 7.3j):
        assert abs(r_scalar(z, cfg) * r_scalar(z - 1j, cfg) - (1 - 1j / z)) < 1e-7


def test_r_large_theta_asymptotics():
    # r(θ) = 1 − iħ/(2θ) + O(θ⁻²); |r − 1| itself is ≈ ħ/(2|θ|) = 5e−4 at 10³ħ
    cfg = ScalarFactorConfig(1.0)
    for th in (1e3, 1e3 + 5e2j, -1e3 + 1e2j):
        r = r_scalar(th, cfg)
        assert abs(r - (1 - 0.5j / th)) < 1e-6
    assert abs(abs(r_scalar(1e3, cfg) - 1) - 5e-4) < 1e-6


def test_nearly_imaginary_arguments():
    # |θ/ħ| ~ 1.7e3 close to the imaginary axis: fine while Re θ/ħ gives the
    # rotated ray some decay, a documented StripError on the axis itself
    cfg = ScalarFactorConfig(1e-3)
    z = 0.05 + 1.7362j
    assert abs(r_scalar(z, cfg) * r_scalar(z - 1e-3j, cfg) - (1 - 1e-3j / z)) < 1e-7
    with pytest.raises(StripError):
        psi(1e-5 - 1.7362j, cfg)


def test_domain_errors():
    cfg = ScalarFactorConfig(1.0)
    with pytest.raises(ScalarDomainError):
        r_scalar(0.0, cfg)
    with pytest.raises(ValueError):
        ScalarFactorConfig(-1.0)
    with pytest.raises(ValueError):
        ScalarFactorConfig(1.0, continuation_strip_margin=1.5)
    rap = Rapidities((0.0, 1j), 1.0, allow_pinch=True)
    with pytest.raises(PoleProximityError):
        sym_prefactor(rap, cfg)
    with pytest.raises(ValueError):
        sym_prefactor(Rapidities((0.0, 0.5), 2.0), cfg)


def test_sym_prefactor_two_sites():
    cfg = ScalarFactorConfig(1.0)
    rap = Rapidities((0.2 + 0.1j, -0.4 + 0.3j), 1.0)
    d = rap.diff(2, 1)
    assert abs(sym_prefactor(rap, cfg) - 1j * psi(d, cfg) / (d * d + 1)) < 1e-15
