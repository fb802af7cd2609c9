"""Scalar functions ψ(θ), r(θ) = ψ(θ)/ψ(−θ) and the symmetrization prefactor.

ψ is given by an integral representation

    ψ(θ) = tanh(πθ/2ħ) · exp{ i ∫₀^∞ K(t) sin(t a)/t dt },   a = θ/ħ + i/2,
    K(t) = 2q²(1+q)/(1+q²)²,   q = e^{-t/2},

which converges for |Im a| < 1.  To reach further into the complex plane
the first M exponential modes of K are integrated in closed form
(∫ e^{-pt} sin(ta)/t dt = arctan(a/p)), leaving a remainder kernel

    K_M(t) = 2q²(1+q)(−q²)^M [(M+1) + M q²]/(1+q²)²

that decays like e^{-(M+1)t} and converges for |Im a| < M+1.  The removed
modes contribute the rational factor
∏_{m<M} ∏_{p∈{m+1, m+3/2}} ((p+ia)/(p−ia))^{(−1)^m (m+1)}.

The remainder integral is split into its two exponential parts, each
regularized at t = 0 by a common subtraction K_M(0)e^{−λt}/t, and each
integrated along a ray rotated into the half plane where its oscillation
turns into decay.  Composite Gauss–Legendre panels are used; the error
estimate is the change when the number of nodes per panel is doubled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import PoleProximityError, QuadratureError, ScalarDomainError, StripError
from .tensor_core import POLE_EPS, Rapidities


@dataclass(frozen=True)
class ScalarFactorConfig:
    """Quadrature setup for ψ.

    ``continuation_strip_margin`` is the minimal distance (in units of ħ)
    between Im(θ/ħ + i/2) and the edge of the convergence strip of the
    chosen remainder kernel; it fixes how many modes are peeled off.
    ``quadrature_cutoff`` (ray length) defaults to the value at which the
    exponential tail bound drops below 1e−17.
    """

    hbar: float
    quadrature_points: int = 16
    quadrature_cutoff: float | None = None
    continuation_strip_margin: float = 0.5
    max_modes: int = 64
    error_tolerance: float = 1e-10

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if self.quadrature_points < 2:
            raise ValueError("quadrature_points must be >= 2")
        if not 0 < self.continuation_strip_margin < 1:
            raise ValueError("continuation_strip_margin must lie in (0, 1)")


_TAIL_TOL = 1e-17


@lru_cache(maxsize=64)
def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _tanh(z: complex) -> complex:
    if z.real > 20:
        e = np.exp(-2 * z)
        return (1 - e) / (1 + e)
    if z.real < -20:
        e = np.exp(2 * z)
        return -(1 - e) / (1 + e)
    return complex(np.tanh(z))


_ANGLES = np.deg2rad(np.linspace(0.0, 89.9, 900))


def _best_ray(mm, b, w):
    """Largest decay rate of e^{(−mm + i(w+ib))t} along t = s·e^{iφ}, φ·w ≥ 0."""
    rates = (mm + b) * np.cos(_ANGLES) + abs(w) * np.sin(_ANGLES)
    if w == 0:
        rates = rates[:1]
    i = int(np.argmax(rates))
    sg = 1.0 if w >= 0 else -1.0
    return float(rates[i]), sg * float(_ANGLES[i])


def _plan(a, margin, max_modes):
    """Peeled mode count M and (rate, angle) of the rays for +a and −a."""
    for m in range(max_modes + 1):
        plus = _best_ray(m + 1, a.imag, a.real)
        minus = _best_ray(m + 1, -a.imag, -a.real)
        if min(plus[0], minus[0]) >= margin:
            return m, plus, minus
    raise StripError(f"a = {a}: no admissible contour with <= {max_modes} modes")


def _kernel_tilde(t, m):
    """K_M(t)·e^{(M+1)t} for complex t."""
    q = np.exp(-t / 2)
    q2 = q * q
    return 2 * (1 + q) * (-1) ** m * ((m + 1) + m * q2) / (1 + q2) ** 2


def _ray_integral(a, m, phi, lam, length, npts, width):
    """∫_0^length [K_M(t)e^{ita} − K_M(0)e^{−λt}] ds/s with t = s·e^{iφ}."""
    x, w = _gauss(npts)
    npan = max(1, math.ceil(length / width))
    edges = np.linspace(0.0, length, npan + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    s = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    rot = np.exp(1j * phi)
    t = s * rot
    k0 = (-1) ** m * (2 * m + 1)
    f = (_kernel_tilde(t, m) * np.exp((-(m + 1) + 1j * a) * t) - k0 * np.exp(-lam * t)) / s
    return np.dot(ws, f)


def _remainder(a, m, plus, minus, cfg):
    (rp, php), (rm, phm) = plus, minus
    # common regularization; decays at least as fast as both main terms
    lam = max(1.0, rp / math.cos(php), rm / math.cos(phm))
    k0 = 2 * m + 1
    width = min(1.0, 2.0 / max(abs(a), lam, m + 1.0))

    def part(sgn, rate, phi, npts):
        length = cfg.quadrature_cutoff or (math.log(k0 / _TAIL_TOL) + 2) / rate
        return _ray_integral(sgn * a, m, phi, lam, length, npts, width)

    def total(npts):
        return (part(1, rp, php, npts) - part(-1, rm, phm, npts)) / 2j

    n = cfg.quadrature_points
    lo, hi = total(n), total(2 * n)
    return hi, abs(hi - lo)


def _rational(a, m):
    out = 1.0 + 0j
    for k in range(m):
        e = (-1) ** k * (k + 1)
        for p in (k + 1.0, k + 1.5):
            out *= ((p + 1j * a) / (p - 1j * a)) ** e
    return out


@lru_cache(maxsize=8192)
def _psi_cached(theta: complex, cfg: ScalarFactorConfig):
    a = theta / cfg.hbar + 0.5j
    m, plus, minus = _plan(a, cfg.continuation_strip_margin, cfg.max_modes)
    integral, err = _remainder(a, m, plus, minus, cfg)
    if not np.isfinite(integral) or err > cfg.error_tolerance * max(1.0, abs(integral)):
        raise QuadratureError(f"psi({theta}): quadrature error {err:.2e} too large")
    val = _tanh(math.pi * theta / (2 * cfg.hbar)) * _rational(a, m) * np.exp(1j * integral)
    # error of exp(iI) propagates multiplicatively
    return complex(val), float(abs(val) * err)


def psi_with_error(theta, cfg: ScalarFactorConfig):
    """ψ(θ) and an absolute error estimate."""
    return _psi_cached(complex(theta), cfg)


def psi(theta, cfg: ScalarFactorConfig) -> complex:
    """ψ(θ); zero at θ = 0, pole at θ = −iħ."""
    return _psi_cached(complex(theta), cfg)[0]


def r_scalar(theta, cfg: ScalarFactorConfig) -> complex:
    """r(θ) = ψ(θ)/ψ(−θ); satisfies r(θ)r(θ−iħ) = 1 − iħ/θ and r(θ)r(−θ) = 1."""
    theta = complex(theta)
    if theta == 0:
        raise ScalarDomainError("r(0) is undefined (psi(0) = 0)")
    den = psi(-theta, cfg)
    if den == 0 or not np.isfinite(den):
        raise ScalarDomainError(f"psi(-theta) = {den} at theta = {theta}")
    return psi(theta, cfg) / den


def sym_prefactor(rap: Rapidities, cfg: ScalarFactorConfig, pole_eps=POLE_EPS) -> complex:
    """∏_{k>l} iψ(θ_kl)/(θ_kl² + ħ²) (φ ≡ 1 symmetrization prefactor)."""
    if cfg.hbar != rap.hbar:
        raise ValueError("cfg.hbar differs from rapidities.hbar")
    h = rap.hbar
    out = 1.0 + 0j
    for k in range(2, rap.n + 1):
        for l in range(1, k):
            d = rap.diff(k, l)
            if min(abs(d - 1j * h), abs(d + 1j * h)) < pole_eps * h:
                raise PoleProximityError(f"theta_{k}{l} = ±i*hbar")
            out *= 1j * psi(d, cfg) / (d * d + h * h)
    return out
