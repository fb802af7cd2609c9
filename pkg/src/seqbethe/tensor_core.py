"""Finite-dimensional linear algebra of the inhomogeneous twisted chain.

Conventions
-----------
* A state vector on N sites has 2**N components.  Site ``j`` (1-based)
  is stored in bit ``j-1`` of the integer index; bit value 0 is the
  ``+`` state and 1 the ``-`` state.
* ``Rapidities.values[j-1]`` is the rapidity of site ``j``.
* R(θ) = pref · (θ·1 − iħ·P) acting on (auxiliary ⊗ site), with
  pref = 1/(θ − iħ) (unnormalized, the default) or r(θ)/(θ − iħ).
  Blocks are 4×4 in the basis ``2*aux + site``.
* The transfer matrix is the Γ-weighted auxiliary trace of the ordered
  product R_1(θ_1−θ₀) R_2(θ_2−θ₀) ⋯ R_N(θ_N−θ₀); the matrix-free
  sweep visits sites 1 → N.
* B(t) is the (aux out = +, aux in = −) entry of the same monodromy at
  θ₀ = t, weighted by Γ_−; it lowers the charge by two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CoincidentRapidityError,
    DimensionError,
    IndexRangeError,
    PoleProximityError,
    SizeCapError,
    ZeroVectorError,
)

GAMMA = np.diag([1j, -1j])
POLE_EPS = 1e-9          # relative to ħ
DENSE_CAP = 10
CHARGE_TOL = 1e-10

PERM = np.zeros((4, 4))
for _a in range(2):
    for _b in range(2):
        PERM[2 * _a + _b, 2 * _b + _a] = 1.0
del _a, _b


@dataclass(frozen=True)
class Rapidities:
    """Inhomogeneities θ_1..θ_N (stored site 1 first) and ħ."""

    values: tuple
    hbar: float
    allow_pinch: bool = False

    def __post_init__(self):
        vals = tuple(complex(x) for x in self.values)
        object.__setattr__(self, "values", vals)
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        n = len(vals)
        for k in range(n):
            for l in range(k):
                d = vals[k] - vals[l]
                if d == 0:
                    raise CoincidentRapidityError(f"theta_{k + 1} == theta_{l + 1}")
                if not self.allow_pinch and min(abs(d - 1j * self.hbar),
                                                abs(d + 1j * self.hbar)) < POLE_EPS * self.hbar:
                    raise PoleProximityError(
                        f"theta_{k + 1} - theta_{l + 1} = ±i*hbar (pinched); "
                        "construct with allow_pinch=True")

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def arr(self) -> np.ndarray:
        return np.array(self.values, dtype=complex)

    def diff(self, k: int, l: int) -> complex:
        """θ_{kl} = θ_k − θ_l (1-based sites)."""
        return self.values[k - 1] - self.values[l - 1]

    def swapped(self, k: int) -> "Rapidities":
        """σ_k θ: exchange the rapidities of sites k and k+1."""
        _check_bond(k, self.n)
        v = list(self.values)
        v[k - 1], v[k] = v[k], v[k - 1]
        return Rapidities(tuple(v), self.hbar, self.allow_pinch)

    def reduced(self, k: int) -> "Rapidities":
        """p_k θ: drop sites k and k+1."""
        _check_bond(k, self.n)
        v = self.values[:k - 1] + self.values[k + 1:]
        return Rapidities(v, self.hbar, self.allow_pinch)

    def with_hbar(self, hbar: float) -> "Rapidities":
        return Rapidities(self.values, hbar, self.allow_pinch)

    def replace(self, site: int, value: complex, allow_pinch=None) -> "Rapidities":
        v = list(self.values)
        v[site - 1] = value
        ap = self.allow_pinch if allow_pinch is None else allow_pinch
        return Rapidities(tuple(v), self.hbar, ap)


@dataclass(frozen=True)
class ChargeSector:
    n_sites: int
    charge: int

    def __post_init__(self):
        if self.n_sites < 0:
            raise ValueError("n_sites must be >= 0")
        if abs(self.charge) > self.n_sites or (self.n_sites - self.charge) % 2:
            raise ValueError(f"charge {self.charge} impossible for N={self.n_sites}")

    @classmethod
    def from_magnons(cls, n_sites: int, magnons: int) -> "ChargeSector":
        return cls(n_sites, n_sites - 2 * magnons)

    @property
    def magnon_count(self) -> int:
        return (self.n_sites - self.charge) // 2

    @property
    def dimension(self) -> int:
        return math.comb(self.n_sites, self.magnon_count)

    def indices(self) -> np.ndarray:
        return sector_indices(self.n_sites, self.magnon_count)


def _check_bond(k, n):
    if not 1 <= k <= n - 1:
        raise IndexRangeError(f"bond index k={k} outside 1..{n - 1}")


def popcounts(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    return np.array([bin(i).count("1") for i in idx]) if n else np.zeros(1, int)


def sector_indices(n: int, magnons: int) -> np.ndarray:
    return np.flatnonzero(popcounts(n) == magnons)


def charges(n: int) -> np.ndarray:
    """Charge e = Σ ε_j of every basis index."""
    return n - 2 * popcounts(n)


def omega(n: int) -> np.ndarray:
    """The all-+ reference vector Ω."""
    v = np.zeros(2 ** n, dtype=complex)
    v[0] = 1.0
    return v


def basis_index(signs: Sequence[int]) -> int:
    """Integer index of the basis state with ε_j = signs[j-1] (±1)."""
    return sum(1 << j for j, s in enumerate(signs) if s < 0)


def _guard(x, hbar, what, pole_eps=POLE_EPS):
    if abs(x) < pole_eps * hbar:
        raise PoleProximityError(f"{what}: |{x}| below pole epsilon")


def r_matrix_block(theta, hbar, normalized=False, cfg=None, pole_eps=POLE_EPS):
    """4×4 rational R-matrix block pref·(θ·1 − iħ·P).

    With ``normalized=True`` the scalar r(θ) (from :mod:`scalar_factors`)
    multiplies the prefactor; ``cfg`` then supplies the quadrature setup.
    """
    theta = complex(theta)
    _guard(theta - 1j * hbar, hbar, "R-matrix prefactor pole", pole_eps)
    pref = 1.0 / (theta - 1j * hbar)
    if normalized:
        from .scalar_factors import ScalarFactorConfig, r_scalar
        cfg = cfg or ScalarFactorConfig(hbar)
        if cfg.hbar != hbar:
            raise ValueError("cfg.hbar differs from hbar")
        pref *= r_scalar(theta, cfg)
    return pref * (theta * np.eye(4) - 1j * hbar * PERM)


def _check_vec(v, n):
    v = np.asarray(v, dtype=complex)
    if v.shape != (2 ** n,):
        raise DimensionError(f"vector of shape {v.shape} on {n} sites")
    return v


def _blocks(args, hbar, normalized, cfg, pole_eps):
    return [r_matrix_block(x, hbar, normalized, cfg, pole_eps).reshape(2, 2, 2, 2)
            for x in args]


def _sweep(blocks, v, a):
    """Z[c] = (R_1⋯R_N)[a, c] v, accumulated site by site."""
    n = len(blocks)
    z = np.zeros((2,) + v.shape, dtype=complex)
    z[a] = v
    for j, rb in enumerate(blocks):
        zt = z.reshape(2, 2 ** (n - j - 1), 2, 2 ** j)
        # rb indices: (aux_row, site_row, aux_col, site_col)
        z = np.einsum("csdt,chtl->dhsl", rb, zt).reshape(2, -1)
    return z


def _transfer_args(theta0, rap, normalized, pole_eps):
    args = [th - theta0 for th in rap.values]
    if normalized:
        for x in args:
            _guard(x, rap.hbar, "theta0 coincides with a rapidity", pole_eps)
    return args


def apply_transfer(theta0, rap: Rapidities, v, normalized=False, cfg=None,
                   pole_eps=POLE_EPS):
    """Matrix-free 𝒯(θ₀|θ)v in O(N·2^N) operations."""
    v = _check_vec(v, rap.n)
    blocks = _blocks(_transfer_args(theta0, rap, normalized, pole_eps),
                     rap.hbar, normalized, cfg, pole_eps)
    out = np.zeros_like(v)
    for a in range(2):
        out += GAMMA[a, a] * _sweep(blocks, v, a)[a]
    return out


def monodromy_blocks(theta0, rap: Rapidities, normalized=False, cfg=None,
                     pole_eps=POLE_EPS):
    """Dense monodromy entries M[a][b] (each 2^N×2^N) by Kronecker accumulation."""
    n = rap.n
    if n > DENSE_CAP:
        raise SizeCapError(f"N={n} exceeds dense cap {DENSE_CAP}")
    blocks = _blocks(_transfer_args(theta0, rap, normalized, pole_eps),
                     rap.hbar, normalized, cfg, pole_eps)
    m = [[np.eye(1, dtype=complex) * (a == b) for b in range(2)] for a in range(2)]
    for rb in blocks:
        # site j sits above the sites already accumulated
        m = [[sum(np.kron(rb[c, :, d, :], m[a][c]) for c in range(2)) for d in range(2)]
             for a in range(2)]
    return m


def dense_transfer(theta0, rap: Rapidities, normalized=False, cfg=None,
                   pole_eps=POLE_EPS):
    """Explicit 2^N×2^N transfer matrix (test oracle, N ≤ DENSE_CAP)."""
    m = monodromy_blocks(theta0, rap, normalized, cfg, pole_eps)
    return GAMMA[0, 0] * m[0][0] + GAMMA[1, 1] * m[1][1]


def apply_B(t, rap: Rapidities, v, pole_eps=POLE_EPS):
    """B(t|θ)v: Γ_− times the (aux out +, aux in −) monodromy entry at θ₀ = t."""
    v = _check_vec(v, rap.n)
    blocks = _blocks([th - t for th in rap.values], rap.hbar, False, None, pole_eps)
    return GAMMA[1, 1] * _sweep(blocks, v, 0)[1]


def b_norm_bound(t, rap: Rapidities) -> float:
    """Upper bound on the operator norm of B(t) (product of block norms)."""
    return float(np.prod([np.linalg.norm(r_matrix_block(th - t, rap.hbar), 2)
                          for th in rap.values]))


def exchange_operator(x, hbar, normalized=False, cfg=None, pole_eps=POLE_EPS):
    """4×4 block of L = P·R(x); it is the identity at x = 0."""
    return PERM @ r_matrix_block(x, hbar, normalized, cfg, pole_eps)


def apply_two_site(op4, k, n, v):
    """Apply a 4×4 operator on sites (k+1, k); op basis is 2*a_{k+1} + a_k."""
    _check_bond(k, n)
    v = _check_vec(v, n)
    vt = v.reshape(2 ** (n - k - 1), 2, 2, 2 ** (k - 1))
    out = np.einsum("stuv,huvl->hstl", op4.reshape(2, 2, 2, 2), vt)
    return out.reshape(-1)


def apply_L(k, rap: Rapidities, v, normalized=False, cfg=None, pole_eps=POLE_EPS):
    """Exchange operator L_k(θ_{k+1,k}) acting on sites k, k+1."""
    _check_bond(k, rap.n)
    op = exchange_operator(rap.diff(k + 1, k), rap.hbar, normalized, cfg, pole_eps)
    return apply_two_site(op, k, rap.n, v)


def charge_of(v, tol=CHARGE_TOL):
    """Charge e of a sector-homogeneous vector, or ``"mixed"``."""
    v = np.asarray(v, dtype=complex)
    n = int(round(math.log2(v.size)))
    if 2 ** n != v.size:
        raise DimensionError(f"length {v.size} is not a power of two")
    total = np.linalg.norm(v)
    if total == 0:
        raise ZeroVectorError("charge of the zero vector")
    e = charges(n)
    weights = {int(c): np.linalg.norm(v[e == c]) for c in np.unique(e)}
    best = max(weights, key=weights.get)
    rest = math.sqrt(sum(w * w for c, w in weights.items() if c != best))
    return best if rest <= tol * total else "mixed"


def site_operator(op2, site, n):
    """Dense embedding of a 2×2 operator acting on one site."""
    return np.kron(np.kron(np.eye(2 ** (n - site)), op2), np.eye(2 ** (site - 1)))


def gamma_site(site, n):
    return site_operator(GAMMA, site, n)


def total_gamma(n):
    return sum(gamma_site(j, n) for j in range(1, n + 1))


def perm_sites(j, l, n):
    """Dense permutation of the factors at sites j and l."""
    dim = 2 ** n
    idx = np.arange(dim)
    bj, bl = (idx >> (j - 1)) & 1, (idx >> (l - 1)) & 1
    swapped = idx ^ ((bj ^ bl) << (j - 1)) ^ ((bj ^ bl) << (l - 1))
    p = np.zeros((dim, dim))
    p[swapped, idx] = 1.0
    return p
