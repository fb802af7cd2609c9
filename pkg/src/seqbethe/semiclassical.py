"""Small-ħ structure: operator expansion of 𝒯, classical eigenvectors and
eigenvalues, root scaling, the classical limit of f and its residue relation.

Conventions.  Operators are the coefficients of iħ and (iħ)² in
𝒯(θ₀|θ) = iħ·O₁ + (iħ)²·O₂ + O(ħ³); eigenvalue coefficients are those of
ħ and ħ².  With R(x) = (x − iħP)/(x − iħ) one finds

    O₁ = Σ_k Γ_k/θ₀k,
    O₂ (unnormalized) = −Σ_k Γ_k/θ₀k² + Σ_{j<l} (P_jl Γ_j − Γ_j − Γ_l)/(θ₀j θ₀l),
    O₂ (normalized)   = −Σ_k Γ_k/(2θ₀k²) + Σ_k H_k/θ₀k,
    H_k = Σ_{l≠k} sgn(l−k) P_kl (Γ_k − Γ_l)/(2θ_kl),

the normalized R carrying r(x) ≈ 1 − iħ/(2x).  On a classical vector
(one nonzero component ε) the P-terms have no diagonal part, so the
normalized eigenvalue is −ħΣε_k/θ₀k + iħ²·½Σε_k/θ₀k² + O(ħ³).

``variant="literal"`` gives the alternative commuting family
H_k = Σ_{l≠k} (P_kl − ½)(Γ_k + Γ_l)/θ_kl, which is diagonal, and the
eigenvalue with the extra term −iħ² Σ_{k≠l, ε_k=ε_l} ε_k/(θ₀k θ_kl) that
it induces.  It does not reproduce the expansion of 𝒯 and is kept for
comparison only.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .bae import eval_tau, hbar_homotopy, track_parameter
from .errors import CoincidentRapidityError, DegenerateError
from .sequential import C_TENSOR, _reduced_index_map, find_families, neville
from .tensor_core import Rapidities

VARIANTS = ("derived", "literal")
NORMALIZATIONS = ("unit", "pinching")


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")


@dataclass(frozen=True)
class SignPattern:
    epsilon: tuple

    def __post_init__(self):
        eps = tuple(int(e) for e in self.epsilon)
        if any(e not in (1, -1) for e in eps):
            raise ValueError("pattern entries must be +1 or -1")
        object.__setattr__(self, "epsilon", eps)

    @classmethod
    def from_assignment(cls, n, assignment):
        """ε_k = −1 iff k carries a root."""
        occ = set(assignment)
        if len(occ) != len(tuple(assignment)) or any(not 1 <= j <= n for j in occ):
            raise ValueError(f"bad assignment {assignment} for N={n}")
        return cls(tuple(-1 if k in occ else 1 for k in range(1, n + 1)))

    @property
    def n(self):
        return len(self.epsilon)

    @property
    def charge(self):
        return sum(self.epsilon)

    @property
    def index(self):
        return tc.basis_index(self.epsilon)

    def reduced(self, k):
        return SignPattern(self.epsilon[:k - 1] + self.epsilon[k + 1:])


def _check_distinct(rap: Rapidities):
    th = rap.values
    for a, b in itertools.combinations(range(len(th)), 2):
        if th[a] == th[b]:
            raise CoincidentRapidityError(f"theta_{a + 1} = theta_{b + 1}")


# ---------------------------------------------------------------------------
# operators

def hamiltonians(rap: Rapidities, variant="derived") -> list:
    """Dense H_1..H_N (see module docstring)."""
    _check_variant(variant)
    n = rap.n
    if n > tc.DENSE_CAP:
        raise tc.SizeCapError(f"N={n} exceeds dense cap {tc.DENSE_CAP}")
    _check_distinct(rap)
    g = [tc.gamma_site(j, n) for j in range(1, n + 1)]
    dim = 2 ** n
    out = []
    for k in range(1, n + 1):
        hk = np.zeros((dim, dim), dtype=complex)
        for l in range(1, n + 1):
            if l == k:
                continue
            p = tc.perm_sites(k, l, n)
            if variant == "derived":
                hk += np.sign(l - k) * p @ (g[k - 1] - g[l - 1]) / (2 * rap.diff(k, l))
            else:
                hk += (p - 0.5 * np.eye(dim)) @ (g[k - 1] + g[l - 1]) / rap.diff(k, l)
        out.append(hk)
    return out


def expand_transfer_ops(rap: Rapidities, theta0, variant="derived", normalized=True):
    """(O₁, O₂): coefficients of iħ and (iħ)² in the dense transfer matrix."""
    _check_variant(variant)
    n = rap.n
    if n > tc.DENSE_CAP:
        raise tc.SizeCapError(f"N={n} exceeds dense cap {tc.DENSE_CAP}")
    _check_distinct(rap)
    x = complex(theta0) - rap.arr           # θ₀k
    if np.any(x == 0):
        raise CoincidentRapidityError("theta0 coincides with a rapidity")
    g = [tc.gamma_site(j, n) for j in range(1, n + 1)]
    o1 = sum(gk / xk for gk, xk in zip(g, x))
    o2 = sum(-gk / (2 * xk ** 2) for gk, xk in zip(g, x))
    o2 = o2 + sum(hk / xk for hk, xk in zip(hamiltonians(rap, variant), x))
    if not normalized:
        o2 = o2 - 0.5 * np.sum(1 / x) * o1
    return o1, o2


def commutator_norms(rap: Rapidities, variant="derived") -> dict:
    """Max entries of [H_k,H_l], [H_k,Γ_l], [Γ_k,Γ_l] over all k, l."""
    hs = hamiltonians(rap, variant)
    gs = [tc.gamma_site(j, rap.n) for j in range(1, rap.n + 1)]

    def worst(xs, ys):
        return max((float(np.max(np.abs(a @ b - b @ a))) for a in xs for b in ys), default=0.0)

    return {"HH": worst(hs, hs), "HG": worst(hs, gs), "GG": worst(gs, gs)}


def richardson(fn, h, levels=3):
    """Limit h → 0 of fn from the steps h, h/2, ..., h/2^(levels−1)."""
    hs = [h / 2 ** i for i in range(levels)]
    return neville(hs, [fn(x) for x in hs])


def verify_expansion(rap: Rapidities, theta0, hbar=1e-3, variant="derived",
                     normalized=True, cfg_factory=None) -> dict:
    """Compare O₁, O₂ with Richardson-extrapolated divided transfer matrices."""
    o1, o2 = expand_transfer_ops(rap, theta0, variant, normalized)

    def tmat(h):
        cfg = cfg_factory(h) if cfg_factory else None
        return tc.dense_transfer(theta0, rap.with_hbar(h), normalized, cfg)

    mats = {}

    def cached(h):
        if h not in mats:
            mats[h] = tmat(h)
        return mats[h]

    e1 = richardson(lambda h: cached(h) / (1j * h), hbar)
    e2 = richardson(lambda h: (cached(h) - 1j * h * o1) / (1j * h) ** 2, hbar)
    d1 = float(np.linalg.norm(e1 - o1) / np.linalg.norm(o1))
    d2 = float(np.linalg.norm(e2 - o2) / np.linalg.norm(o2))
    return {"order1_rel_dev": d1, "order2_rel_dev": d2, "hbar": hbar, "variant": variant,
            "normalized": normalized}


def leading_order_slope(rap: Rapidities, theta0, hbars=(1e-2, 1e-3, 1e-4),
                        normalized=False) -> float:
    """log-log slope of ‖𝒯‖ vs ħ (1 when there is no ħ⁰ term)."""
    norms = [np.linalg.norm(tc.dense_transfer(theta0, rap.with_hbar(h), normalized))
             for h in hbars]
    return float(np.polyfit(np.log(hbars), np.log(norms), 1)[0])


# ---------------------------------------------------------------------------
# classical eigenvectors and eigenvalues

def classical_vector(pattern: SignPattern) -> np.ndarray:
    v = np.zeros(2 ** pattern.n, dtype=complex)
    v[pattern.index] = 1.0
    return v


def tau_semiclassical(theta0, pattern: SignPattern, rap: Rapidities, variant="derived",
                      normalized=True):
    """(coefficient of ħ, coefficient of ħ²) of the eigenvalue on ``pattern``."""
    _check_variant(variant)
    if pattern.n != rap.n:
        raise ValueError("pattern length differs from N")
    _check_distinct(rap)
    eps = np.array(pattern.epsilon, dtype=float)
    x = complex(theta0) - rap.arr
    if np.any(x == 0):
        raise CoincidentRapidityError("theta0 coincides with a rapidity")
    o1 = complex(-np.sum(eps / x))
    o2 = 0.5j * np.sum(eps / x ** 2)
    if variant == "literal":
        pair = sum(eps[k] / (x[k] * rap.diff(k + 1, l + 1))
                   for k in range(rap.n) for l in range(rap.n)
                   if k != l and eps[k] == eps[l])
        o2 -= 1j * pair
    if not normalized:
        o2 -= 0.5j * np.sum(1 / x) * o1
    return o1, complex(o2)


def eigen_expansion_slope(theta0, assignment, rap: Rapidities, hbars=(1e-2, 3e-3, 1e-3),
                          variant="derived", normalized=True) -> dict:
    """Residual |τ − ħ·o₁ − ħ²·o₂| on homotopy roots and its log-log slope."""
    pattern = SignPattern.from_assignment(rap.n, assignment)
    o1, o2 = tau_semiclassical(theta0, pattern, rap, variant, normalized)
    rows = []
    for h in hbars:
        r = rap.with_hbar(h)
        roots = hbar_homotopy(assignment, r).roots
        tau = eval_tau(theta0, roots, r, normalized)
        rows.append((h, abs(tau - h * o1 - h * h * o2), abs(tau)))
    hs, res = np.array([r[0] for r in rows]), np.array([r[1] for r in rows])
    slope = float(np.polyfit(np.log(hs), np.log(res), 1)[0]) if np.all(res > 0) else float("inf")
    return {"slope": slope, "rows": rows, "order1": o1, "order2": o2}


def root_scaling(assignment, rap: Rapidities, hbars=(1e-1, 1e-2, 1e-3)) -> dict:
    """Slopes of log|t_α − θ_{j(α)}| vs log ħ, per root."""
    dist = []
    for h in hbars:
        t = hbar_homotopy(assignment, rap.with_hbar(h)).roots.arr
        dist.append([abs(t[a] - rap.values[j - 1]) for a, j in enumerate(assignment)])
    dist = np.array(dist)
    lh = np.log(hbars)
    slopes = [float(np.polyfit(lh, np.log(dist[:, a]), 1)[0]) for a in range(len(assignment))]
    return {"slopes": slopes, "distances": dist.tolist(), "hbars": list(hbars)}


def region_ok(rap: Rapidities, factor=10.0, hbar=None) -> bool:
    """min_{k≠l} |Im θ_kl| ≥ factor·ħ."""
    h = rap.hbar if hbar is None else hbar
    im = np.imag(rap.arr)
    return all(abs(a - b) >= factor * h for a, b in itertools.combinations(im, 2))


# ---------------------------------------------------------------------------
# classical limit of f

@dataclass(frozen=True)
class ClassicalF:
    """f^cl = φ^cl · ∏_{k>l} θ_kl^{−2} on the single component ``pattern``.

    ``normalization="unit"``: φ^cl = 1, the limit of ħ^{−Λ}·f for φ ≡ 1.
    ``normalization="pinching"``: φ^cl = ∏_{k>l} θ_kl^{2(1+ε_kε_l)}, i.e.
    f^cl = ∏_{k>l} θ_kl^{2ε_kε_l}, the choice compatible with the classical
    residue relation.  Both satisfy the classical exchange relation.
    """

    pattern: SignPattern
    rapidities: Rapidities
    normalization: str = "unit"

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if self.pattern.n != self.rapidities.n:
            raise ValueError("pattern length differs from N")
        _check_distinct(self.rapidities)

    @property
    def prefactor(self) -> complex:
        r = self.rapidities
        return complex(np.prod([r.diff(k, l) ** -2 for k in range(2, r.n + 1)
                                for l in range(1, k)]))

    @property
    def phi_cl(self) -> complex:
        if self.normalization == "unit":
            return 1.0 + 0j
        r, e = self.rapidities, self.pattern.epsilon
        return complex(np.prod([r.diff(k, l) ** (2 * (1 + e[k - 1] * e[l - 1]))
                                for k in range(2, r.n + 1) for l in range(1, k)]))

    def component(self) -> complex:
        return self.phi_cl * self.prefactor

    def vector(self) -> np.ndarray:
        return self.component() * classical_vector(self.pattern)


def classical_f(pattern: SignPattern, rap: Rapidities, normalization="unit") -> ClassicalF:
    return ClassicalF(pattern, rap, normalization)


def _pinched_classical(pattern, rap, k, delta, normalization):
    r = rap.replace(k + 1, rap.values[k - 1] + delta, allow_pinch=True)
    return ClassicalF(pattern, r, normalization).vector()


def contour_residue(fn, radius, npts=64):
    """(1/2πi)∮ fn(δ) dδ over |δ| = radius (trapezoidal rule)."""
    z = radius * np.exp(2j * np.pi * np.arange(npts) / npts)
    return sum(fn(zz) * zz for zz in z) / npts


def classical_residue_check(pattern: SignPattern, rap: Rapidities, k: int,
                            normalization="pinching", radius=None, npts=64,
                            tol=1e-6) -> dict:
    """Res_{θ_{k+1}=θ_k} f^cl vs c₀·C_{ε_{k+1}ε_k}·f^cl(p_kθ)·Σ_{j≠k,k+1} ε_j/θ_kj.

    Each f^cl has a single component, while the right-hand side lives on
    both components of the antisymmetric pair (a_{k+1}, a_k) = (±, ∓).  The
    left-hand side is therefore the residue of f^cl_ε + f^cl_{σ_kε}, the
    pattern together with its partner with ε_k, ε_{k+1} exchanged (both
    have the same reduced pattern).  Residues come from a contour integral
    around δ = 0 with θ_{k+1} = θ_k + δ; c₀ is fitted.  For ε_{k+1} = ε_k the
    residue itself must vanish.
    """
    n = rap.n
    tc._check_bond(k, n)
    if pattern.n != n:
        raise ValueError("pattern length differs from N")
    th = rap.values
    eps = pattern.epsilon
    others = [j for j in range(1, n + 1) if j not in (k, k + 1)]
    if radius is None:
        gaps = [abs(th[j - 1] - th[k - 1]) for j in others]
        radius = 0.25 * min(gaps, default=1.0)

    def res_of(pat):
        return contour_residue(lambda d: _pinched_classical(pat, rap, k, d, normalization),
                               radius, npts)

    scale = abs(_pinched_classical(pattern, rap, k, radius, normalization)[pattern.index]) * radius
    base = {"normalization": normalization, "tolerance": tol, "k": k, "pattern": eps}
    if eps[k] == eps[k - 1]:
        dev = float(np.max(np.abs(res_of(pattern))) / scale)
        return {**base, "vanishing_case": True, "residue_rel": dev, "pass": dev < tol}
    partner = SignPattern(eps[:k - 1] + (eps[k], eps[k - 1]) + eps[k + 1:])
    lhs = res_of(pattern) + res_of(partner)
    red_rap = Rapidities(rap.reduced(k).values, rap.hbar)
    red_pat = pattern.reduced(k)
    f_red = ClassicalF(red_pat, red_rap, normalization).vector() if n > 2 else np.ones(1)
    last = sum(eps[j - 1] / rap.diff(k, j) for j in others)
    ak1, ak, red_idx = _reduced_index_map(n, k)
    rhs = C_TENSOR[ak1, ak] * f_red[red_idx] * last
    out = {**base, "vanishing_case": False, "last_factor": complex(last)}
    if n > 2:
        o1, _ = tau_semiclassical(th[k - 1], red_pat, red_rap)
        out["last_factor_vs_tau"] = float(abs(last + o1) / max(abs(last), 1e-300))
    if abs(last) == 0 or np.max(np.abs(rhs)) == 0:
        raise DegenerateError("right-hand side vanishes")
    c0 = complex(np.vdot(rhs, lhs) / np.vdot(rhs, rhs))
    shape = float(np.linalg.norm(lhs - c0 * rhs) / np.linalg.norm(lhs))
    out.update({"c0": c0, "shape_dev": shape, "n_support": int(np.count_nonzero(rhs)),
                "pass": shape < tol})
    return out


def f_classical_limit(assignment, rap: Rapidities, cfg_factory, hbars=(1e-3,)) -> list:
    """ħ^{−Λ}·f (φ ≡ 1) on homotopy roots, compared with the unit classical f.

    Returns per ħ the fitted overall constant and the relative deviation.
    """
    pattern = SignPattern.from_assignment(rap.n, assignment)
    from .bae import symmetrized_f
    ref = classical_f(pattern, rap).vector()
    out = []
    for h in hbars:
        r = rap.with_hbar(h)
        roots = hbar_homotopy(assignment, r).roots
        f = symmetrized_f(roots, r, cfg_factory(h)) / h ** len(assignment)
        c = complex(np.vdot(ref, f) / np.vdot(ref, ref))
        dev = float(np.linalg.norm(f - c * ref) / np.linalg.norm(f))
        out.append({"hbar": h, "constant": c, "rel_dev": dev})
    return out


# ---------------------------------------------------------------------------
# pinching vs the classical limit

def _nearest_assignment(t, rap: Rapidities):
    return tuple(int(np.argmin(np.abs(rap.arr - x))) + 1 for x in t)


def limit_commutativity(base: Rapidities, k: int, magnons: int, hbar_small: float,
                        sign=1, tol=1e-6, steps=20, small_deltas=None) -> dict:
    """Pinch-then-shrink-ħ vs shrink-ħ-then-pinch for the sequential families.

    Route A pinches at ``base.hbar`` and continues the reduced roots down
    to ``hbar_small``; route B pinches directly at ``hbar_small``.  Families
    are matched by the reduced classical assignment.  At small ħ the
    locking root reaches its linear regime only for δ ≪ ħ, hence the longer
    default δ schedule (ħ·10^{-2} … ħ·10^{-9}) of route B.
    """
    if small_deltas is None:
        small_deltas = tuple(hbar_small * 10.0 ** -m for m in range(2, 10))
    h1 = base.hbar
    route_a = []
    for att in find_families(base, k, sign, magnons):
        if att.status != "sequential":
            continue
        fam = att.family
        red = fam.pinch.reduced()
        t = fam.roots_reduced.arr
        if t.size:
            t, _, _ = track_parameter(t, red.with_hbar, h1, hbar_small, steps=steps)
        ra = tuple(sorted(_nearest_assignment(t, red)))
        order = np.argsort(_nearest_assignment(t, red)) if t.size else []
        route_a.append((ra, np.asarray(t)[order], att.assignment))
    route_b = {}
    for att in find_families(base.with_hbar(hbar_small), k, sign, magnons, small_deltas):
        if att.status != "sequential":
            continue
        fam = att.family
        red = fam.pinch.reduced()
        t = fam.roots_reduced.arr
        nearest = _nearest_assignment(t, red)
        rb = tuple(sorted(nearest))
        route_b[rb] = (np.asarray(t)[np.argsort(nearest)] if t.size else t, fam.roots_reduced.assignment)
    rows = []
    for ra, ta, a_full in route_a:
        if ra not in route_b:
            rows.append({"assignment": a_full, "reduced_assignment": ra, "matched": False,
                         "root_dev": float("inf"), "pass": False})
            continue
        tb, rb_label = route_b[ra]
        dev = float(np.max(np.abs(ta - tb))) if len(ta) else 0.0
        rows.append({"assignment": a_full, "reduced_assignment": ra, "matched": True,
                     "root_dev": dev, "pass": dev < tol})
    return {"rows": rows, "tolerance": tol, "hbar_large": h1, "hbar_small": hbar_small,
            "pass": any(r["pass"] for r in rows)}
