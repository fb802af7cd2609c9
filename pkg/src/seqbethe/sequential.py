"""Pinching θ_{k+1} → θ_k ± iħ: sequential roots, Z(θ), eigenvalue
compatibility and residue relations.

Along a pinch path θ_{k+1} = θ_k + s·iħ + δ (s = ±1) a sequential root
tuple has one root t_Λ → θ_k + s·iħ/2 linearly in δ, t_Λ ≈ θ_k + s·iħ/2 + δ/Z,
while the other roots tend to roots of the system with sites k, k+1
removed.  Expanding the Λ-th Bethe equation to leading order in δ gives

    s = +1:  Z = 1 + H/G,
             G = ∏_{j≠k,k+1} (θ_j − θ_k − iħ)/(θ_j − θ_k),
             H = −∏_β (t_β − θ_k − 3iħ/2)/(t_β − θ_k + iħ/2),
    s = −1:  Z = 1 + G/H,
             G = ∏_{j≠k,k+1} (θ_j − θ_k)/(θ_j − θ_k + iħ),
             H = −∏_β (t_β − θ_k − iħ/2)/(t_β − θ_k + 3iħ/2),

with t_β the reduced roots.  For N = 2 (no other sites, no reduced roots)
Z = 0: the root approaches the pinch point like √δ instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor_core as tc
from .bae import (
    NEWTON_TOL,
    BetheRoots,
    _newton,
    bae_residual_norm,
    eval_tau,
    symmetrized_f,
    track_parameter,
)
from .errors import DegenerateError, ExtrapolationError, NonSequentialError, PathFailureError
from .tensor_core import Rapidities

DEFAULT_DELTAS = (1e-2, 1e-3, 1e-4, 1e-5)   # multiples of ħ
NONSEQ_THRESHOLD = 1e-3                     # multiples of ħ

# C_{a b} on (a_{k+1}, a_k), index 0 = +, 1 = −
C_TENSOR = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class PinchPath:
    base: Rapidities
    k: int
    sign: int = 1
    deltas: tuple = ()

    def __post_init__(self):
        tc._check_bond(self.k, self.base.n)
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        d = tuple(float(x) for x in (self.deltas or
                                     tuple(f * self.base.hbar for f in DEFAULT_DELTAS)))
        if any(x <= 0 for x in d) or any(a <= b for a, b in zip(d, d[1:])):
            raise ValueError("deltas must be positive and strictly decreasing")
        object.__setattr__(self, "deltas", d)

    @property
    def target(self) -> complex:
        """Pinch point θ_k + s·iħ/2 of the locking root."""
        return self.base.values[self.k - 1] + 0.5j * self.sign * self.base.hbar

    def rap_at(self, delta) -> Rapidities:
        th_k = self.base.values[self.k - 1]
        return self.base.replace(self.k + 1, th_k + 1j * self.sign * self.base.hbar + delta,
                                 allow_pinch=True)

    def pinched(self) -> Rapidities:
        return self.rap_at(0.0)

    def reduced(self) -> Rapidities:
        return Rapidities(self.base.reduced(self.k).values, self.base.hbar)


@dataclass
class SequentialFamily:
    roots_N: BetheRoots
    roots_reduced: BetheRoots
    pinch: PinchPath
    z_estimate: complex
    path: list = field(default_factory=list)       # (δ, roots tuple) at every δ_m
    locking_index: int = -1
    t_lambda_limit: complex = 0j
    miss: float = 0.0                              # |t_Λ(0) − pinch point| / ħ
    convergence_slope: float = float("nan")
    reduced_residual_extrapolated: float = float("nan")
    reduced_residual: float = float("nan")
    polish_shift: float = float("nan")


def neville(xs, ys, x0=0.0):
    """Value at x0 of the interpolating polynomial through (xs, ys).

    ``ys`` may hold arrays (extrapolated componentwise).
    """
    xs = [float(x) for x in xs]
    p = [np.asarray(y, dtype=complex) for y in ys]
    n = len(xs)
    for m in range(1, n):
        p = [((x0 - xs[i + m]) * p[i] + (xs[i] - x0) * p[i + 1]) / (xs[i] - xs[i + m])
             for i in range(n - m)]
    return p[0]


def _fit_slope(xs, ys):
    lx, ly = np.log(np.asarray(xs)), np.log(np.asarray(ys))
    return float(np.polyfit(lx, ly, 1)[0])


def reduced_assignment(assignment, k, drop_index):
    """Classical assignment of the reduced system (sites renumbered)."""
    if assignment is None:
        return None
    out = []
    for i, j in enumerate(assignment):
        if i == drop_index:
            continue
        if j in (k, k + 1):
            return None
        out.append(j - 2 if j > k + 1 else j)
    return tuple(out)


def _polish(t, rap, max_iter=4):
    """Extra Newton steps down to roundoff: near the pinch the Jacobian
    conditioning grows like 1/δ, so a 1e-12 residual is not enough."""
    tp, _, res, _, _ = _newton(t, rap, tol=0.0, max_iter=max_iter)
    return tp if res <= bae_residual_norm(t, rap) else t


def track_pinch(roots: BetheRoots, pinch: PinchPath, tol=NEWTON_TOL,
                substeps=6, nonseq_threshold=NONSEQ_THRESHOLD) -> SequentialFamily:
    """Follow an on-shell tuple along the pinch path and extrapolate δ → 0.

    ``roots`` must be on shell at the first path point ``pinch.deltas[0]``.

    Raises:
        NonSequentialError: the locking root misses θ_k ± iħ/2 by more than
            ``nonseq_threshold``·ħ (the partially built family is attached).
        PathFailureError: continuation failed.
    """
    h = pinch.base.hbar
    ds = pinch.deltas
    t = roots.arr
    if t.size == 0:
        raise NonSequentialError("no roots to lock onto the pinch point", miss=np.inf)
    res0 = bae_residual_norm(t, pinch.rap_at(ds[0]))
    if res0 > 1e-8:
        raise PathFailureError(f"roots off shell at the first path point ({res0:.2e})")
    path = [(ds[0], tuple(t))]
    for a, b in zip(ds, ds[1:]):
        n = max(2, int(round(substeps * math.log10(a / b))))
        t, _, _ = track_parameter(t, pinch.rap_at, a, b, steps=n, tol=tol)
        t = _polish(t, pinch.rap_at(b))
        path.append((b, tuple(t)))
    final = np.array(path[-1][1])
    target = pinch.target
    lock = int(np.argmin(np.abs(final - target)))
    dvals = np.array([d for d, _ in path])
    tl = np.array([r[lock] for _, r in path])
    # linear fit on the two smallest δ
    slope = (tl[-2] - tl[-1]) / (dvals[-2] - dvals[-1])
    t0 = tl[-1] - slope * dvals[-1]
    miss = abs(t0 - target) / h
    dist = np.abs(tl - target)
    conv = _fit_slope(dvals, dist) if np.all(dist > 0) else float("nan")
    z = 1.0 / slope if slope != 0 else complex("inf")
    others = [i for i in range(len(final)) if i != lock]
    red_rap = pinch.reduced()
    m = min(3, len(path))
    ext = neville(dvals[-m:], [np.array(r)[others] for _, r in path[-m:]]) if others else np.zeros(0)
    res_ext = bae_residual_norm(ext, red_rap)
    pol, _, res_pol, ok, _ = _newton(ext, red_rap, tol)
    red_assign = reduced_assignment(roots.assignment, pinch.k, lock)
    fam = SequentialFamily(
        roots_N=roots,
        roots_reduced=BetheRoots.make(pol, red_rap.n, red_assign),
        pinch=pinch, z_estimate=complex(z), path=path, locking_index=lock,
        t_lambda_limit=complex(t0), miss=float(miss), convergence_slope=conv,
        reduced_residual_extrapolated=res_ext, reduced_residual=res_pol,
        polish_shift=float(np.max(np.abs(pol - ext))) if others else 0.0)
    if miss > nonseq_threshold:
        raise NonSequentialError(
            f"locking root misses the pinch point by {miss:.3g} hbar", miss=miss, family=fam)
    if not ok:
        raise PathFailureError("reduced roots did not polish to an on-shell tuple")
    return fam


def z_linear_solve(roots_reduced, base: Rapidities, k: int, sign: int = 1) -> complex:
    """First-order coefficient Z(θ) of the locking root (see module docs)."""
    tc._check_bond(k, base.n)
    h = base.hbar
    th_k = base.values[k - 1]
    others = np.array([x for j, x in enumerate(base.values, 1) if j not in (k, k + 1)])
    t = roots_reduced.arr if isinstance(roots_reduced, BetheRoots) else np.asarray(roots_reduced)
    if sign == 1:
        g = np.prod((others - th_k - 1j * h) / (others - th_k))
        hh = -np.prod((t - th_k - 1.5j * h) / (t - th_k + 0.5j * h))
        z = 1 + hh / g
        bad = abs(g)
    else:
        g = np.prod((others - th_k) / (others - th_k + 1j * h))
        hh = -np.prod((t - th_k - 0.5j * h) / (t - th_k + 1.5j * h))
        z = 1 + g / hh
        bad = abs(hh)
    if bad < 1e-300 or not np.isfinite(z) or abs(z) < 1e-8:
        raise DegenerateError(f"degenerate first-order coefficient (Z = {z})")
    return complex(z)


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def extended_path(family: SequentialFamily, extra_decades=2, substeps=6, tol=NEWTON_TOL) -> list:
    """The family path continued ``extra_decades`` further towards δ = 0.

    The δ-expansion of the pinched quantities can have a small radius
    (~1e-2·ħ), so extrapolating from the default schedule leaves a cubic
    truncation error of order 1e-7; the extra decades push it to roundoff.
    """
    path = list(family.path)
    pinch = family.pinch
    t = np.array(path[-1][1])
    for _ in range(extra_decades):
        a = path[-1][0]
        t, _, _ = track_parameter(t, pinch.rap_at, a, a / 10, steps=substeps, tol=tol)
        t = _polish(t, pinch.rap_at(a / 10))
        path.append((a / 10, tuple(t)))
    return path


def check_tau_compat(family: SequentialFamily, theta0_samples, normalized=True,
                     cfg=None, tol=1e-7, extra_decades=2) -> dict:
    """Pinched τ (extrapolated in δ) vs τ of the reduced system.

    Only the normalized eigenvalue reduces exactly; the unnormalized one
    picks up the factor (θ₀ − θ_k − iħ)/(θ₀ − θ_k) at a + pinch.
    """
    pinch = family.pinch
    red = pinch.reduced()
    if normalized:
        cfg = _cfg_for(cfg, red.hbar)
    path = extended_path(family, extra_decades)
    m = min(3, len(path))
    rows = []
    for z0 in theta0_samples:
        vals = [eval_tau(z0, r, pinch.rap_at(d), normalized, cfg) for d, r in path[-m:]]
        pinched = complex(neville([d for d, _ in path[-m:]], vals))
        reduced = eval_tau(z0, family.roots_reduced, red, normalized, cfg)
        rows.append({"theta0": complex(z0), "pinched": pinched, "reduced": reduced,
                     "rel_dev": _rel(pinched, reduced)})
    worst = max((r["rel_dev"] for r in rows), default=0.0)
    return {"max_rel_dev": worst, "tolerance": tol, "pass": worst < tol, "samples": rows}


def _cfg_for(cfg, hbar):
    from .scalar_factors import ScalarFactorConfig
    return cfg or ScalarFactorConfig(hbar)


def _reduced_index_map(n, k):
    """For every N-site index A: (a_{k+1}, a_k) bits and the index of p_k A."""
    idx = np.arange(2 ** n)
    ak = (idx >> (k - 1)) & 1
    ak1 = (idx >> k) & 1
    low = idx & ((1 << (k - 1)) - 1)
    high = idx >> (k + 1)
    return ak1, ak, (high << (k - 1)) | low


def _pole_order(ds, norms):
    s = _fit_slope(ds[-2:], norms[-2:])
    p = int(round(-s))
    if p < 1 or abs(-s - p) > 0.2:
        raise ExtrapolationError(f"no clean pole: log-log slope {s:.3f}")
    return p


def proportionality(lhs, rhs, support_tol=1e-8, ratio_tol=1e-6) -> dict:
    """Support match and componentwise ratio constancy of lhs ∝ rhs."""
    lhs, rhs = np.asarray(lhs), np.asarray(rhs)
    nl, nr = np.linalg.norm(lhs), np.linalg.norm(rhs)
    if nr == 0 or nl == 0:
        raise ExtrapolationError("vanishing side in proportionality test")
    off = np.abs(rhs) <= 1e-12 * np.max(np.abs(rhs))
    support = float(np.max(np.abs(lhs[off])) / nl) if off.any() else 0.0
    on = ~off
    c = complex(np.vdot(rhs, lhs) / np.vdot(rhs, rhs))
    ratio = float(np.max(np.abs(lhs[on] / rhs[on] - c)) / abs(c))
    return {"ratio": c, "support_dev": support, "ratio_dev": ratio,
            "support_tolerance": support_tol, "ratio_tolerance": ratio_tol,
            "n_components": int(on.sum()),
            "pass": support <= support_tol and ratio <= ratio_tol}


def residue_check(family: SequentialFamily, cfg, support_tol=1e-8, ratio_tol=1e-6) -> dict:
    """Leading pole coefficient of f at the pinch vs the reduced solution.

    Sign +: lim δ^p f_A  ∝  τ(θ_k|p_kθ) C_{a_{k+1}a_k} f_{p_kA}(p_kθ).
    Sign −: lim δ^p C^{a_{k+1}a_k} f_A  ∝  τ(θ_k − iħ|p_kθ) f_{p_kA}(p_kθ).
    With φ ≡ 1 the pole order p is measured (log-log slope of ‖f‖) and the
    coefficient of δ^{−p} is extracted by polynomial extrapolation of δ^p f.
    """
    pinch = family.pinch
    n, k, h = pinch.base.n, pinch.k, pinch.base.hbar
    ds = np.array([d for d, _ in family.path])
    fs = [symmetrized_f(r, pinch.rap_at(d), cfg) for d, r in family.path]
    norms = np.array([np.linalg.norm(f) for f in fs])
    p = _pole_order(ds, norms)
    m = min(3, len(ds))
    lead = neville(ds[-m:], [d ** p * f for d, f in zip(ds[-m:], fs[-m:])])
    red = pinch.reduced()
    f_red = symmetrized_f(family.roots_reduced, red, cfg)
    th_k = pinch.base.values[k - 1]
    ak1, ak, red_idx = _reduced_index_map(n, k)
    if pinch.sign == 1:
        tau = eval_tau(th_k, family.roots_reduced, red)
        rhs = tau * C_TENSOR[ak1, ak] * f_red[red_idx]
        lhs = lead
    else:
        tau = eval_tau(th_k - 1j * h, family.roots_reduced, red)
        lhs = np.zeros(2 ** (n - 2), dtype=complex)
        np.add.at(lhs, red_idx, C_TENSOR[ak1, ak] * lead)
        rhs = tau * f_red
    out = proportionality(lhs, rhs, support_tol, ratio_tol)
    out.update({"pole_order": p, "tau_reduced": tau, "sign": pinch.sign, "k": k,
                "n_sites": n})
    return out


@dataclass
class FamilyAttempt:
    assignment: tuple
    status: str                 # "sequential", "degenerate", "non_sequential", "failed"
    family: SequentialFamily | None = None
    message: str = ""


def _classify_miss(fam):
    """"degenerate" for a √δ approach to the pinch point (double root), else
    "non_sequential"."""
    if fam is None or not fam.path:
        return "non_sequential"
    d, roots = fam.path[-1]
    dist = abs(roots[fam.locking_index] - fam.pinch.target) / fam.pinch.base.hbar
    if 0.4 < fam.convergence_slope < 0.6 and dist < 10 * math.sqrt(d / fam.pinch.base.hbar):
        return "degenerate"
    return "non_sequential"


def find_families(base: Rapidities, k: int, sign: int, magnons: int, deltas=(),
                  assignments_=None, steps=20, stop_after=None) -> list:
    """Assignment-seeded homotopy at the first path point, then track_pinch."""
    from .bae import assignments, hbar_homotopy
    from .errors import NumericalError
    pinch = PinchPath(base, k, sign, deltas)
    start = pinch.rap_at(pinch.deltas[0])
    out = []
    for a in assignments_ or assignments(base.n, magnons):
        try:
            rep = hbar_homotopy(a, start, steps=steps)
            fam = track_pinch(rep.roots, pinch)
            out.append(FamilyAttempt(tuple(a), "sequential", fam))
        except NonSequentialError as e:
            out.append(FamilyAttempt(tuple(a), _classify_miss(e.family), e.family, str(e)))
        except NumericalError as e:
            out.append(FamilyAttempt(tuple(a), "failed", None, f"{type(e).__name__}: {e}"))
        if stop_after and sum(x.status == "sequential" for x in out) >= stop_after:
            break
    return out
