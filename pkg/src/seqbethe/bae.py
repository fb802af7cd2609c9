"""Bethe equations, root continuation, eigenvalues and Bethe vectors.

Root convention
---------------
Roots t_α are zeros of the pole-free polynomial system

    P_α(t) = ∏_j (θ_j − t_α − iħ/2) ∏_{β≠α} (t_β − t_α + iħ)
           + ∏_j (θ_j − t_α + iħ/2) ∏_{β≠α} (t_β − t_α − iħ).

With this parametrization the Bethe vector is w = ∏_α B(t_α − iħ/2) Ω and
its unnormalized eigenvalue is

    τ(θ₀) = i ∏_α (θ₀ − t_α − iħ/2)/(θ₀ − t_α + iħ/2)
          − i ∏_α (θ₀ − t_α + 3iħ/2)/(θ₀ − t_α + iħ/2) · ∏_j θ_{0j}/(θ_{0j} + iħ),

θ_{0j} = θ₀ − θ_j.  The apparent pole at θ₀ = t_α − iħ/2 cancels exactly
when the equations hold.  The normalized eigenvalue (R-matrices carrying
the scalar r) is ∏_j r(θ_{j0}) times the unnormalized one.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor_core as tc
from .errors import (
    ConvergenceError,
    OffShellError,
    PathFailureError,
    PoleProximityError,
    RootCollisionError,
    SingularJacobianError,
    ZeroVectorError,
)
from .tensor_core import ChargeSector, Rapidities

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
ONSHELL_TOL = 1e-8
COLLISION_EPS = 1e-8


@dataclass(frozen=True)
class BetheRoots:
    roots: tuple
    sector: ChargeSector
    assignment: tuple | None = None   # assignment[α] = site j(α), 1-based

    def __post_init__(self):
        object.__setattr__(self, "roots", tuple(complex(x) for x in self.roots))
        if len(self.roots) != self.sector.magnon_count:
            raise ValueError("number of roots differs from the sector's magnon count")
        if self.assignment is not None:
            a = tuple(int(j) for j in self.assignment)
            if len(set(a)) != len(a) or len(a) != len(self.roots):
                raise ValueError(f"assignment {a} is not injective / has wrong length")
            if any(not 1 <= j <= self.sector.n_sites for j in a):
                raise ValueError(f"assignment {a} out of range")
            object.__setattr__(self, "assignment", a)

    @property
    def arr(self) -> np.ndarray:
        return np.array(self.roots, dtype=complex)

    @classmethod
    def make(cls, roots, n_sites, assignment=None):
        return cls(tuple(roots), ChargeSector.from_magnons(n_sites, len(roots)), assignment)


@dataclass
class SolveReport:
    roots: BetheRoots
    residual_norm: float
    iterations: int
    homotopy_path: list = field(default_factory=list)
    eigenvalue_samples: list = field(default_factory=list)
    eigenvector_residual: float = float("nan")


# ---------------------------------------------------------------------------
# residual and Jacobian

def _terms(t, rap):
    t = np.asarray(t, dtype=complex)
    th, h = rap.arr, rap.hbar
    x = th[None, :] - t[:, None]
    d = t[None, :] - t[:, None]                   # d[α, β] = t_β − t_α
    np.fill_diagonal(d, np.nan)
    a1 = np.prod(x - 0.5j * h, axis=1)
    a2 = np.prod(x + 0.5j * h, axis=1)
    b1 = np.nanprod(d + 1j * h, axis=1) if t.size else np.ones(0)
    b2 = np.nanprod(d - 1j * h, axis=1) if t.size else np.ones(0)
    return a1 * b1, a2 * b2


def bae_residual(t, rap: Rapidities) -> np.ndarray:
    """Polynomial residuals P_α(t); all zero ⇔ the Bethe equations hold."""
    p1, p2 = _terms(t, rap)
    return p1 + p2


def bae_residual_norm(t, rap: Rapidities) -> float:
    """Scale-free residual max_α |P_α| / (|first term| + |second term|)."""
    if len(t) == 0:
        return 0.0
    p1, p2 = _terms(t, rap)
    den = np.abs(p1) + np.abs(p2)
    den[den == 0] = 1.0
    return float(np.max(np.abs(p1 + p2) / den))


def _leave_one_out(f):
    """out[α, i] = ∏_{k≠i} f[α, k] via prefix/suffix products (no division)."""
    ones = np.ones((f.shape[0], 1), dtype=complex)
    pre = np.cumprod(np.hstack([ones, f[:, :-1]]), axis=1)
    suf = np.cumprod(np.hstack([ones, f[:, :0:-1]]), axis=1)[:, ::-1]
    return pre * suf


def bae_jacobian(t, rap: Rapidities) -> np.ndarray:
    """Analytic ∂P_α/∂t_β."""
    t = np.asarray(t, dtype=complex)
    lam = t.size
    if lam == 0:
        return np.zeros((0, 0), dtype=complex)
    th, h = rap.arr, rap.hbar
    x = th[None, :] - t[:, None]
    f1, f2 = x - 0.5j * h, x + 0.5j * h
    d = t[None, :] - t[:, None]
    eye = np.eye(lam, dtype=bool)
    g1 = np.where(eye, 1.0, d + 1j * h)
    g2 = np.where(eye, 1.0, d - 1j * h)
    a1, a2 = f1.prod(axis=1), f2.prod(axis=1)
    b1, b2 = g1.prod(axis=1), g2.prod(axis=1)
    da1 = -_leave_one_out(f1).sum(axis=1)
    da2 = -_leave_one_out(f2).sum(axis=1)
    l1 = np.where(eye, 0.0, _leave_one_out(g1))
    l2 = np.where(eye, 0.0, _leave_one_out(g2))
    jac = a1[:, None] * l1 + a2[:, None] * l2
    jac[eye] = da1 * b1 - a1 * l1.sum(axis=1) + da2 * b2 - a2 * l2.sum(axis=1)
    return jac


# ---------------------------------------------------------------------------
# Newton

def _newton(t, rap, tol=NEWTON_TOL, max_iter=50):
    """Damped Newton; returns (t, iterations, residual_norm, converged, trace)."""
    t = np.array(t, dtype=complex)
    res = bae_residual_norm(t, rap)
    trace = [res]
    if t.size == 0:
        return t, 0, 0.0, True, trace
    for it in range(1, max_iter + 1):
        if res < tol:
            return t, it - 1, res, True, trace
        jac = bae_jacobian(t, rap)
        try:
            step = np.linalg.solve(jac, -bae_residual(t, rap))
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            raise SingularJacobianError(f"singular Jacobian at t={t}") from None
        if np.max(np.abs(step)) < 1e-14 * max(1.0, np.max(np.abs(t))) and res < 1e-6:
            # root located to machine precision; residual floor is roundoff
            return t + step, it, res, True, trace
        s = 1.0
        while s > 1e-4:
            tn = t + s * step
            rn = bae_residual_norm(tn, rap)
            if rn < res or rn < tol:
                break
            s *= 0.5
        else:
            trace.append(res)
            log.debug("newton: line search failed at iteration %d", it)
            return t, it, res, False, trace
        t, res = tn, rn
        trace.append(res)
        log.debug("newton it=%d res=%.3e step=%.3e damp=%g", it, res, np.max(np.abs(step)), s)
    return t, max_iter, res, res < tol, trace


def _check_collision(t, eps=COLLISION_EPS):
    for a, b in itertools.combinations(range(len(t)), 2):
        if abs(t[a] - t[b]) < eps * max(1.0, abs(t[a])):
            raise RootCollisionError(f"roots {a} and {b} collide: {t[a]} vs {t[b]}")


def newton_solve(seed, rap: Rapidities, tol=NEWTON_TOL, max_iter=50,
                 assignment=None) -> BetheRoots:
    """Damped Newton on the polynomial Bethe equations.

    Raises:
        ConvergenceError: residual not below ``tol`` (trace attached).
        SingularJacobianError, RootCollisionError.
    """
    t, _, res, ok, trace = _newton(seed, rap, tol, max_iter)
    if not ok:
        raise ConvergenceError(f"Newton did not converge (residual {res:.2e})", trace)
    _check_collision(t)
    return BetheRoots.make(t, rap.n, assignment)


# ---------------------------------------------------------------------------
# continuation

def _min_sep(t):
    if len(t) < 2:
        return np.inf
    return min(abs(a - b) for a, b in itertools.combinations(t, 2))


def track_parameter(t0, rap_at, p0, p1, steps=20, tol=NEWTON_TOL, geometric=True,
                    max_halvings=40, record=None):
    """Continue a root tuple while the rapidities follow ``rap_at(p)``.

    Steps are uniform in log p (``geometric``) or in p, halved on failure.
    A secant predictor and a jump guard (the Newton correction must stay
    well below the current root separation and the predictor step size)
    keep the tuple on one branch.  Returns (t, snapshots, newton_iterations).
    """
    to_u = math.log if geometric else (lambda p: p)
    from_u = math.exp if geometric else (lambda u: u)
    u0, u1 = to_u(p0), to_u(p1)
    du_nom = (u1 - u0) / max(1, steps)
    t = np.array(t0, dtype=complex)
    hist = [(u0, t.copy())]
    snaps = [(p0, tuple(t))]
    iters, u, du = 0, u0, du_nom
    halvings = 0
    while (u1 - u) * np.sign(du_nom) > 1e-14 * max(1.0, abs(u1)):
        un = u + du
        if (u1 - un) * np.sign(du_nom) < 0:
            un = u1
        pred = t.copy()
        if len(hist) >= 2:
            (ua, ta), (ub, tb) = hist[-2], hist[-1]
            pred = tb + (tb - ta) * (un - ub) / (ub - ua)
        rap = rap_at(from_u(un))
        ok = False
        try:
            tn, k, res, ok, _ = _newton(pred, rap, tol, max_iter=12)
            iters += k
            if ok:
                sep = _min_sep(t)
                jump = np.max(np.abs(tn - pred)) if t.size else 0.0
                move = np.max(np.abs(pred - t)) if t.size else 0.0
                ok = jump < 0.25 * sep and (len(hist) < 2 or jump <= move + 1e-9 * rap.hbar)
                ok = ok and _min_sep(tn) > COLLISION_EPS
        except SingularJacobianError:
            ok = False
        if ok:
            u, t = un, tn
            hist.append((u, t.copy()))
            if record is None or record(from_u(u)):
                snaps.append((from_u(u), tuple(t)))
            du = np.sign(du_nom) * min(abs(du) * 1.5, abs(du_nom))
            halvings = 0
        else:
            du *= 0.5
            halvings += 1
            if halvings > max_halvings:
                raise PathFailureError(
                    f"continuation stalled at parameter {from_u(u):.6g}", snaps[-1])
    return t, snaps, iters


def default_hbar_start(rap: Rapidities) -> float:
    th = rap.values
    sep = min((abs(a - b) for a, b in itertools.combinations(th, 2)), default=1.0)
    return min(1e-3 * min(1.0, sep), 5e-2 * rap.hbar)


def hbar_homotopy(assignment, rap: Rapidities, hbar_start=None, steps=20,
                  tol=NEWTON_TOL) -> SolveReport:
    """Seed t_α = θ_{j(α)} at small ħ and continue to ``rap.hbar``."""
    assignment = tuple(int(j) for j in assignment)
    if len(set(assignment)) != len(assignment):
        raise ValueError(f"assignment {assignment} not injective")
    if not assignment:
        return SolveReport(BetheRoots.make((), rap.n, ()), 0.0, 0, [(rap.hbar, ())])
    steps = max(10, steps)
    h0 = hbar_start or default_hbar_start(rap)
    seed = [rap.values[j - 1] for j in assignment]
    t, k0, res, ok, trace = _newton(seed, rap.with_hbar(h0), tol)
    if not ok:
        raise PathFailureError(f"seed correction failed at hbar={h0}", (h0, tuple(seed)))
    t, snaps, k = track_parameter(t, rap.with_hbar, h0, rap.hbar, steps, tol)
    _check_collision(t)
    res = bae_residual_norm(t, rap)
    return SolveReport(BetheRoots.make(t, rap.n, assignment), res, k0 + k, snaps)


def assignments(n, magnons):
    """All injective classical assignments (as increasing site tuples)."""
    return list(itertools.combinations(range(1, n + 1), magnons))


# ---------------------------------------------------------------------------
# eigenvalues and vectors

def _roots_arr(roots):
    return roots.arr if isinstance(roots, BetheRoots) else np.asarray(roots, dtype=complex)


def _tau_un(theta0, t, rap, pole_eps):
    h = rap.hbar
    th0j = theta0 - rap.arr
    if np.any(np.abs(th0j + 1j * h) < pole_eps * h):
        raise PoleProximityError("theta0 = theta_j - i*hbar")
    den = theta0 - t + 0.5j * h
    if np.any(np.abs(den) == 0):
        raise ZeroDivisionError
    a = np.prod((theta0 - t - 0.5j * h) / den)
    d = np.prod((theta0 - t + 1.5j * h) / den)
    v = np.prod(th0j / (th0j + 1j * h))
    return 1j * a - 1j * d * v


def eval_tau(theta0, roots, rap: Rapidities, normalized=False, cfg=None,
             pole_eps=tc.POLE_EPS, onshell_tol=ONSHELL_TOL) -> complex:
    """Transfer-matrix eigenvalue for on-shell roots (see module docstring).

    Near the apparent pole θ₀ = t_α − iħ/2 on-shell roots are handled by a
    symmetric four-point average; off-shell roots raise PoleProximityError.
    """
    theta0 = complex(theta0)
    t = _roots_arr(roots)
    h = rap.hbar
    guard = 1e-6 * h
    if t.size and np.min(np.abs(theta0 - t + 0.5j * h)) < guard:
        if bae_residual_norm(t, rap) > onshell_tol:
            raise PoleProximityError("theta0 at the eigenvalue pole with off-shell roots")
        rho = 1e-3 * h
        val = sum(_tau_un(theta0 + rho * s, t, rap, pole_eps) for s in (1, -1, 1j, -1j)) / 4
    else:
        val = _tau_un(theta0, t, rap, pole_eps)
    if normalized:
        from .scalar_factors import ScalarFactorConfig, r_scalar
        cfg = cfg or ScalarFactorConfig(h)
        for th in rap.values:
            if abs(th - theta0) < pole_eps * h:
                raise PoleProximityError("theta0 coincides with a rapidity")
            val *= r_scalar(th - theta0, cfg)
    return complex(val)


def build_bethe_vector(roots, rap: Rapidities, onshell_tol=ONSHELL_TOL,
                       check=True) -> np.ndarray:
    """w = ∏_α B(t_α − iħ/2) Ω."""
    t = _roots_arr(roots)
    if check and bae_residual_norm(t, rap) > onshell_tol:
        raise OffShellError(f"roots off shell (residual {bae_residual_norm(t, rap):.2e})")
    w = tc.omega(rap.n)
    bound = 1.0
    for x in t:
        u = x - 0.5j * rap.hbar
        w = tc.apply_B(u, rap, w)
        bound *= tc.b_norm_bound(u, rap)
    if np.linalg.norm(w) < 1e-12 * bound:
        raise ZeroVectorError("Bethe vector vanishes (spurious solution)")
    return w


def symmetrized_f(roots, rap: Rapidities, cfg, onshell_tol=ONSHELL_TOL) -> np.ndarray:
    """f = ∏_{k>l} iψ(θ_kl)/(θ_kl² + ħ²) · w, normalization φ ≡ 1."""
    from .scalar_factors import sym_prefactor
    return sym_prefactor(rap, cfg) * build_bethe_vector(roots, rap, onshell_tol)


def eigenvector_residual(w, theta0, rap: Rapidities, tau=None, roots=None) -> float:
    """‖𝒯w − τw‖/‖𝒯w‖ with the unnormalized transfer matrix."""
    if tau is None:
        tau = eval_tau(theta0, roots, rap)
    tw = tc.apply_transfer(theta0, rap, w)
    return float(np.linalg.norm(tw - tau * w) / np.linalg.norm(tw))


def attach_eigen_checks(report: SolveReport, rap: Rapidities, theta0s) -> SolveReport:
    """Fill eigenvalue samples and the worst eigenvector residual."""
    w = build_bethe_vector(report.roots, rap)
    worst = 0.0
    for z in theta0s:
        tau = eval_tau(z, report.roots, rap)
        report.eigenvalue_samples.append((complex(z), tau))
        worst = max(worst, eigenvector_residual(w, z, rap, tau))
    report.eigenvector_residual = worst
    return report


def exchange_deviation(roots, rap: Rapidities, k: int, cfg) -> float:
    """‖f(θ) − L_k(θ_{k+1,k}) f(σ_kθ)‖/‖f(θ)‖ with the normalized exchange operator.

    The roots are re-solved on σ_kθ (the equations are symmetric in θ, so
    the same tuple is the seed).
    """
    t = _roots_arr(roots)
    swapped = rap.swapped(k)
    t_sw = newton_solve(t, swapped).arr if t.size else t
    f = symmetrized_f(t, rap, cfg)
    g = tc.apply_L(k, rap, symmetrized_f(t_sw, swapped, cfg), normalized=True, cfg=cfg)
    return float(np.linalg.norm(f - g) / np.linalg.norm(f))
