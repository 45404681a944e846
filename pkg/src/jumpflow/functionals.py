"""Variational functionals: entropy, action, dual action, Fisher information,
trajectory ledger integrand, convex functionals of measures, seminorms.

All edge sums run over ordered pairs (i, j), i != j, and carry the global
factor 1/2.  Extended values propagate as a saturating +inf, never as an
exception.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .densities import DissipationTriple, d_phi, legendre
from .measures import PosMeasure, SignedMeasurePair
from .quadrature import cumulative_simpson_nonuniform

__all__ = [
    "FunctionalReport",
    "TestFunction",
    "Upsilon",
    "entropy",
    "action_R",
    "dual_R_star",
    "fisher_D",
    "edb_integrand",
    "trajectory_L",
    "trajectory_report",
    "f_upsilon",
    "gagliardo_seminorm",
    "luxemburg_norm",
    "seminorm_equivalence_check",
]


@dataclass(frozen=True)
class FunctionalReport:
    """Value of an extended functional with row breakdown and evaluation flags."""

    value: float
    breakdown: Optional[np.ndarray] = None
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        from .ledger import _jsonify  # shared non-finite float encoding
        return {
            "value": _jsonify(self.value),
            "breakdown": None if self.breakdown is None else [_jsonify(v) for v in self.breakdown],
            "flags": {k: _jsonify(v) for k, v in self.flags.items()},
        }


def _offdiag(n):
    return ~np.eye(n, dtype=bool)


class TestFunction:
    """Bounded test function on the state space with a cached seminorm.

    On a finite universe boundedness is just finiteness of the values; the
    quadratic-seminorm membership flag still distinguishes functions once the
    coupling carries singular weights.
    """

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("test functions must be bounded")
        self._cache_key = None
        self._cache_val = None

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def seminorm(self, theta) -> float:
        key = id(theta)
        if key != self._cache_key:
            self._cache_val = gagliardo_seminorm(self.values, theta)
            self._cache_key = key
        return self._cache_val

    def in_x2(self, theta) -> bool:
        return bool(np.isfinite(self.seminorm(theta)))


def entropy(u, pi, entropy_density) -> float:
    """Relative entropy sum phi(u_i) pi_i."""
    u = np.asarray(u, dtype=float)
    pi = np.asarray(pi, dtype=float)
    return float(np.sum(entropy_density.phi(u) * pi))


def action_R(u, w, triple: DissipationTriple, theta, report: bool = False):
    """Primal action of the flux density w of 2j with respect to theta.

    Sums psi(w/alpha) alpha theta / 2 over edges where alpha > 0.  The value
    is +inf when the flux measure w theta charges an edge with vanishing
    alpha (recession of the superlinear psi); edges where both w and alpha
    vanish contribute zero.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    theta = np.asarray(theta, dtype=float)
    n = u.size
    off = _offdiag(n)
    a = triple.flux.alpha(u[:, None], u[None, :])
    active = off & (theta > 0) & (a > 0)
    charged_degenerate = off & (theta > 0) & (a == 0) & (w != 0)
    vals = np.zeros_like(theta)
    if np.any(active):
        ratio = np.zeros_like(theta)
        np.divide(w, a, out=ratio, where=active)
        vals[active] = legendre(triple.pair, ratio[active]) * a[active] * theta[active]
    total = 0.5 * float(vals.sum())
    degenerate = bool(np.any(charged_degenerate))
    if degenerate:
        total = float("inf")
    if not report:
        return total
    return FunctionalReport(value=total, breakdown=0.5 * vals.sum(axis=1),
                            flags={"recession_active": degenerate})


def dual_R_star(u, xi, triple: DissipationTriple, theta) -> float:
    """Dual action sum psi*(xi) nu_rho / 2 with nu_rho = alpha(u_i, u_j) theta."""
    u = np.asarray(u, dtype=float)
    xi = np.asarray(xi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    off = _offdiag(u.size)
    nu = triple.flux.alpha(u[:, None], u[None, :]) * theta
    return 0.5 * float(np.sum(np.where(off, triple.pair.psi_star(xi) * nu, 0.0)))


def fisher_D(u, triple: DissipationTriple, theta) -> float:
    """Fisher information sum D_phi(u_i, u_j) theta_ij / 2."""
    u = np.asarray(u, dtype=float)
    theta = np.asarray(theta, dtype=float)
    off = _offdiag(u.size)
    dv = d_phi(triple, u[:, None], u[None, :])
    active = off & (theta > 0)
    if np.any(np.isinf(dv[active])):
        return float("inf")
    return 0.5 * float(np.sum(np.where(active, dv * theta, 0.0)))


def edb_integrand(u, w, triple: DissipationTriple, theta) -> float:
    """Instantaneous dissipation rate R(u, w) + D(u)."""
    return action_R(u, w, triple, theta) + fisher_D(u, triple, theta)


def trajectory_report(traj, triple: DissipationTriple, theta, pi) -> FunctionalReport:
    """Ledger series packaged for export: final value, the per-interval
    quadrature table as the breakdown, and the singular-start flag."""
    series, detail = trajectory_L(traj, triple, theta, pi, report=True)
    return FunctionalReport(
        value=float(series[-1]),
        breakdown=np.diff(detail["dissipation_integral"]),
        flags={"initial_singular": detail["initial_singular"],
               "max_abs_ledger": float(np.max(np.abs(series)))},
    )


def trajectory_L(traj, triple: DissipationTriple, theta, pi, report: bool = False):
    """Energy-dissipation ledger series L_t along a trajectory.

    L at checkpoint t is E(u_t) - E(u_0) + integral of (R + D) over [0, t],
    time-quadratured by composite Simpson on the checkpoint grid.  A
    non-finite integrand at the initial or final checkpoint only (vacuum
    start under a superlinear dissipation) is integrated by the one-sided
    rectangle rule and flagged.
    """
    theta = np.asarray(theta, dtype=float)
    pi = np.asarray(pi, dtype=float)
    ent = np.array([entropy(u, pi, triple.entropy) for u in traj.densities])
    b = np.array([edb_integrand(traj.densities[k], traj.flux_at(k), triple, theta)
                  for k in range(len(traj.times))])
    integral, singular = cumulative_simpson_nonuniform(traj.times, b)
    series = ent - ent[0] + integral
    if not report:
        return series
    return series, {
        "entropy": ent,
        "dissipation_integral": integral,
        "integrand": b,
        "initial_singular": singular,
    }


# ---------------------------------------------------------------------------
# convex functionals of measures


@dataclass(frozen=True)
class Upsilon:
    """Proper convex integrand on R^m with recession and perspective."""

    fn: Callable
    recession_fn: Optional[Callable] = None
    name: str = "custom"

    def __call__(self, z):
        return self.fn(np.asarray(z, dtype=float))

    def recession(self, z):
        z = np.asarray(z, dtype=float)
        if self.recession_fn is not None:
            return self.recession_fn(z)
        # numeric recession lim (Upsilon(tz) - Upsilon(0))/t; a slope still
        # growing between the two probe scales marks superlinear growth
        base = self.fn(np.zeros_like(z))
        r1 = (self.fn(1e6 * z) - base) / 1e6
        r2 = (self.fn(1e12 * z) - base) / 1e12
        if r2 > 2.0 * r1 + 1e-300:
            return float("inf")
        return r2

    def perspective(self, z, t):
        z = np.asarray(z, dtype=float)
        if t > 0:
            return float(t * self.fn(z / t))
        if t == 0:
            return float(self.recession(z))
        return float("inf")


def _density_vector(mu, nu: PosMeasure):
    """Densities and singular evaluations of a (vector of) signed measure(s)."""
    parts = mu if isinstance(mu, (list, tuple)) else [mu]
    from .measures import lebesgue_decompose

    dens, sing = [], []
    for m in parts:
        d, s = lebesgue_decompose(m, nu)
        dens.append(d)
        sing.append(s)
    return np.stack(dens, axis=-1), sing


def f_upsilon(mu, nu: PosMeasure, upsilon: Upsilon) -> float:
    """Convex functional of measures F_Upsilon(mu | nu).

    Integrates Upsilon of the density of mu with respect to nu, plus the
    recession function applied to the direction of the singular part.
    ``mu`` may be one SignedMeasurePair or a list of them (vector case).
    """
    dens, sing = _density_vector(mu, nu)
    w = nu.weights
    total = 0.0
    for i in np.flatnonzero(w > 0):
        total += upsilon(dens[i]) * w[i]
    sing_vals = np.stack([s.values for s in sing], axis=-1)
    sing_tv = np.sum(np.abs(sing_vals), axis=-1)
    for i in np.flatnonzero(sing_tv > 0):
        direction = sing_vals[i] / sing_tv[i]
        total += upsilon.recession(direction) * sing_tv[i]
    return float(total)


def gagliardo_seminorm(phi_vals, theta) -> float:
    """Quadratic nonlocal seminorm sum (phi_j - phi_i)^2 theta_ij over i != j."""
    phi_vals = np.asarray(phi_vals, dtype=float)
    theta = np.asarray(theta, dtype=float)
    grad = phi_vals[None, :] - phi_vals[:, None]
    return float(np.sum(grad * grad * theta))


def luxemburg_norm(zeta, young, theta, rel_tol: float = 1e-10) -> float:
    """Luxemburg norm inf{l > 0 : sum Y(zeta/l) theta <= 1}, by bisection."""
    zeta = np.asarray(zeta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    active = theta > 0
    if not np.any(active & (zeta != 0)):
        return 0.0

    def G(level):
        return float(np.sum(young(zeta[active] / level) * theta[active]))

    hi = 1.0
    for _ in range(2000):
        if G(hi) <= 1.0:
            break
        hi *= 2.0
    lo = hi
    for _ in range(2000):
        if G(0.5 * lo) > 1.0:
            break
        lo *= 0.5
    lo *= 0.5
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if G(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def seminorm_equivalence_check(phi_vals, pair, theta) -> dict:
    """Certify that the quadratic seminorm and the psi*-modular are equivalent
    for a bounded test function, with the explicit two-sided constants.

    With M the sup of the discrete gradient, psi*(xi) <= f*(M)/M^2 xi^2 and
    xi^2 <= K_M psi*(xi) hold pointwise on [-M, M], so the two finiteness
    flags must agree and the sums obey the two-sided bound.
    """
    phi_vals = np.asarray(phi_vals, dtype=float)
    theta = np.asarray(theta, dtype=float)
    n = phi_vals.size
    off = _offdiag(n)
    grad = phi_vals[None, :] - phi_vals[:, None]
    g2 = float(np.sum(np.where(off, grad * grad * theta, 0.0)))
    gpsi = float(np.sum(np.where(off, pair.psi_star(grad) * theta, 0.0)))
    M = float(np.max(np.abs(grad[off]))) if n > 1 else 0.0
    if M == 0.0:
        return {"g2": g2, "gpsi": gpsi, "M": 0.0, "upper_const": 0.0, "lower_const": 0.0,
                "both_finite": True, "upper_ok": gpsi == 0.0, "lower_ok": g2 == 0.0}
    upper_const = pair.f_star(M) / M**2
    lower_const = pair.k_quadratic(M)
    slack = 1.0 + 1e-12
    return {
        "g2": g2,
        "gpsi": gpsi,
        "M": M,
        "upper_const": upper_const,
        "lower_const": lower_const,
        "both_finite": bool(np.isfinite(g2) and np.isfinite(gpsi)),
        "upper_ok": gpsi <= upper_const * g2 * slack,
        "lower_ok": g2 <= lower_const * gpsi * slack,
    }
