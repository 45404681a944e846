"""Verification of the variational certificates along computed trajectories.

The report checks, on the checkpoint lattice: the energy-dissipation balance
on every checkpoint pair, the one-sided energy-dissipation inequality, the
chain rule, the pointwise balance against a difference stencil, the
continuity equation against a battery of test functions (including the
component step function when a punctured mask is present), and the hard
trajectory invariants (mass, maximum principle, entropy monotonicity,
component masses).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .densities import DissipationTriple
from .evolution import Trajectory, continuity_residual
from .functionals import entropy, trajectory_L
from .quadrature import cumulative_simpson_nonuniform

__all__ = [
    "LedgerReport",
    "edb_report",
    "chain_rule_residual",
    "pointwise_edb",
    "rce_battery",
    "upgrade_verdict",
    "full_report",
    "render_table",
]

VERDICT_BALANCED = "Balanced/Reflecting"
VERDICT_DISSIPATIVE = "Dissipative"
VERDICT_NEITHER = "Neither"

# quadrature-limited defaults: smooth problems vs stiff small-cutoff problems
DEFAULT_TOL_SMOOTH = 1e-6
DEFAULT_TOL_STIFF = 1e-4
STIFF_EPS = 1e-3


def default_tolerance(cutoff_eps: Optional[float]) -> float:
    if cutoff_eps is not None and cutoff_eps <= STIFF_EPS:
        return DEFAULT_TOL_STIFF
    return DEFAULT_TOL_SMOOTH


def _jsonify(v):
    """JSON-safe scalar: non-finite floats become strings."""
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return v


@dataclass
class LedgerReport:
    times: np.ndarray
    ledger_series: np.ndarray           # L_t at every checkpoint
    interval_residuals: np.ndarray      # EDB residual per consecutive interval
    edi_ok: bool
    edb_ok: bool
    tol_abs: float
    energy_scale: float
    chain_series: Optional[np.ndarray] = None
    chain_ok: Optional[bool] = None
    chain_inconclusive: bool = False
    pointwise_series: Optional[np.ndarray] = None
    ce_residual: Optional[float] = None     # Lipschitz battery only
    ce_ok: Optional[bool] = None
    rce_residual: Optional[float] = None    # full battery, step functions included
    rce_ok: Optional[bool] = None
    invariants: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    verdict: str = ""

    def max_edb_residual(self) -> float:
        # the spread of L over checkpoints bounds the residual on every pair
        return float(np.max(self.ledger_series) - np.min(self.ledger_series))

    def residual_on(self, k_s: int, k_t: int) -> float:
        return float(self.ledger_series[k_t] - self.ledger_series[k_s])

    def to_dict(self) -> dict:
        d = {
            "schema": 1,
            "verdict": self.verdict,
            "tol_abs": _jsonify(self.tol_abs),
            "energy_scale": _jsonify(self.energy_scale),
            "edb_ok": self.edb_ok,
            "edi_ok": self.edi_ok,
            "max_edb_residual": _jsonify(self.max_edb_residual()),
            "final_ledger": _jsonify(float(self.ledger_series[-1])),
            "chain_ok": self.chain_ok,
            "chain_inconclusive": self.chain_inconclusive,
            "max_chain_residual": None if self.chain_series is None
            else _jsonify(float(np.max(self.chain_series))),
            "ce_residual": None if self.ce_residual is None else _jsonify(self.ce_residual),
            "ce_ok": self.ce_ok,
            "rce_residual": None if self.rce_residual is None else _jsonify(self.rce_residual),
            "rce_ok": self.rce_ok,
            "invariants": {k: _jsonify(v) for k, v in self.invariants.items()},
            "flags": {k: _jsonify(v) for k, v in self.flags.items()},
            "n_checkpoints": int(self.times.size),
        }
        return d

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True, allow_nan=False)


def _invariant_checks(traj: Trajectory, triple, pi, mask=None):
    pi = np.asarray(pi, dtype=float)
    U = traj.densities
    mass = U @ pi
    mass_scale = max(abs(mass[0]), 1e-300)
    mass_drift = float(np.max(np.abs(mass - mass[0])) / mass_scale)
    lo, hi = float(U[0].min()), float(U[0].max())
    max_principle_excess = float(max(np.max(U) - hi, lo - np.min(U), 0.0))
    ent = np.array([entropy(u, pi, triple.entropy) for u in U])
    entropy_increase = float(max(np.max(np.diff(ent)), 0.0)) if ent.size > 1 else 0.0
    inv = {
        "mass_drift_rel": mass_drift,
        "mass_ok": mass_drift <= 1e-10,
        "max_principle_excess": max_principle_excess,
        "max_principle_ok": max_principle_excess <= 1e-10,
        "entropy_increase": entropy_increase,
        "entropy_monotone_ok": entropy_increase <= 1e-10,
    }
    if mask is not None:
        comp = np.asarray(mask, dtype=bool)
        m1 = U[:, comp] @ pi[comp]
        m2 = U[:, ~comp] @ pi[~comp]
        drift = max(float(np.max(np.abs(m1 - m1[0]))), float(np.max(np.abs(m2 - m2[0]))))
        inv["component_mass_drift"] = drift / mass_scale
        inv["component_mass_ok"] = drift / mass_scale <= 1e-12
    return inv, ent


def edb_report(traj: Trajectory, triple: DissipationTriple, theta, pi,
               tol_rel: Optional[float] = None, mask=None) -> LedgerReport:
    """Energy-dissipation report: ledger series, per-interval residuals,
    balance and inequality verdicts, and the invariant checklist.

    The tolerance is relative to the initial entropy; at (or near) the
    entropy minimum a roundoff-level floor tied to the total mass keeps the
    relative test meaningful.
    """
    pi = np.asarray(pi, dtype=float)
    series, detail = trajectory_L(traj, triple, theta, pi, report=True)
    mass = float(traj.densities[0] @ pi)
    scale = max(entropy(traj.densities[0], pi, triple.entropy), 1e-12 * (1.0 + mass))
    tol = (tol_rel if tol_rel is not None else DEFAULT_TOL_SMOOTH) * scale
    interval = np.diff(series)
    finite = np.all(np.isfinite(series))
    edb_ok = bool(finite and np.max(np.abs(series)) <= tol
                  and float(np.max(series) - np.min(series)) <= tol)
    edi_ok = bool(finite and np.max(series) <= tol)
    invariants, _ = _invariant_checks(traj, triple, pi, mask=mask)
    return LedgerReport(
        times=traj.times,
        ledger_series=series,
        interval_residuals=interval,
        edi_ok=edi_ok,
        edb_ok=edb_ok,
        tol_abs=tol,
        energy_scale=scale,
        invariants=invariants,
        flags={"initial_singular": detail["initial_singular"]},
    )


def chain_rule_residual(traj: Trajectory, triple: DissipationTriple, theta, pi,
                        detail: bool = False):
    """Per-interval residual |dE - integral of the entropy-gradient flux pairing|.

    Returns ``(series, inconclusive)``; the check is inconclusive rather than
    failed when the integrand is non-finite away from the trajectory
    endpoints (vacuum regions under an entropy with infinite slope at zero).
    With ``detail`` the residual spread over all checkpoint pairs is appended,
    which is the quantity compared against the ledger tolerance.
    """
    theta = np.asarray(theta, dtype=float)
    pi = np.asarray(pi, dtype=float)
    ent = np.array([entropy(u, pi, triple.entropy) for u in traj.densities])

    def pairing(k):
        u = traj.densities[k]
        w = traj.flux_at(k)
        lam = triple.entropy.dphi_ext(u)
        with np.errstate(invalid="ignore"):
            grad = lam[None, :] - lam[:, None]   # nabla phi'(u)
            vals = -grad * w * theta
        vals = np.where(theta == 0.0, 0.0, vals)
        vals = np.where((w == 0.0) & ~np.isfinite(grad), 0.0, vals)
        np.fill_diagonal(vals, 0.0)
        if np.any(np.isnan(vals)):
            return np.nan
        return 0.5 * float(np.sum(vals))

    g = np.array([pairing(k) for k in range(traj.times.size)])
    interior_bad = np.any(~np.isfinite(g[1:-1]))
    if interior_bad:
        if detail:
            return np.full(traj.times.size - 1, np.nan), True, float("nan")
        return np.full(traj.times.size - 1, np.nan), True
    g = np.where(np.isnan(g), np.inf, g)
    integral, _ = cumulative_simpson_nonuniform(traj.times, g)
    # the pairing equals -dE/dt along the curve, so the defect is dE + integral
    residual = np.abs(np.diff(ent) + np.diff(integral))
    if detail:
        defect = (ent - ent[0]) + integral
        spread = float(np.max(defect) - np.min(defect))
        return residual, False, spread
    return residual, False


def pointwise_edb(traj: Trajectory, triple: DissipationTriple, theta, pi,
                  min_width_rel: float = 1e-4) -> np.ndarray:
    """At interior checkpoints, |R + D + dE/dt| with a three-point difference
    stencil for the entropy derivative (nonuniform-grid form).

    Stencils narrower than ``min_width_rel`` of the span are skipped (NaN):
    there the difference quotient only amplifies entropy roundoff.
    """
    from .functionals import edb_integrand

    theta = np.asarray(theta, dtype=float)
    pi = np.asarray(pi, dtype=float)
    t = traj.times
    ent = np.array([entropy(u, pi, triple.entropy) for u in traj.densities])
    floor = min_width_rel * (t[-1] - t[0])
    out = np.full(max(t.size - 2, 0), np.nan)
    for k in range(1, t.size - 1):
        x0, x1, x2 = t[k - 1], t[k], t[k + 1]
        if x2 - x0 < floor:
            continue
        f0, f1, f2 = ent[k - 1], ent[k], ent[k + 1]
        dE = (f0 * (x1 - x2) / ((x0 - x1) * (x0 - x2))
              + f1 * (2 * x1 - x0 - x2) / ((x1 - x0) * (x1 - x2))
              + f2 * (x1 - x0) / ((x2 - x0) * (x2 - x1)))
        b = edb_integrand(traj.densities[k], traj.flux_at(k), triple, theta)
        out[k - 1] = abs(b + dE)
    return out


def _lipschitz_battery(points, dist, seed: int, count: int = 4):
    """Bounded test functions: constants, clamped coordinates, random Lipschitz."""
    rng = np.random.default_rng(seed)
    battery = [("constant", np.ones_like(points)),
               ("coordinate", np.clip(points, -1.0, 1.0))]
    n = points.size
    for k in range(count):
        anchors = rng.choice(n, size=min(3, n), replace=False)
        coeffs = rng.uniform(-1.0, 1.0, anchors.size)
        # min of shifted distance cones is automatically 1-Lipschitz in the metric
        vals = np.min(dist[:, anchors] + coeffs[None, :], axis=1)
        battery.append((f"random_lipschitz_{k}", np.clip(vals, -2.0, 2.0)))
    return battery


def rce_battery(traj: Trajectory, space, theta, pi, seed: int = 0, mask=None) -> dict:
    """Continuity-equation residuals over the test-function battery.

    With a punctured mask present the battery includes the component step
    function, the discontinuous member of the quadratic test class that
    separates the reflecting equation from the plain one.
    """
    battery = _lipschitz_battery(space.points, space.dist, seed)
    if mask is not None:
        step = np.where(np.asarray(mask, dtype=bool), 1.0, 0.0)
        battery.append(("component_step", step))
    residuals = {}
    for name, phi_vals in battery:
        residuals[name] = continuity_residual(traj, phi_vals, theta, pi)
    return residuals


def upgrade_verdict(report: LedgerReport) -> str:
    """Classify the trajectory from the assembled report.

    Balanced/Reflecting requires the balance on every checkpoint pair and the
    continuity residual with the step test functions included; Dissipative
    requires the one-sided inequality plus the plain continuity equation
    against the bounded Lipschitz battery.
    """
    rce_good = report.rce_ok if report.rce_ok is not None else False
    ce_good = report.ce_ok if report.ce_ok is not None else rce_good
    if report.edb_ok and rce_good:
        return VERDICT_BALANCED
    if report.edi_ok and ce_good:
        return VERDICT_DISSIPATIVE
    return VERDICT_NEITHER


def full_report(traj: Trajectory, triple: DissipationTriple, space, theta, pi,
                tol_rel: Optional[float] = None, seed: int = 0, mask=None,
                rce_tol: float = 1e-8) -> LedgerReport:
    """Assemble the complete ledger: balance, chain rule, pointwise balance,
    continuity battery and the final verdict."""
    report = edb_report(traj, triple, theta, pi, tol_rel=tol_rel, mask=mask)
    chain, inconclusive, chain_spread = chain_rule_residual(traj, triple, theta, pi, detail=True)
    report.chain_series = chain
    report.chain_inconclusive = inconclusive
    if not inconclusive:
        report.chain_ok = bool(np.isfinite(chain_spread) and chain_spread <= report.tol_abs)
        report.flags["chain_spread"] = chain_spread
    report.pointwise_series = pointwise_edb(traj, triple, theta, pi)
    residuals = rce_battery(traj, space, theta, pi, seed=seed, mask=mask)
    mass_scale = max(float(traj.densities[0] @ np.asarray(pi, float)), 1e-300)
    lipschitz = {k: v for k, v in residuals.items() if k != "component_step"}
    report.ce_residual = max(lipschitz.values()) / mass_scale
    report.ce_ok = report.ce_residual <= rce_tol
    report.rce_residual = max(residuals.values()) / mass_scale
    report.rce_ok = report.rce_residual <= rce_tol
    report.flags["rce_battery"] = {k: v / mass_scale for k, v in residuals.items()}
    report.verdict = upgrade_verdict(report)
    return report


def render_table(report: LedgerReport) -> str:
    """Human-readable summary table."""
    rows = [
        ("verdict", report.verdict),
        ("max |EDB residual|", f"{report.max_edb_residual():.3e}"),
        ("final ledger L_T", f"{float(report.ledger_series[-1]):.3e}"),
        ("tolerance (abs)", f"{report.tol_abs:.3e}"),
        ("EDI holds", str(report.edi_ok)),
        ("chain rule", "inconclusive" if report.chain_inconclusive else str(report.chain_ok)),
        ("RCE residual", "-" if report.rce_residual is None else f"{report.rce_residual:.3e}"),
    ]
    for k, v in report.invariants.items():
        rows.append((k, f"{v:.3e}" if isinstance(v, float) else str(v)))
    width = max(len(r[0]) for r in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)
