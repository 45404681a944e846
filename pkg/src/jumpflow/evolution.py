"""Time integration of the linear jump evolution and flux reconstruction.

Only compatible triples are integrated: for those the flux map reduces to
v - u and the evolution is the linear forward equation du_i/dt =
sum_j (u_j - u_i) theta_ij / pi_i.  The matrix exponential is the reference
integrator (it preserves positivity and the maximum principle exactly for
generator matrices); explicit Euler is the cheap cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .densities import DissipationTriple, compat_check
from .quadrature import checkpoint_grid

__all__ = [
    "IncompatibleTripleError",
    "NumericalError",
    "IntegratorConfig",
    "Trajectory",
    "generator",
    "evolve",
    "flux_from_density",
    "continuity_residual",
    "concatenate",
    "rescale_time",
    "trajectory_csv_text",
    "trajectory_to_csv",
    "trajectory_from_csv",
    "flux_csv_text",
    "flux_to_csv",
    "flux_from_csv",
]

DEFAULT_CHECKPOINT_DENSITY = 512  # checkpoint intervals per unit time


class IncompatibleTripleError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "expm"            # 'expm' or 'euler'
    checkpoints: Optional[int] = None
    dt: Optional[float] = None      # Euler step cap
    cfl_safety: float = 0.9
    graded_start: bool = True

    def __post_init__(self):
        if self.method not in ("expm", "euler"):
            raise ValueError("method must be 'expm' or 'euler'")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (0 < self.cfl_safety <= 1):
            raise ValueError("cfl_safety must lie in (0, 1]")

    def n_checkpoints(self, T: float) -> int:
        if self.checkpoints is not None:
            return int(self.checkpoints)
        return max(2, int(round(DEFAULT_CHECKPOINT_DENSITY * T)))


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of the density along a strictly increasing time grid.

    Flux snapshots (edge density w of 2j with respect to theta) are either
    stored explicitly or reconstructed on demand from the densities via a
    flux rule; produced trajectories use the rule w_ij = u_i - u_j of the
    compatible flux formula.
    """

    times: np.ndarray               # (K+1,), starts at 0
    densities: np.ndarray           # (K+1, n)
    flux_rule: Optional[Callable] = None    # u -> (n, n) antisymmetric
    flux_store: Optional[np.ndarray] = None  # (K+1, n, n) when stored
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        u = np.asarray(self.densities, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("checkpoint times must be strictly increasing")
        if u.shape[0] != t.size:
            raise ValueError("one density snapshot per checkpoint required")
        if np.any(u < 0):
            raise ValueError("density snapshots must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "densities", u)
        # immutable once returned; safe for concurrent readers
        self.times.setflags(write=False)
        self.densities.setflags(write=False)

    @property
    def n(self) -> int:
        return self.densities.shape[1]

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def has_flux(self) -> bool:
        return self.flux_rule is not None or self.flux_store is not None

    def flux_at(self, k: int) -> np.ndarray:
        if self.flux_store is not None:
            return self.flux_store[k]
        if self.flux_rule is not None:
            return self.flux_rule(self.densities[k])
        raise ValueError("trajectory carries no flux snapshots")

    def mass(self, pi) -> np.ndarray:
        return self.densities @ np.asarray(pi, dtype=float)


def generator(coup, triple: DissipationTriple, compat_tol: float = 1e-9) -> np.ndarray:
    """Generator matrix of the linear evolution, Q_ij = theta_ij / pi_i.

    Refuses triples that fail the compatibility identity; the nonlinear flux
    map has no solver here.
    """
    if not triple.compatible:
        raise IncompatibleTripleError(f"triple '{triple.name}' is not declared compatible")
    residual = compat_check(triple, samples=256, seed=1)
    if residual > compat_tol:
        raise IncompatibleTripleError(
            f"triple '{triple.name}' fails the compatibility identity (residual {residual:.2e})")
    Q = coup.theta / coup.pi[:, None]
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def flux_from_density(u, triple: DissipationTriple) -> np.ndarray:
    """Flux snapshot w_ij = -F(u_i, u_j); for compatible triples u_i - u_j."""
    u = np.asarray(u, dtype=float)
    if triple.compatible:
        w = u[:, None] - u[None, :]
    else:
        from .densities import f_map
        w = -np.asarray(f_map(triple, u[:, None], u[None, :]), dtype=float)
    np.fill_diagonal(w, 0.0)
    return w


def _flux_rule(triple: DissipationTriple):
    def rule(u):
        return flux_from_density(u, triple)

    return rule


def evolve(coup, triple: DissipationTriple, u0, T: float,
           config: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate the linear evolution from u0 over [0, T].

    'expm' propagates with cached scaling-and-squaring exponentials per
    distinct checkpoint step; 'euler' subdivides every checkpoint interval to
    respect the stability bound dt <= cfl_safety / max_i sum_j theta_ij/pi_i.
    """
    u0 = np.asarray(u0, dtype=float)
    if np.any(u0 < 0) or not np.all(np.isfinite(u0)):
        raise NumericalError("initial density must be finite and nonnegative")
    Q = generator(coup, triple)
    times = checkpoint_grid(T, config.n_checkpoints(T), config.graded_start)
    U = np.empty((times.size, u0.size))
    U[0] = u0
    if config.method == "expm":
        steps = np.diff(times)
        uniq, counts = np.unique(steps, return_counts=True)
        repeated = {float(d) for d, c in zip(uniq, counts) if c > 1}
        cache = {}  # retain only reused step matrices; prefix steps are unique
        for k, dt in enumerate(steps):
            key = float(dt)
            E = cache.get(key)
            if E is None:
                E = expm(Q * dt)
                if key in repeated:
                    cache[key] = E
            U[k + 1] = E @ U[k]
    else:
        rate = float(np.max(-np.diag(Q)))
        dt_max = config.cfl_safety / rate if rate > 0 else np.inf
        if config.dt is not None:
            dt_max = min(dt_max, config.dt)
        for k, dt in enumerate(np.diff(times)):
            steps = max(1, int(np.ceil(dt / dt_max)))
            h = dt / steps
            u = U[k]
            for _ in range(steps):
                u = u + h * (Q @ u)
            U[k + 1] = u
    if not np.all(np.isfinite(U)):
        raise NumericalError("non-finite state encountered during integration")
    U = np.maximum(U, 0.0)  # clip roundoff-level negatives
    meta = {"method": config.method, "checkpoints": config.n_checkpoints(T),
            "graded_start": config.graded_start, "triple": triple.name}
    return Trajectory(times=times, densities=U, flux_rule=_flux_rule(triple), meta=meta)


def continuity_residual(traj: Trajectory, phi_vals, theta, pi) -> float:
    """Largest continuity-equation defect over all checkpoint pairs [s, t].

    The defect on [s, t] is the observable increment of phi against the
    density minus the time-quadratured edge integral of the discrete
    gradient against the flux.
    """
    from .quadrature import cumulative_simpson_nonuniform

    phi_vals = getattr(phi_vals, "values", phi_vals)
    phi_vals = np.asarray(phi_vals, dtype=float)
    theta = np.asarray(theta, dtype=float)
    pi = np.asarray(pi, dtype=float)
    obs = traj.densities @ (phi_vals * pi)
    grad = phi_vals[None, :] - phi_vals[:, None]
    rate = np.array([0.5 * np.sum(grad * traj.flux_at(k) * theta)
                     for k in range(traj.times.size)])
    integral, _ = cumulative_simpson_nonuniform(traj.times, rate)
    defect = (obs - obs[0]) - integral
    return float(np.max(defect) - np.min(defect))


def concatenate(t1: Trajectory, t2: Trajectory) -> Trajectory:
    """Concatenate two trajectories; the joint endpoint densities must match."""
    if t1.n != t2.n:
        raise ValueError("state dimensions differ")
    if not np.array_equal(t1.densities[-1], t2.densities[0]):
        raise ValueError("mismatched endpoint: final density of the first leg "
                         "must equal the initial density of the second")
    times = np.concatenate([t1.times, t1.T + t2.times[1:]])
    densities = np.vstack([t1.densities, t2.densities[1:]])
    store = None
    rule = None
    if t1.flux_store is not None or t2.flux_store is not None or t1.flux_rule is not t2.flux_rule:
        store = np.stack([t1.flux_at(k) for k in range(t1.times.size)]
                         + [t2.flux_at(k) for k in range(1, t2.times.size)])
    else:
        rule = t1.flux_rule
    return Trajectory(times=times, densities=densities, flux_rule=rule, flux_store=store,
                      meta={"concatenated": True})


def rescale_time(traj: Trajectory, forward, inverse, derivative) -> Trajectory:
    """Reparametrize by a strictly increasing map forward: [0, S] -> [0, T].

    The new grid consists of the preimages of the stored checkpoints, the
    density is composed with the map and the flux picks up the map slope,
    which preserves the continuity equation.  ``inverse`` and ``derivative``
    are the inverse map and the slope of ``forward``.
    """
    new_times = np.array([inverse(t) for t in traj.times])
    if np.any(np.diff(new_times) <= 0):
        raise ValueError("time map must be strictly increasing")
    back = np.array([forward(s) for s in new_times])
    if np.max(np.abs(back - traj.times)) > 1e-9 * max(1.0, traj.T):
        raise ValueError("inverse is not consistent with the forward map")
    slopes = np.array([derivative(s) for s in new_times])
    store = np.stack([slopes[k] * traj.flux_at(k) for k in range(traj.times.size)])
    return Trajectory(times=new_times, densities=traj.densities, flux_store=store,
                      meta={"rescaled": True})


# ---------------------------------------------------------------------------
# CSV export, 17 significant digits (exact float round trip)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_csv_text(traj: Trajectory) -> str:
    n = traj.n
    header = "t," + ",".join(f"u_{i}" for i in range(n))
    lines = [header]
    for k, t in enumerate(traj.times):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in traj.densities[k]]))
    return "\n".join(lines) + "\n"


def trajectory_to_csv(traj: Trajectory, path) -> None:
    with open(path, "w") as fh:
        fh.write(trajectory_csv_text(traj))


def trajectory_from_csv(path, triple: Optional[DissipationTriple] = None) -> Trajectory:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("t,"):
        raise ValueError("trajectory CSV must start with a 't,u_0,...' header")
    header = lines[0].split(",")
    n = len(header) - 1
    if header != ["t"] + [f"u_{i}" for i in range(n)]:
        raise ValueError("trajectory CSV header malformed")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != n + 1:
            raise ValueError("trajectory CSV row width does not match header")
        rows.append([float(p) for p in parts])
    data = np.array(rows)
    rule = _flux_rule(triple) if triple is not None else None
    return Trajectory(times=data[:, 0], densities=data[:, 1:], flux_rule=rule)


def flux_csv_text(traj: Trajectory) -> str:
    lines = ["t,i,j,w"]
    for k, t in enumerate(traj.times):
        w = traj.flux_at(k)
        for i in range(traj.n):
            for j in range(traj.n):
                if i != j and w[i, j] != 0.0:
                    lines.append(f"{_fmt(t)},{i},{j},{_fmt(w[i, j])}")
    return "\n".join(lines) + "\n"


def flux_to_csv(traj: Trajectory, path) -> None:
    with open(path, "w") as fh:
        fh.write(flux_csv_text(traj))


def flux_from_csv(path, traj: Trajectory) -> Trajectory:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "t,i,j,w":
        raise ValueError("flux CSV must start with the 't,i,j,w' header")
    store = np.zeros((traj.times.size, traj.n, traj.n))
    index = {_fmt(t): k for k, t in enumerate(traj.times)}
    for ln in lines[1:]:
        t_s, i_s, j_s, w_s = ln.split(",")
        k = index.get(t_s)
        if k is None:
            raise ValueError(f"flux CSV time {t_s} not on the trajectory grid")
        store[k, int(i_s), int(j_s)] = float(w_s)
    return Trajectory(times=traj.times, densities=traj.densities, flux_store=store,
                      meta=dict(traj.meta))
