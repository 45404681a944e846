"""Discretized state spaces, singular jump kernels and their couplings.

Kernels are dense rate matrices over a finite point set; singular radial
profiles are discretized by the midpoint rule with the diagonal excluded.
Detailed balance is enforced at the coupling level by symmetrizing theta,
never by touching the raw rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StateSpace",
    "Kernel",
    "Coupling",
    "build_grid",
    "build_torus",
    "build_graph",
    "fractional_kernel",
    "matrix_kernel",
    "radial_kernel",
    "punctured_mask",
    "cutoff",
    "coupling",
    "taming_bound",
    "theta_rho",
    "nu_rho",
    "space_to_dict",
    "space_from_dict",
    "kernel_to_dict",
    "kernel_from_dict",
]


@dataclass(frozen=True)
class StateSpace:
    """Finite metric measure space: points, metric table and reference weights."""

    points: np.ndarray      # (n,) coordinates, or arbitrary ids as floats
    dist: np.ndarray        # (n, n) metric values
    pi: np.ndarray          # (n,) strictly positive reference weights
    kind: str = "graph"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        d = np.asarray(self.dist, dtype=float)
        p = np.asarray(self.pi, dtype=float)
        n = pts.shape[0]
        if d.shape != (n, n):
            raise ValueError("metric table shape mismatch")
        if p.shape != (n,) or np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise ValueError("reference weights must be positive and finite")
        if np.any(np.diag(d) != 0) or np.any(d < 0):
            raise ValueError("metric must be nonnegative with zero diagonal")
        if not np.allclose(d, d.T, rtol=0, atol=0):
            raise ValueError("metric must be symmetric")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "pi", p)
        for arr in (self.points, self.dist, self.pi):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def pi_total(self) -> float:
        return float(self.pi.sum())

    def check_triangle(self, samples: int = 200, seed: int = 0, tol: float = 1e-12) -> bool:
        rng = np.random.default_rng(seed)
        i, j, k = rng.integers(0, self.n, (3, samples))
        return bool(np.all(self.dist[i, k] <= self.dist[i, j] + self.dist[j, k] + tol))


@dataclass(frozen=True)
class Kernel:
    """Jump rates kappa_ij >= 0 with zero diagonal, plus an origin descriptor."""

    rates: np.ndarray
    descriptor: dict = field(default_factory=lambda: {"type": "matrix"})

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("rates must form a square matrix")
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("rates must be nonnegative and finite")
        if np.any(np.diag(r) != 0):
            r = r.copy()
            np.fill_diagonal(r, 0.0)
        object.__setattr__(self, "rates", r)
        self.rates.setflags(write=False)

    @property
    def n(self) -> int:
        return self.rates.shape[0]


@dataclass(frozen=True)
class Coupling:
    """Symmetrized edge coupling theta_ij = pi_i kappa_ij."""

    theta: np.ndarray
    detailed_balance_residual: float
    pi: np.ndarray

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def kernel_rates(self) -> np.ndarray:
        """Rates re-derived from the symmetrized coupling, theta_ij / pi_i."""
        return self.theta / self.pi[:, None]


def build_grid(a: float, b: float, n: int) -> StateSpace:
    """Uniform midpoint grid on [a, b] with pi_i = h and the Euclidean metric."""
    if not (a < b) or n < 2:
        raise ValueError("need a < b and n >= 2")
    h = (b - a) / n
    x = a + (np.arange(n) + 0.5) * h
    dist = np.abs(x[:, None] - x[None, :])
    return StateSpace(points=x, dist=dist, pi=np.full(n, h), kind="grid",
                      meta={"a": float(a), "b": float(b), "h": h})


def build_torus(n: int) -> StateSpace:
    """Periodic unit-length grid with the wrap-around metric min(|dx|, 1 - |dx|)."""
    if n < 2:
        raise ValueError("need n >= 2")
    x = np.arange(n) / n
    raw = np.abs(x[:, None] - x[None, :])
    dist = np.minimum(raw, 1.0 - raw)
    return StateSpace(points=x, dist=dist, pi=np.full(n, 1.0 / n), kind="torus", meta={})


def build_graph(points, dist, pi) -> StateSpace:
    return StateSpace(points=np.asarray(points, float), dist=np.asarray(dist, float),
                      pi=np.asarray(pi, float), kind="graph")


def punctured_mask(space: StateSpace, split: float = 0.0) -> np.ndarray:
    """Indicator of pairs lying on the same side of the split coordinate."""
    x = space.points
    if split <= x.min() or split >= x.max():
        raise ValueError("split must lie strictly inside the coordinate range")
    left = x < split
    right = x > split
    return ((left[:, None] & left[None, :]) | (right[:, None] & right[None, :])).astype(float)


def fractional_kernel(space: StateSpace, s: float, mask=None) -> Kernel:
    """Midpoint-rule discretization of the radial profile |x - y|^(-(1+2s)).

    Rates are kappa_ij = a(x_i, x_j) d_ij^(-(1+2s)) pi_j with zero diagonal.
    """
    if not (0.0 < s < 1.0):
        raise ValueError("fractional exponent must lie in (0, 1)")
    d = space.dist.copy()
    np.fill_diagonal(d, 1.0)  # placeholder, diagonal zeroed below
    rates = d ** (-(1.0 + 2.0 * s)) * space.pi[None, :]
    if mask is not None:
        rates = rates * np.asarray(mask, dtype=float)
    np.fill_diagonal(rates, 0.0)
    desc = {"type": "fractional", "s": float(s), "masked": mask is not None}
    return Kernel(rates=rates, descriptor=desc)


def matrix_kernel(rates) -> Kernel:
    return Kernel(rates=np.asarray(rates, dtype=float), descriptor={"type": "matrix"})


def radial_kernel(space: StateSpace, profile, mask=None, name="custom") -> Kernel:
    """Midpoint-rule discretization of an arbitrary radial rate profile.

    ``profile(r)`` gives the rate density at distance r > 0; the diagonal is
    excluded, so singular profiles are admissible.
    """
    d = space.dist.copy()
    np.fill_diagonal(d, 1.0)
    rates = profile(d) * space.pi[None, :]
    if mask is not None:
        rates = rates * np.asarray(mask, dtype=float)
    np.fill_diagonal(rates, 0.0)
    return Kernel(rates=rates, descriptor={"type": name})


def cutoff(kernel: Kernel, space: StateSpace, eps: float) -> Kernel:
    """Bounded regularization kappa_ij (1 ^ d^2) / (eps + 1 ^ d^2)."""
    if eps <= 0:
        raise ValueError("cutoff parameter must be positive")
    d2 = np.minimum(1.0, space.dist**2)
    rates = kernel.rates * d2 / (eps + d2)
    desc = dict(kernel.descriptor)
    desc["cutoff_eps"] = float(eps)
    return Kernel(rates=rates, descriptor=desc)


def coupling(space: StateSpace, kernel: Kernel) -> Coupling:
    """Edge coupling theta = pi_i kappa_ij, symmetrized to enforce detailed balance.

    The residual max |theta - theta^T| is reported before symmetrization.
    """
    theta = space.pi[:, None] * kernel.rates
    residual = float(np.max(np.abs(theta - theta.T)))
    theta = 0.5 * (theta + theta.T)
    np.fill_diagonal(theta, 0.0)
    return Coupling(theta=theta, detailed_balance_residual=residual, pi=space.pi.copy())


def taming_bound(space: StateSpace, kernel: Kernel) -> float:
    """sup_i sum_j (1 ^ d_ij^2) kappa_ij, the metric-kernel compatibility constant."""
    d2 = np.minimum(1.0, space.dist**2)
    return float(np.max(np.sum(d2 * kernel.rates, axis=1)))


def theta_rho(coup: Coupling, u):
    """Density-adjusted couplings (theta_minus, theta_plus) = (u_i theta, u_j theta)."""
    u = np.asarray(u, dtype=float)
    minus = u[:, None] * coup.theta
    return minus, minus.T.copy()


def nu_rho(coup: Coupling, flux, u) -> np.ndarray:
    """Concave transformation nu_ij = alpha(u_i, u_j) theta_ij."""
    u = np.asarray(u, dtype=float)
    return flux.alpha(u[:, None], u[None, :]) * coup.theta


# ---------------------------------------------------------------------------
# JSON schema (versioned, round-trip exact via repr-floats)


def space_to_dict(space: StateSpace) -> dict:
    return {
        "schema": 1,
        "kind": space.kind,
        "points": space.points.tolist(),
        "dist": space.dist.tolist(),
        "pi": space.pi.tolist(),
        "meta": space.meta,
    }


def space_from_dict(d: dict) -> StateSpace:
    if d.get("schema") != 1:
        raise ValueError("unsupported space schema")
    return StateSpace(points=np.array(d["points"], float), dist=np.array(d["dist"], float),
                      pi=np.array(d["pi"], float), kind=d.get("kind", "graph"),
                      meta=d.get("meta", {}))


def kernel_to_dict(kernel: Kernel) -> dict:
    return {"schema": 1, "rates": kernel.rates.tolist(), "descriptor": kernel.descriptor}


def kernel_from_dict(d: dict) -> Kernel:
    if d.get("schema") != 1:
        raise ValueError("unsupported kernel schema")
    return Kernel(rates=np.array(d["rates"], float), descriptor=d.get("descriptor", {"type": "matrix"}))
