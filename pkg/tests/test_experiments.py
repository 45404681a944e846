"""Sweep, reflecting scenario, ramp probe, configuration-space lift, W2."""

import numpy as np
import pytest

from jumpflow.densities import canonical_triple
from jumpflow.evolution import IntegratorConfig
from jumpflow.experiments import (build_lift, default_probe_deltas, density_gap_probe,
                                  key_estimate_check, reflecting_scenario,
                                  robustness_sweep, uniqueness_probe, w2_exact)
from jumpflow.ledger import edb_report
from jumpflow.spaces import (build_graph, build_grid, coupling, fractional_kernel,
                             matrix_kernel)

COSH = canonical_triple("cosh")


def test_sweep_bounded_kernel_gaps_collapse():
    # no singularity: once eps is far below min d^2 the cutoffs are all
    # essentially the identity and the terminal states coincide
    pts = np.array([0.0, 1.0, 2.0, 3.0])
    sp = build_graph(pts, np.abs(pts[:, None] - pts[None, :]), np.full(4, 0.25))
    rng = np.random.default_rng(0)
    rates = rng.random((4, 4))
    rates = 0.5 * (rates + rates.T)
    np.fill_diagonal(rates, 0.0)
    kern = matrix_kernel(rates)
    u0 = np.array([2.0, 0.5, 1.0, 0.5])
    res = robustness_sweep(sp, kern, COSH, [1e-2, 1e-4, 1e-6, 1e-8], u0, 0.5,
                           IntegratorConfig(checkpoints=64))
    assert res.gaps[-1] <= 1e-6
    assert np.all(np.diff(res.gaps) < 0)


def test_sweep_stationary_all_gaps_zero():
    sp = build_grid(-1.0, 1.0, 10)
    kern = fractional_kernel(sp, 0.6)
    res = robustness_sweep(sp, kern, COSH, [1e-1, 1e-2, 1e-3], np.full(10, 1.3), 0.2,
                           IntegratorConfig(checkpoints=32))
    assert np.max(res.gaps) <= 1e-12


def test_sweep_fractional_punctured_decreasing():
    from jumpflow.spaces import punctured_mask

    sp = build_grid(-1.0, 1.0, 40)
    kern = fractional_kernel(sp, 0.75, mask=punctured_mask(sp, 0.0))
    u0 = 1.0 + 0.8 * np.sin(np.pi * sp.points) * (sp.points < 0) + 0.3 * (sp.points > 0)
    res = robustness_sweep(sp, kern, COSH, [1e-1, 1e-2, 1e-3, 1e-4], u0, 0.5,
                           IntegratorConfig(checkpoints=128))
    assert np.all(np.diff(res.gaps) < 0)
    assert np.all(res.gap_ratios() >= 2.0)


def test_sweep_rejects_increasing_eps():
    sp = build_grid(-1.0, 1.0, 8)
    kern = fractional_kernel(sp, 0.6)
    with pytest.raises(ValueError):
        robustness_sweep(sp, kern, COSH, [1e-3, 1e-2], np.ones(8), 0.1)


def test_reflecting_scenario_masses_and_equilibration():
    n = 40
    sp = build_grid(-1.0, 1.0, n)
    u0 = np.where(sp.points < 0.0, 2.0, 0.0)
    out = reflecting_scenario(n, 0.75, 0.0, u0, 6.0, COSH,
                              IntegratorConfig(checkpoints=256))
    assert out["mass_right_drift"] <= 1e-12
    assert out["mass_left_drift"] <= 1e-12 * 2.0
    # componentwise ergodicity: flat at 2 on the left, 0 on the right
    assert out["terminal_gap"] <= 1e-3
    ent = out["entropy_curve"]
    assert np.all(np.diff(ent) <= 1e-12)
    assert ent[-1] == pytest.approx(out["entropy_at_equilibrium"], abs=1e-6)


def test_probe_windows():
    d = default_probe_deltas(0.75)
    assert np.all((d >= 1e-3) & (d <= 1e-1))


@pytest.mark.slow
def test_probe_slope_grid_stable():
    # doubling the grid moves the fitted slope by at most 0.02
    for s in (0.6, 0.9):
        s1 = density_gap_probe(s, n=4096).slope
        s2 = density_gap_probe(s, n=8192).slope
        assert abs(s1 - s2) <= 0.02, (s, s1, s2)


@pytest.mark.slow
def test_probe_small_grid_wiring():
    res = density_gap_probe(0.75, deltas=[0.2, 0.1, 0.05], n=256)
    assert res.slope is not None and res.slope < 0
    res_low = density_gap_probe(0.25, deltas=[0.2, 0.1, 0.05], n=256)
    assert res_low.tail_relative_change is not None


def test_probe_rejects_coarse_grid():
    with pytest.raises(ValueError):
        density_gap_probe(0.75, deltas=[1e-3], n=64)


def test_probe_masked_kernel():
    # the punctured mask removes all cross-component pairs; the ramp seminorm
    # stays finite and strictly below the unmasked one
    plain = density_gap_probe(0.75, deltas=[0.1, 0.05], n=256)
    masked = density_gap_probe(0.75, deltas=[0.1, 0.05], n=256, masked=True)
    assert np.all(np.isfinite(masked.seminorms))
    assert np.all(masked.seminorms < plain.seminorms)


def test_w2_basics():
    d = np.array([[0.0, 2.0], [2.0, 0.0]])
    """equal distributions have zero cost"""
    assert w2_exact([0.5, 0.5], [0.5, 0.5], d**2) == 0.0
    # two point masses at distance d: full transport
    assert w2_exact([1.0, 0.0], [0.0, 1.0], d**2) == pytest.approx(4.0, abs=1e-12)
    with pytest.raises(ValueError):
        w2_exact([1.0, 0.0], [0.3, 0.3], d**2)


def test_w2_jump_example():
    # two particles at {0, 1}; one jumps from 0 to 1: cost d^2 / N exactly
    d2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    nu = np.array([0.5, 0.5])
    eta = np.array([0.0, 1.0])
    assert w2_exact(nu, eta, d2) == pytest.approx(0.5, abs=1e-14)


def test_w2_matches_sorted_coupling_on_line():
    # on the line the optimal quadratic-cost plan is the monotone rearrangement
    rng = np.random.default_rng(1)
    x = np.sort(rng.uniform(-1, 1, 5))
    c2 = (x[:, None] - x[None, :]) ** 2
    for _ in range(10):
        a_cnt = rng.integers(1, 4, 5)
        b_cnt = rng.permutation(a_cnt)
        total = a_cnt.sum()
        lp = w2_exact(a_cnt / total, b_cnt / total, c2)
        # quantile-coupling oracle on the integer-mass quantization
        qa = np.repeat(x, a_cnt)
        qb = np.repeat(x, b_cnt)
        oracle = float(np.mean((qa - qb) ** 2))
        assert lp == pytest.approx(oracle, abs=1e-10)


def test_lift_single_particle_is_base():
    base = build_grid(0.0, 1.0, 3)
    kern = fractional_kernel(base, 0.6)
    lifted = build_lift(base, kern, 1)
    assert lifted.n_configs == 3
    np.testing.assert_allclose(lifted.space.pi, base.pi, rtol=1e-14)
    np.testing.assert_allclose(lifted.kernel.rates, kern.rates, rtol=1e-14)
    np.testing.assert_allclose(lifted.space.dist, base.dist, rtol=1e-12, atol=1e-12)


def test_lift_two_by_two():
    base = build_grid(0.0, 1.0, 2)
    kern = fractional_kernel(base, 0.6)
    lifted = build_lift(base, kern, 2)
    assert lifted.n_configs == 3
    p, q = base.pi
    # multinomial pushforward of the product measure
    weights = {c: w for c, w in zip(lifted.configs, lifted.space.pi)}
    assert weights[(2, 0)] == pytest.approx(p * p, rel=1e-14)
    assert weights[(1, 1)] == pytest.approx(2 * p * q, rel=1e-14)
    assert weights[(0, 2)] == pytest.approx(q * q, rel=1e-14)
    assert lifted.space.pi.sum() == pytest.approx(base.pi.sum() ** 2, rel=1e-14)
    # detailed balance of the lifted coupling
    theta_hat = lifted.space.pi[:, None] * lifted.kernel.rates
    assert np.max(np.abs(theta_hat - theta_hat.T)) <= 1e-12


def test_lift_key_estimate():
    base = build_grid(0.0, 1.0, 3)
    kern = fractional_kernel(base, 0.6)
    for N in (1, 2, 3):
        lifted = build_lift(base, kern, N)
        verdict = key_estimate_check(lifted)
        assert verdict["ok"], verdict
    # N = 1 jumps meet the bound with equality
    lifted1 = build_lift(base, kern, 1)
    v1 = key_estimate_check(lifted1)
    assert v1["max_excess"] == pytest.approx(0.0, abs=1e-12)


def test_lift_equality_case_two_particles():
    base = build_grid(0.0, 1.0, 2)
    kern = fractional_kernel(base, 0.6)
    lifted = build_lift(base, kern, 2)
    k_from = lifted.index[(1, 1)]
    k_to = lifted.index[(0, 2)]
    d = base.dist[0, 1]
    assert lifted.space.dist[k_from, k_to] ** 2 == pytest.approx(d**2 / 2.0, rel=1e-12)


def test_lift_size_cap():
    base = build_grid(0.0, 1.0, 6)
    kern = fractional_kernel(base, 0.6)
    with pytest.raises(ValueError):
        build_lift(base, kern, 5, max_configs=10)


def test_lifted_system_evolves_with_balance():
    base = build_grid(0.0, 1.0, 2)
    kern = fractional_kernel(base, 0.6)
    lifted = build_lift(base, kern, 2)
    coup = coupling(lifted.space, lifted.kernel)
    from jumpflow.evolution import evolve

    u0 = np.array([2.0, 0.5, 0.5])
    traj = evolve(coup, COSH, u0, 0.5, IntegratorConfig(checkpoints=256))
    rep = edb_report(traj, COSH, coup.theta, lifted.space.pi, tol_rel=1e-6)
    assert rep.edb_ok
    assert rep.invariants["mass_ok"]


def test_uniqueness_probe_small():
    pts = np.array([0.0, 1.0])
    sp = build_graph(pts, np.abs(pts[:, None] - pts[None, :]), np.full(2, 0.5))
    coup = coupling(sp, matrix_kernel([[0.0, 1.0], [1.0, 0.0]]))
    out = uniqueness_probe(coup, COSH, np.full(2, 1.4), 0.5, checkpoints=32)
    assert out["max_gap"] <= 1e-12
    out2 = uniqueness_probe(coup, COSH, np.array([2.0, 0.0]), 1.0,
                            checkpoints=64, euler_dt=1e-5)
    g = np.exp(-2.0 * out2["expm"].times)
    oracle = np.stack([1.0 + g, 1.0 - g], axis=1)
    assert np.max(np.abs(out2["expm"].densities - oracle)) <= 1e-6
    assert np.max(np.abs(out2["euler"].densities - oracle)) <= 1e-4
