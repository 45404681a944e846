"""Variational functionals against hand computations and exhaustive oracles."""

import math

import numpy as np
import pytest

from jumpflow.densities import canonical_triple, perspective_psi
from jumpflow.evolution import IntegratorConfig, concatenate, evolve
from jumpflow.functionals import (Upsilon, action_R, dual_R_star, entropy, f_upsilon,
                                  fisher_D, gagliardo_seminorm, luxemburg_norm,
                                  seminorm_equivalence_check, trajectory_L,
                                  trajectory_report)
from jumpflow.measures import PosMeasure, jordan_from_setfunction
from jumpflow.spaces import (build_grid, coupling, fractional_kernel, matrix_kernel,
                             punctured_mask)

COSH = canonical_triple("cosh")
QUAD = canonical_triple("quadratic")


def two_point_system(rate=1.0):
    pts = np.array([0.0, 1.0])
    from jumpflow.spaces import build_graph

    sp = build_graph(pts, np.abs(pts[:, None] - pts[None, :]), np.full(2, 0.5))
    coup = coupling(sp, matrix_kernel([[0.0, rate], [rate, 0.0]]))
    return sp, coup


def test_entropy_values():
    pi = np.full(4, 0.25)
    assert entropy(np.ones(4), pi, COSH.entropy) == 0.0
    assert entropy(np.zeros(4), pi, COSH.entropy) == pytest.approx(1.0)
    pi2 = np.array([0.5, 0.5])
    expected = 0.5 * (2.0 * math.log(2.0) - 2.0 + 1.0) + 0.5 * 1.0
    assert entropy(np.array([2.0, 0.0]), pi2, COSH.entropy) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(math.log(2.0), rel=1e-14)


def test_action_zero_flux():
    _, coup = two_point_system()
    assert action_R(np.array([1.0, 2.0]), np.zeros((2, 2)), COSH, coup.theta) == 0.0


def test_action_recession():
    _, coup = two_point_system()
    u = np.array([2.0, 0.0])     # geometric mean vanishes on the edge
    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert action_R(u, w, COSH, coup.theta) == math.inf
    rep = action_R(u, w, COSH, coup.theta, report=True)
    assert rep.flags["recession_active"]
    # vanishing flux on the degenerate edge is free
    assert action_R(u, np.zeros((2, 2)), COSH, coup.theta) == 0.0


def test_action_matches_perspective_by_hand():
    _, coup = two_point_system(rate=1.0)
    u = np.array([1.0, 4.0])
    w_val = 0.7
    w = np.array([[0.0, w_val], [-w_val, 0.0]])
    val = action_R(u, w, COSH, coup.theta)
    # per ordered edge: perspective psi^(w, alpha) theta; psi even in w
    a = math.sqrt(4.0)
    per_edge = perspective_psi(COSH.pair, w_val, a) * 0.5
    assert val == pytest.approx(0.5 * 2.0 * per_edge, rel=1e-12)


def test_dual_action_values():
    _, coup = two_point_system()
    u = np.ones(2)
    assert dual_R_star(u, np.zeros((2, 2)), COSH, coup.theta) == 0.0
    c = 1.3
    xi = np.full((2, 2), c)
    theta_total = coup.theta.sum()
    expected = 0.5 * COSH.pair.psi_star(c) * theta_total
    assert dual_R_star(u, xi, COSH, coup.theta) == pytest.approx(expected, rel=1e-14)


def test_dual_action_growth_bound():
    # dual action bounded through f* by the quadratic moment of the couplings
    rng = np.random.default_rng(0)
    sp = build_grid(-1.0, 1.0, 12)
    coup = coupling(sp, fractional_kernel(sp, 0.4))
    off = ~np.eye(12, dtype=bool)
    for triple in (COSH, QUAD):
        for _ in range(10):
            u = rng.uniform(0.0, 3.0, 12)
            xi = rng.uniform(-2.0, 2.0, (12, 12))
            xi = 0.5 * (xi + xi.T)
            np.fill_diagonal(xi, 0.0)
            M = np.max(np.abs(xi))
            lhs = dual_R_star(u, xi, triple, coup.theta)
            minus = u[:, None] * coup.theta
            weight = minus + minus.T + coup.theta
            rhs = (triple.flux.c_alpha / (2.0 * M**2) * triple.pair.f_star(M)
                   * float(np.sum(np.where(off, xi**2 * weight, 0.0))))
            assert lhs <= rhs * (1.0 + 1e-12)


def test_fisher_values():
    pi = np.full(3, 1.0 / 3.0)
    theta = np.ones((3, 3)) - np.eye(3)
    assert fisher_D(np.full(3, 0.7), COSH, theta) == 0.0
    # single symmetric edge with theta = 1 in both directions
    theta2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    u = np.array([1.0, 4.0])
    assert fisher_D(u, COSH, theta2) == pytest.approx(2.0, rel=1e-14)
    assert fisher_D(np.array([0.0, 1.0]), QUAD, theta2) == math.inf


def test_fisher_equals_dual_action_at_entropy_gradient():
    rng = np.random.default_rng(1)
    sp = build_grid(-1.0, 1.0, 10)
    coup = coupling(sp, fractional_kernel(sp, 0.5))
    for triple in (COSH, QUAD):
        for _ in range(5):
            u = rng.uniform(0.2, 3.0, 10)
            lam = triple.entropy.dphi(u)
            xi = -(lam[None, :] - lam[:, None])
            assert fisher_D(u, triple, coup.theta) == pytest.approx(
                dual_R_star(u, xi, triple, coup.theta), rel=1e-10)


def test_young_duality_between_action_and_dual():
    rng = np.random.default_rng(2)
    sp = build_grid(-1.0, 1.0, 8)
    coup = coupling(sp, fractional_kernel(sp, 0.5))
    for triple in (COSH, QUAD):
        for _ in range(10):
            u = rng.uniform(0.05, 3.0, 8)
            w = rng.normal(size=(8, 8))
            w = w - w.T
            xi = rng.normal(size=(8, 8))
            np.fill_diagonal(xi, 0.0)
            pairing = 0.5 * float(np.sum(w * xi * coup.theta))
            bound = (action_R(u, w, triple, coup.theta)
                     + dual_R_star(u, xi, triple, coup.theta))
            assert pairing <= bound + 1e-10


def test_trajectory_ledger_stationary():
    sp, coup = two_point_system()
    traj = evolve(coup, COSH, np.full(2, 1.7), 1.0, IntegratorConfig(checkpoints=32))
    series = trajectory_L(traj, COSH, coup.theta, sp.pi)
    # constants are exact fixed points of the flux formula; the integrator
    # leaves only machine-level entropy jitter
    assert np.max(np.abs(series)) <= 1e-14


def test_trajectory_ledger_two_point_closed_form():
    sp, coup = two_point_system(rate=1.0)
    traj = evolve(coup, COSH, np.array([2.0, 0.0]), 2.0, IntegratorConfig(checkpoints=1024))
    series, detail = trajectory_L(traj, COSH, coup.theta, sp.pi, report=True)
    scale = entropy(np.array([2.0, 0.0]), sp.pi, COSH.entropy)
    assert np.max(np.abs(series)) <= 1e-8 * scale
    assert detail["initial_singular"]
    # the energy-dissipation inequality: the ledger never exceeds tolerance
    assert np.max(series) <= 1e-8 * scale


def test_trajectory_report_serializable():
    sp, coup = two_point_system()
    traj = evolve(coup, COSH, np.array([2.0, 0.0]), 0.5, IntegratorConfig(checkpoints=64))
    rep = trajectory_report(traj, COSH, coup.theta, sp.pi)
    payload = rep.to_dict()
    assert payload["flags"]["initial_singular"] is True
    assert len(payload["breakdown"]) == traj.times.size - 1
    import json

    json.dumps(payload)  # strictly JSON-safe


def test_trajectory_ledger_additive_under_concatenation():
    sp, coup = two_point_system()
    cfg = IntegratorConfig(checkpoints=128)
    first = evolve(coup, COSH, np.array([1.5, 0.5]), 0.5, cfg)
    second = evolve(coup, COSH, first.densities[-1], 0.7, cfg)
    joined = concatenate(first, second)
    s1 = trajectory_L(first, COSH, coup.theta, sp.pi)
    s2 = trajectory_L(second, COSH, coup.theta, sp.pi)
    sj = trajectory_L(joined, COSH, coup.theta, sp.pi)
    assert sj[-1] == pytest.approx(s1[-1] + s2[-1], abs=1e-12)


def test_f_upsilon_quadratic():
    quadratic = Upsilon(lambda z: float(np.sum(np.asarray(z) ** 2)), name="quadratic")
    nu = PosMeasure([0.5, 1.0, 2.0])
    mu = jordan_from_setfunction([1.0, -2.0, 3.0])
    expected = sum((m / g) ** 2 * g for m, g in zip([1.0, -2.0, 3.0], [0.5, 1.0, 2.0]))
    assert f_upsilon(mu, nu, quadratic) == pytest.approx(expected, rel=1e-14)
    # superlinear recession: any singular mass is infinitely expensive
    nu0 = PosMeasure([0.5, 0.0, 2.0])
    assert f_upsilon(mu, nu0, quadratic) == math.inf


def test_f_upsilon_vector_valued():
    quadratic2 = Upsilon(lambda z: float(np.sum(np.asarray(z) ** 2)),
                         recession_fn=lambda z: math.inf if np.any(np.asarray(z) != 0) else 0.0)
    nu = PosMeasure([0.5, 2.0])
    mu1 = jordan_from_setfunction([1.0, -1.0])
    mu2 = jordan_from_setfunction([2.0, 4.0])
    expected = ((1.0 / 0.5) ** 2 + (2.0 / 0.5) ** 2) * 0.5 \
        + ((-1.0 / 2.0) ** 2 + (4.0 / 2.0) ** 2) * 2.0
    assert f_upsilon([mu1, mu2], nu, quadratic2) == pytest.approx(expected, rel=1e-14)


def test_f_upsilon_one_homogeneous_independent_of_reference():
    absval = Upsilon(lambda z: float(np.sum(np.abs(z))),
                     recession_fn=lambda z: float(np.sum(np.abs(z))), name="abs")
    rng = np.random.default_rng(3)
    mu = jordan_from_setfunction(rng.normal(size=6))
    for _ in range(5):
        nu = PosMeasure(rng.uniform(0.1, 3.0, 6))
        assert f_upsilon(mu, nu, absval) == pytest.approx(mu.tv(), rel=1e-12)


def test_f_upsilon_jensen_exhaustive():
    # perspective of the value on a set never exceeds the restricted functional
    from jumpflow.measures import restrict, lebesgue_decompose

    upsilons = [
        Upsilon(lambda z: float(np.sum(np.asarray(z) ** 2)),
                recession_fn=lambda z: math.inf if np.any(np.asarray(z) != 0) else 0.0),
        Upsilon(lambda z: float(np.sum(np.abs(z))),
                recession_fn=lambda z: float(np.sum(np.abs(z)))),
        Upsilon(lambda z: float(np.sum(np.sqrt(1.0 + np.asarray(z) ** 2) - 1.0)),
                recession_fn=lambda z: float(np.sum(np.abs(z)))),
    ]
    rng = np.random.default_rng(4)
    for trial in range(40):
        ups = upsilons[trial % len(upsilons)]
        nu = PosMeasure(np.where(rng.random(8) < 0.25, 0.0, rng.uniform(0.1, 2.0, 8)))
        mu = jordan_from_setfunction(rng.normal(size=8))
        total = f_upsilon(mu, nu, ups)
        for bits in range(2**8):
            subset = tuple(i for i in range(8) if bits >> i & 1)
            mu_b = restrict(mu, subset)
            nu_b = PosMeasure(np.where([i in subset for i in range(8)], nu.weights, 0.0))
            _, singular = lebesgue_decompose(mu_b, nu_b)
            ac_mass = mu_b.evaluate() - singular.evaluate()
            lhs = ups.perspective(np.array([ac_mass]), nu_b.mass()) \
                + float(ups.recession(np.array([singular.evaluate()])))
            rhs = f_upsilon(mu_b, nu_b, ups)
            assert lhs <= rhs + 1e-12
            assert rhs <= total + 1e-12


def test_f_upsilon_jointly_convex():
    quadratic = Upsilon(lambda z: float(np.sum(np.asarray(z) ** 2)),
                        recession_fn=lambda z: math.inf if np.any(np.asarray(z) != 0) else 0.0)
    rng = np.random.default_rng(5)
    for _ in range(30):
        mu1 = jordan_from_setfunction(rng.normal(size=6))
        mu2 = jordan_from_setfunction(rng.normal(size=6))
        nu1 = PosMeasure(rng.uniform(0.1, 2.0, 6))
        nu2 = PosMeasure(rng.uniform(0.1, 2.0, 6))
        mid_mu = jordan_from_setfunction(0.5 * (mu1.values + mu2.values))
        mid_nu = PosMeasure(0.5 * (nu1.weights + nu2.weights))
        lhs = f_upsilon(mid_mu, mid_nu, quadratic)
        rhs = 0.5 * (f_upsilon(mu1, nu1, quadratic) + f_upsilon(mu2, nu2, quadratic))
        assert lhs <= rhs + 1e-12


def test_gagliardo_seminorm():
    sp = build_grid(-1.0, 1.0, 16)
    coup = coupling(sp, fractional_kernel(sp, 0.75))
    assert gagliardo_seminorm(np.ones(16), coup.theta) == 0.0
    step = (sp.points > 0).astype(float)
    # full singular kernel charges the jump; the punctured one does not
    assert gagliardo_seminorm(step, coup.theta) > 0.0
    masked = coupling(sp, fractional_kernel(sp, 0.75, mask=punctured_mask(sp, 0.0)))
    assert gagliardo_seminorm(step, masked.theta) == 0.0


def test_gagliardo_lipschitz_bound():
    sp = build_grid(-1.0, 1.0, 16)
    coup = coupling(sp, fractional_kernel(sp, 0.6))
    phi = 0.3 * sp.points
    grad = phi[None, :] - phi[:, None]
    clamp = np.minimum(1.0, sp.dist)
    lip = np.max(np.abs(grad[clamp > 0] / clamp[clamp > 0]))
    moment = float(np.sum(np.minimum(1.0, sp.dist**2) * coup.theta))
    assert gagliardo_seminorm(phi, coup.theta) <= lip**2 * moment + 1e-12


def test_luxemburg_norm():
    theta = np.array([[0.0, 1.0], [0.0, 0.0]])
    young = lambda x: 0.5 * np.asarray(x) ** 2
    zeta = np.array([[0.0, 2.0], [0.0, 0.0]])
    assert luxemburg_norm(np.zeros((2, 2)), young, theta) == 0.0
    # solve Y(2/l) = 1  =>  l = sqrt 2
    assert luxemburg_norm(zeta, young, theta) == pytest.approx(math.sqrt(2.0), rel=1e-9)
    for c in (0.1, 3.0, 17.0):
        assert luxemburg_norm(c * zeta, young, theta) == pytest.approx(
            c * math.sqrt(2.0), rel=1e-9)


def test_test_function_wrapper():
    from jumpflow.functionals import TestFunction

    sp = build_grid(-1.0, 1.0, 8)
    coup = coupling(sp, fractional_kernel(sp, 0.6))
    tf = TestFunction(np.clip(sp.points, -1, 1))
    assert tf.in_x2(coup.theta)
    first = tf.seminorm(coup.theta)
    assert first == pytest.approx(gagliardo_seminorm(tf.values, coup.theta))
    assert tf.seminorm(coup.theta) == first
    with pytest.raises(ValueError):
        TestFunction([1.0, np.inf])


def test_seminorm_equivalence():
    sp = build_grid(-1.0, 1.0, 12)
    coup = coupling(sp, fractional_kernel(sp, 0.6))
    const = seminorm_equivalence_check(np.full(12, 2.5), COSH.pair, coup.theta)
    assert const["g2"] == 0.0 and const["gpsi"] == 0.0
    rng = np.random.default_rng(6)
    phi = rng.uniform(-1.0, 1.0, 12)
    rep = seminorm_equivalence_check(phi, COSH.pair, coup.theta)
    assert rep["both_finite"] and rep["upper_ok"] and rep["lower_ok"]
    rep10 = seminorm_equivalence_check(10.0 * phi, COSH.pair, coup.theta)
    assert rep10["both_finite"] == rep["both_finite"]
