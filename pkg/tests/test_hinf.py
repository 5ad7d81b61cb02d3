import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_continuous_are
from scipy.optimize import brentq

from bimorph_ao import hinf
from bimorph_ao.hinf import (HinfController, InfeasibleError, SynthesisError, coupling_check,
                             gamma_bisect, hinf_norm, solve_dual_riccati, solve_game_riccati)
from bimorph_ao.plant import StandardPlant


def regular_plant(A, Bw, B2, Cz, C2, seed=None):
    """Plant with orthogonal D12 = [0; I] and D21 = [0, I] blocks."""
    n = A.shape[0]
    mw, mu, pz, py = Bw.shape[1], B2.shape[1], Cz.shape[0], C2.shape[0]
    B1 = np.hstack([Bw, np.zeros((n, py))])
    C1 = np.vstack([Cz, np.zeros((mu, n))])
    D12 = np.vstack([np.zeros((pz, mu)), np.eye(mu)])
    D21 = np.hstack([np.zeros((py, mw)), np.eye(py)])
    return StandardPlant(A, B1, B2, C1, D12, C2, D21, n_b=0, n_z=0)


def random_plant(rng, n):
    A = rng.standard_normal((n, n)) - rng.uniform(0.0, 1.0) * np.eye(n)
    mw, mu, p = rng.integers(1, 4, size=3)
    return regular_plant(A, rng.standard_normal((n, mw)), rng.standard_normal((n, mu)),
                         rng.standard_normal((rng.integers(1, 4), n)), rng.standard_normal((p, n)))


def test_scalar_riccati_closed_form():
    c = solve_game_riccati(np.array([[-1.0]]), np.zeros((1, 1)), np.eye(1), np.eye(1), 1.0)
    assert c.P[0, 0] == pytest.approx(np.sqrt(2) - 1, abs=1e-10)
    assert c.stable and c.residual_norm < 1e-14


def test_scalar_dual_closed_form():
    c = solve_dual_riccati(np.array([[-1.0]]), np.eye(1), np.zeros((1, 1)), np.eye(1), 1.0)
    assert c.P[0, 0] == pytest.approx(np.sqrt(2) - 1, abs=1e-10)


@pytest.mark.parametrize("method", ["real", "complex"])
def test_unstable_scalar(method):
    # 2X + X^2 (g^-2 - 1) + 1 = 0 with g = 2: X = (2 + sqrt(4 + 3)) / 1.5
    c = solve_game_riccati(np.array([[1.0]]), np.eye(1), np.eye(1), np.eye(1), 2.0, method)
    assert c.P[0, 0] == pytest.approx((2 + np.sqrt(7)) / 1.5, rel=1e-12)


def test_no_disturbance_is_gamma_independent():
    rng = np.random.default_rng(3)
    A, B2, C1 = rng.standard_normal((4, 4)), rng.standard_normal((4, 2)), rng.standard_normal((2, 4))
    B1 = np.zeros((4, 1))
    X1 = solve_game_riccati(A, B1, B2, C1, 0.1).P
    X2 = solve_game_riccati(A, B1, B2, C1, 100.0).P
    np.testing.assert_allclose(X1, X2, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(X1, solve_continuous_are(A, B2, C1.T @ C1, np.eye(2)), rtol=1e-9)


def test_riccati_certification_random_plants():
    rng = np.random.default_rng(2024)
    accepted = 0
    for _ in range(100):
        n = int(rng.integers(1, 13))
        A = rng.standard_normal((n, n))
        B1, B2 = rng.standard_normal((n, 2)), rng.standard_normal((n, 2))
        C1 = rng.standard_normal((2, n))
        c = solve_game_riccati(A, B1, B2, C1, 5.0)
        if c.feasible:
            accepted += 1
            assert c.residual_norm <= 1e-8
            assert c.stable
    assert accepted >= 50


def test_dual_is_transposed_primal():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((5, 5))
    B1, C1, C2 = rng.standard_normal((5, 2)), rng.standard_normal((3, 5)), rng.standard_normal((2, 5))
    Y = solve_dual_riccati(A, B1, C1, C2, 4.0).P
    Xt = solve_game_riccati(A.T, C1.T, C2.T, B1.T, 4.0).P
    np.testing.assert_array_equal(Y, Xt.T)


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_real_and_complex_schur_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 8))
    A = rng.standard_normal((n, n))
    B1, B2, C1 = rng.standard_normal((n, 1)), rng.standard_normal((n, 2)), rng.standard_normal((2, n))
    a = solve_game_riccati(A, B1, B2, C1, 10.0, "real")
    b = solve_game_riccati(A, B1, B2, C1, 10.0, "complex")
    assert a.feasible == b.feasible
    if a.feasible:
        np.testing.assert_allclose(a.P, b.P, rtol=1e-8, atol=1e-9 * np.abs(a.P).max())


def test_infeasible_below_threshold():
    # X: -2X + g^-2 X^2 + 1 = 0 has real roots only for g >= 1
    A, B1, B2, C1 = -np.eye(1), np.eye(1), np.zeros((1, 1)), np.eye(1)
    assert solve_game_riccati(A, B1, B2, C1, 1.01).feasible
    bad = solve_game_riccati(A, B1, B2, C1, 0.99)
    assert not bad.feasible and "imaginary axis" in bad.reason


def test_coupling_check_cases():
    assert coupling_check(np.zeros((2, 2)), np.eye(2), 1.0) == {"rho": 0.0, "ok": True}
    assert not coupling_check(np.eye(1), np.eye(1), 1.0)["ok"]
    rng = np.random.default_rng(7)
    B = rng.standard_normal((4, 4)); C = rng.standard_normal((4, 4))
    P, Q = B @ B.T, C @ C.T
    rho = np.abs(np.linalg.eigvals(P @ Q)).max()
    assert coupling_check(P, Q, 1.0)["rho"] == pytest.approx(rho, rel=1e-10)


# gamma iteration on scalar plants with closed-form answers

def scalar_plant(a, b1, c1, b2=0.0, c2=0.0):
    return regular_plant(np.array([[a]]), np.array([[b1]]), np.array([[b2]]),
                         np.array([[c1]]), np.array([[c2]]))


def test_bisection_disturbance_only_plant():
    # B2 = C2 = 0: both Riccati equations lose real roots at b1 c1 / |a|
    a, b1, c1 = -2.0, 3.0, 0.5
    res = gamma_bisect(scalar_plant(a, b1, c1), 1e-2, 10.0, tol=1e-4)
    assert res["gamma"] == pytest.approx(b1 * c1 / abs(a), rel=1e-3)
    assert res["lower"] <= b1 * c1 / abs(a) <= res["gamma"]


def _scalar_root(a, q, r):
    """Stabilizing root of 2 a x + r x^2 + q = 0 (or None)."""
    if r == 0:
        return -q / (2 * a) if a < 0 else None
    disc = a * a - r * q
    if disc <= 0:
        return None
    x = (-a - np.sqrt(disc)) / r
    return x if x >= 0 and a + r * x < 0 else None


def _scalar_feasible(g, a, b1, c1, b2, c2):
    X = _scalar_root(a, c1 * c1, b1 * b1 / g**2 - b2 * b2)
    Y = _scalar_root(a, b1 * b1, c1 * c1 / g**2 - c2 * c2)
    return X is not None and Y is not None and X * Y < g * g


@pytest.mark.parametrize("a, b1, c1, b2, c2", [(1.0, 1.0, 1.0, 1.0, 1.0), (-0.5, 2.0, 1.0, 0.7, 1.3),
                                               (3.0, 0.4, 2.0, 2.0, 0.5)])
def test_bisection_against_scalar_closed_form(a, b1, c1, b2, c2):
    g = np.geomspace(1e-3, 1e3, 4000)
    feas = np.array([_scalar_feasible(v, a, b1, c1, b2, c2) for v in g])
    k = int(np.argmax(feas))
    assert feas[k:].all()
    g_opt = brentq(lambda v: 1.0 if _scalar_feasible(v, a, b1, c1, b2, c2) else -1.0,
                   g[k - 1], g[k], xtol=1e-14)
    res = gamma_bisect(scalar_plant(a, b1, c1, b2, c2), 1e-3, 100.0, tol=1e-5)
    assert res["gamma"] == pytest.approx(g_opt, rel=1e-3)


def test_feasibility_monotone_above_optimum():
    rng = np.random.default_rng(11)
    p = random_plant(rng, 5)
    res = gamma_bisect(p, 1e-3, 10.0, tol=1e-4)
    for g in res["gamma"] * np.geomspace(1.001, 1e4, 25):
        assert hinf.check_gamma(p, g)[0]


@pytest.mark.parametrize("seed", range(6))
def test_closed_loop_norm_below_gamma(seed):
    rng = np.random.default_rng(seed)
    p = random_plant(rng, int(rng.integers(2, 7)))
    res = gamma_bisect(p, 1e-3, 10.0, tol=1e-3)
    for g in (res["gamma"], 1.5 * res["gamma"]):
        K = hinf.synthesize(p, g)
        assert hinf.closed_loop_hinf_norm(p, K) <= g * (1 + 1e-6)


def test_large_gamma_limit_is_lqg():
    A = np.array([[0.0, 1.0], [2.0, -1.0]])
    Bw = np.array([[0.0], [1.0]])
    B2 = np.array([[0.0], [1.0]])
    Cz = np.array([[1.0, 0.0]])
    C2 = np.array([[1.0, 0.0]])
    p = regular_plant(A, Bw, B2, Cz, C2)
    K = hinf.synthesize(p, 1e8)
    X = solve_continuous_are(A, B2, Cz.T @ Cz, np.eye(1))
    Y = solve_continuous_are(A.T, C2.T, Bw @ Bw.T, np.eye(1))
    expected = np.concatenate([np.linalg.eigvals(A - B2 @ B2.T @ X),
                               np.linalg.eigvals(A - Y @ C2.T @ C2)])
    got = np.linalg.eigvals(hinf.closed_loop(p, K)[0])
    assert np.sort_complex(got) == pytest.approx(np.sort_complex(expected), rel=1e-6, abs=1e-9)


def test_controller_converges_as_gamma_grows():
    p = random_plant(np.random.default_rng(4), 4)
    M6, M7 = hinf.synthesize(p, 1e6).M, hinf.synthesize(p, 1e7).M
    assert np.linalg.norm(M6 - M7) <= 1e-6 * np.linalg.norm(M6)


def test_non_orthogonal_plant_rejected():
    p = scalar_plant(-1.0, 1.0, 1.0, 1.0, 1.0)
    C1 = p.C1.copy(); C1[1, 0] = 0.3
    bad = StandardPlant(p.A, p.B1, p.B2, C1, p.D12, p.C2, p.D21, 0, 0)
    with pytest.raises(SynthesisError):
        hinf.synthesize(bad, 10.0)


def test_infeasible_gamma_reports_conditions():
    p = scalar_plant(-2.0, 3.0, 0.5)
    with pytest.raises(InfeasibleError) as info:
        hinf.synthesize(p, 0.5)
    assert hinf.failing_conditions(info.value.diagnostics)


def test_bisection_respects_cap():
    p = scalar_plant(-2.0, 3.0, 0.5)
    with pytest.raises(InfeasibleError):
        gamma_bisect(p, 1e-3, 0.1, cap=0.5)


def test_controller_json_round_trip():
    p = scalar_plant(1.0, 1.0, 1.0, 1.0, 1.0)
    K = hinf.synthesize(p, 5.0)
    K.certs.pop("_P"), K.certs.pop("_Q")
    back = HinfController.from_json(K.to_json())
    for name in "MNLR":
        np.testing.assert_array_equal(getattr(back, name), getattr(K, name))
    assert back.gamma == K.gamma


# H-infinity norm

def test_norm_static_gain():
    assert hinf_norm(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), np.array([[3.0]])) == 3.0


def test_norm_first_order_lag():
    assert hinf_norm(-np.eye(1), np.eye(1), np.eye(1), np.zeros((1, 1))) == pytest.approx(1.0, rel=1e-6)


def test_norm_resonance():
    w0, zeta = 10.0, 0.01
    A = np.array([[0.0, 1.0], [-w0**2, -2 * zeta * w0]])
    g, w = hinf_norm(A, np.array([[0.0], [1.0]]), np.array([[1.0, 0.0]]), np.zeros((1, 1)),
                     return_frequency=True)
    peak = 1 / (2 * zeta * np.sqrt(1 - zeta**2) * w0**2)
    assert g == pytest.approx(peak, rel=1e-4)
    assert w == pytest.approx(w0 * np.sqrt(1 - 2 * zeta**2), rel=1e-3)


@pytest.mark.parametrize("seed", range(5))
def test_norm_against_frequency_sweep(seed):
    rng = np.random.default_rng(seed)
    n = 4
    A = rng.standard_normal((n, n))
    A -= (np.max(np.linalg.eigvals(A).real) + 0.1) * np.eye(n)
    B, C, D = rng.standard_normal((n, 2)), rng.standard_normal((2, n)), 0.1 * rng.standard_normal((2, 2))
    w = np.geomspace(1e-3, 1e3, 20000)
    sweep = max(hinf.sigma_max(A, B, C, D, v) for v in np.concatenate([[0.0], w]))
    got = hinf_norm(A, B, C, D)
    assert got >= sweep * (1 - 1e-9)
    assert got == pytest.approx(sweep, rel=1e-3)


def test_norm_rejects_unstable():
    with pytest.raises(ValueError):
        hinf_norm(np.eye(1), np.eye(1), np.eye(1), np.zeros((1, 1)))


# default adaptive-optics plant

def test_default_synthesis_certified(plant, synthesis):
    K = synthesis["controller"]
    assert K.order == plant.order
    assert K.certs["P_residual"] <= 1e-8 and K.certs["Q_residual"] <= 1e-8
    assert K.certs["rho_PQ"] < synthesis["gamma"] ** 2
    assert hinf.closed_loop_hinf_norm(plant, K) <= synthesis["gamma"]


def test_default_gamma_bracket(plant, synthesis):
    assert not hinf.check_gamma(plant, synthesis["lower"])[0]
    assert hinf.check_gamma(plant, synthesis["gamma"])[0]
