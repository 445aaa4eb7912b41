import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pauli_shaping import analysis, noise, ptm, shaping, shots
from pauli_shaping.errors import SingularError, ValidationError


def test_g_of_x_optimum():
    x, g = analysis.fisher_optimum()
    assert x == pytest.approx(1.59, abs=0.01)
    assert g == pytest.approx(0.162, abs=5e-3)
    assert analysis.g_of_x(60.0) < 1e-20


def test_fisher_max_near_bound():
    r = 0.99
    d, best = analysis.fisher_max_exp(1.0, r)
    assert best <= 0.162 / (r * r * np.log(r) ** 2)
    assert best == pytest.approx(0.162 / (r * r * np.log(r) ** 2), rel=5e-3)
    assert best >= max(analysis.fisher_exp(1.0, r, d + k) for k in (-1, 1))


def test_fisher_rejects_r_ge_one():
    with pytest.raises(ValidationError):
        analysis.fisher_max_exp(1.0, 1.0)


def _fd_information(mu, phi, h=1e-6):
    deriv = (mu(phi + h) - mu(phi - h)) / (2 * h)
    m = mu(phi)
    return deriv ** 2 / (1 - m * m)


@pytest.mark.parametrize("d", [1, 5, 17, 40])
def test_fisher_matches_finite_differences(d):
    a, r, om, de = 0.9, 0.97, 0.41, 0.1
    out = analysis.fisher_damped_bounds(a, r, om, de, d)

    def mu(r=r, om=om, de=de):
        return a * r ** d * np.cos(om * d - de)

    assert out["I_r"] == pytest.approx(_fd_information(lambda v: mu(r=v), r), abs=1e-6)
    assert out["I_omega"] == pytest.approx(_fd_information(lambda v: mu(om=v), om), abs=1e-6, rel=1e-6)
    assert out["I_delta"] == pytest.approx(_fd_information(lambda v: mu(de=v), de), abs=1e-6)
    exp = analysis.fisher_exp(a, r, d)
    assert exp == pytest.approx(_fd_information(lambda v: a * v ** d, r), abs=1e-6, rel=1e-6)


def test_fisher_damped_bounds_hold():
    d = np.arange(0, 200)
    out = analysis.fisher_damped_bounds(0.95, 0.98, 0.4, 0.2, d)
    assert out["delta_ok"] and out["omega_ok"]
    assert np.all(out["I_r"] >= 0)


def test_fisher_cos_zero_depth():
    om = np.pi / 2 / 3
    out = analysis.fisher_damped_bounds(0.9, 0.98, om, 0.0, 3)
    assert out["I_r"] == pytest.approx(0, abs=1e-25)
    assert out["I_omega"] == pytest.approx(out["bound_omega"])


@pytest.mark.parametrize("d", [0, 1, 2, 5, 10, 20])
def test_predict_delta_closed_form(d):
    assert analysis.predict_delta(shots.FULL_TWIRL_EACH, 0.7, d) == pytest.approx(
        analysis.delta_closed_form(0.7, d), abs=1e-12)
    assert analysis.predict_delta(shots.FULL_TWIRL_EACH, 0.7, d, commuting=True) == 0
    assert analysis.predict_delta(shots.COMMUTING_TWIRL_EACH, 0.7, d) < 1e-12


def test_predict_delta_correlated_zero():
    for d in (0, 2, 10):
        assert analysis.predict_delta(shots.CORRELATED_PAIRS, 0.7, d) < 1e-12
    with pytest.raises(ValidationError):
        analysis.predict_delta(shots.CORRELATED_PAIRS, 0.7, 3)


@pytest.mark.parametrize("theta", [0.3, 0.7, 1.2])
@pytest.mark.parametrize("d", [1, 4, 13, 20])
def test_predict_delta_vs_empirical(theta, d):
    rng = shots.stream(77, int(theta * 10), d)
    scheme = shots.TwirlScheme(shots.FULL_TWIRL_EACH, readout_twirl=False)
    emp, se = shots.empirical_delta(ptm.rzz_ptm(theta), scheme, "XI", ptm.pauli_eigenstate("XI"),
                                    d, 2000, rng)
    pred = analysis.predict_delta(shots.FULL_TWIRL_EACH, theta, d)
    assert abs(emp - pred) < 3 * se + 1e-12


def test_variance_formula_limits():
    assert analysis.variance_mu_hat(0.5, 0.0, 10, 100) == pytest.approx(0.75 / 1000)
    # one shot per circuit: circuit spread is invisible
    assert analysis.variance_mu_hat(0.5, 0.3, 1000, 1) == pytest.approx(0.75 / 1000)


@pytest.mark.parametrize("theta", [0.2, 0.4, 0.8, 1.1, 2.5])
@pytest.mark.parametrize("eps", [-0.08, -0.01, 0.01, 0.05, 0.1])
def test_example1_minimum(theta, eps):
    x_star, g_star = analysis.minimize_gamma_example1(theta, eps)
    c, s = np.cos(theta) / np.cos(theta + eps), np.sin(theta) / np.sin(theta + eps)
    assert g_star == pytest.approx(max(abs(c), abs(s)), abs=1e-12)
    assert analysis.gamma_example1(theta, eps, x_star) == pytest.approx(g_star, abs=1e-12)
    grid = np.linspace(x_star - 2, x_star + 2, 4001)
    assert min(analysis.gamma_example1(theta, eps, x) for x in grid) >= g_star - 1e-12


@given(st.floats(0.2, 1.3), st.floats(-0.1, 0.1), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_example1_formula_matches_engine(theta, eps, x, y):
    cm = analysis.example1_characteristic(theta, eps, x, y)
    assert shaping.quasi_probs(cm).gamma == pytest.approx(analysis.gamma_example1(theta, eps, x, y), abs=1e-9)


def test_example1_singular_angle():
    with pytest.raises(SingularError):
        analysis.gamma_example1(np.pi / 2 - 0.1, 0.1, 0.0)


def test_example1_linear_overhead():
    ratios = [(analysis.minimize_gamma_example1(0.4, e)[1] - 1) / e for e in (1e-2, 1e-3, 1e-4, 1e-5)]
    assert max(ratios) < 5 and np.ptp(ratios[1:]) < 0.1


@given(st.floats(0, 0.45), st.floats(-30, 30))
@settings(max_examples=40, deadline=None)
def test_example2_formula_matches_engine(eps, x):
    cm = analysis.example2_characteristic(eps, x)
    assert shaping.quasi_probs(cm).gamma == pytest.approx(analysis.gamma_example2(eps, x), abs=1e-9)


def test_example2_limit_values():
    assert analysis.gamma_example2_limit(0.0) == 1.5
    assert analysis.gamma_example2_limit(8.0) == 8.0
    assert analysis.gamma_example2(1e-6, 0.0) == pytest.approx(1.5, abs=1e-3)
    with pytest.raises(ValidationError):
        analysis.gamma_example2(0.5, 0.0)


def test_free_gamma_optimizer_example1():
    cm = shaping.characteristic_matrix(ptm.rzz_ptm(0.4), ptm.rzz_ptm(0.45))
    x, gamma, best = analysis.minimize_free_gamma(cm)
    assert gamma == pytest.approx(analysis.minimize_gamma_example1(0.4, 0.05)[1], abs=1e-12)
    assert shaping.quasi_probs(best).gamma == pytest.approx(gamma)


def test_eta_limit_continuity():
    assert analysis.eta(0.9, 0.9 + 1e-8, 0.5) == pytest.approx(1.5 * 0.9 ** 0.5, abs=1e-7)
    assert analysis.eta(0.9, 0.9, 0.5) == pytest.approx(1.5 * 0.9 ** 0.5)
    with pytest.raises(ValidationError):
        analysis.eta(0.0, 0.5, 1.0)


def test_amplification_alpha_zero_is_twirl():
    plan = analysis.example2_amplification(0.01, 0.0)
    assert plan.gamma == pytest.approx(1.0)
    assert all(v == pytest.approx(1.0) for v in plan.eta.values())
    assert np.allclose(plan.quasi.q, shaping.twirl_quasi(ptm.COMMUTING).q)


@pytest.mark.parametrize("alpha", [0.5, 1.0])
@pytest.mark.parametrize("eps", [0.02, 0.01, 0.005])
def test_amplification_gamma_and_residual(alpha, eps):
    plan = analysis.example2_amplification(eps, alpha)
    assert plan.gamma == pytest.approx(1 + alpha * (1 + eps), abs=1e-3)
    ratio = analysis.amplification_residual(0.4, eps, alpha) / analysis.amplification_residual(0.4, eps / 2, alpha)
    assert 3.5 <= ratio <= 4.5


def test_amplification_exact_order_also_second_order():
    r1 = analysis.amplification_residual(0.4, 0.02, 1.0, order="exact")
    r2 = analysis.amplification_residual(0.4, 0.01, 1.0, order="exact")
    assert 3.5 <= r1 / r2 <= 4.5


def test_amplification_input_checks():
    with pytest.raises(ValidationError):
        analysis.approx_amplification([(1, 0.9)] * 4, -0.5, eps_report=0.01)
    with pytest.raises(ValidationError):
        analysis.approx_amplification([(1, 0.9)] * 4, 1.0)


def test_sweeps_are_csv():
    txt = analysis.sweep_g_of_x()
    assert txt.splitlines()[0] == "kind,x,g"
    assert txt.splitlines()[-1].startswith("optimum,")
    assert len(analysis.sweep_delta(0.7, range(5)).splitlines()) == 6
