import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracp_lab.energy import (EnergyReport, F_hat, F_lambda, Problem, critical_level,
                              df_lambda, energy_hat, energy_I, energy_Q, energy_tilde, f_hat,
                              f_lambda, grad_hat, grad_I, grad_Q, grad_tilde, nehari_residual,
                              stability_margin)
from fracp_lab.grid import Domain, ProblemParams


@pytest.fixture(scope="module")
def prob():
    return Problem.build(ProblemParams(1, 0.3, 2.0, 1.5, 0.2), Domain.interval(0, 1), 32)


@pytest.fixture(scope="module")
def prob3():
    return Problem.build(ProblemParams(1, 0.2, 3.0, 2.4, 0.2), Domain.interval(0, 1), 24)


def _fd(E, u, v, t=1e-6):
    return (E(u + t * v) - E(u - t * v)) / (2 * t)


@pytest.mark.parametrize("which", ["Q", "tilde", "I", "hat"])
@pytest.mark.parametrize("fixture", ["prob", "prob3"])
def test_gradients_match_finite_differences(which, fixture, request, rng):
    P = request.getfixturevalue(fixture)
    u = 0.5 + rng.random(P.grid.size)  # away from the kinks at 0
    if which == "I":
        u[::3] *= -1
    cap = np.full(P.grid.size, 1.0)
    E = {"Q": lambda x: energy_Q(P, x).value, "tilde": lambda x: energy_tilde(P, x).value,
         "I": lambda x: energy_I(P, x).value, "hat": lambda x: energy_hat(P, x, cap).value}[which]
    G = {"Q": grad_Q, "tilde": grad_tilde, "I": grad_I,
         "hat": lambda P_, x: grad_hat(P_, x, cap)}[which](P, u)
    for _ in range(5):
        v = rng.normal(size=P.grid.size)
        assert G @ v == pytest.approx(_fd(E, u, v), rel=2e-6)


def test_report_bookkeeping(prob, rng):
    u = rng.random(prob.grid.size)
    r = energy_tilde(prob, u)
    assert r.which == "I_tilde"
    assert r.value == pytest.approx(r.seminorm_p / 2 - r.lq_term - r.crit_term)
    with pytest.raises(ValueError):
        EnergyReport.make(2.0, 1.0, 0.0, 0.0, "nope")
    assert '"which": "I_tilde"' in r.to_json()


def test_energy_forms_agree_on_nonnegative_functions(prob, rng):
    u = rng.random(prob.grid.size)
    assert energy_tilde(prob, u).value == pytest.approx(energy_I(prob, u).value, rel=1e-14)
    big = np.full(prob.grid.size, 10.0)
    assert energy_hat(prob, u, big).value == pytest.approx(energy_tilde(prob, u).value, rel=1e-14)


def test_tilde_ignores_negative_part_in_the_source(prob):
    u = -np.ones(prob.grid.size)
    r = energy_tilde(prob, u)
    assert r.lq_term == 0 and r.crit_term == 0


def test_energy_hat_guards(prob):
    with pytest.raises(ValueError):
        energy_hat(prob, np.ones(prob.grid.size), np.zeros(prob.grid.size))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.0, 5.0), st.floats(0.1, 4.0))
def test_frozen_primitive(cap, t, lam):
    q, ps = 1.5, 5.0
    assert float(F_hat(cap, cap, lam, q, ps)) == pytest.approx(float(F_lambda(cap, lam, q, ps)))
    h = 1e-6
    d = (F_hat(t + h, cap, lam, q, ps) - F_hat(max(t - h, 0), cap, lam, q, ps)) / (t + h - max(t - h, 0))
    if abs(t - cap) > 1e-3 and t > 1e-3:
        assert float(d) == pytest.approx(float(f_hat(t, cap, lam, q, ps)), rel=1e-4)
    assert float(f_hat(t, cap, lam, q, ps)) <= float(f_lambda(cap, lam, q, ps)) * (1 + 1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.0, 2.0))
def test_df_lambda_is_derivative(t, lam):
    h = 1e-6 * t
    d = (f_lambda(t + h, lam, 1.5, 5.0) - f_lambda(t - h, lam, 1.5, 5.0)) / (2 * h)
    assert float(df_lambda(t, lam, 1.5, 5.0)) == pytest.approx(float(d), rel=1e-5)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 32, elements=st.floats(0, 3)))
def test_nehari_identity(u):
    P = Problem.build(ProblemParams(1, 0.3, 2.0, 1.5, 0.2), Domain.interval(0, 1), 32)
    lhs = grad_tilde(P, u) @ u
    assert nehari_residual(P, u) == pytest.approx(lhs, rel=1e-10, abs=1e-10)


def test_stability_margin_guard(prob):
    with pytest.raises(ValueError):
        stability_margin(prob, -np.ones(prob.grid.size))


def test_critical_level_needs_sobolev(prob):
    with pytest.raises(ValueError):
        critical_level(prob, np.zeros(prob.grid.size), None)
    c = critical_level(prob, np.zeros(prob.grid.size), 2.0)
    assert c == pytest.approx(0.3 * 2.0 ** (1 / 0.6))
