import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracp_lab.energy import Problem, energy_tilde, sobolev_constant
from fracp_lab.grid import Domain, ProblemParams
from fracp_lab.solvers import (genus_level_upper, genus_levels, minimal_solution,
                               mountain_pass_solve, path_profile)
from fracp_lab.solvers.genus import low_modes, sphere_samples
from fracp_lab.verify import k_window

THETA = 3.23


@pytest.fixture(scope="module")
def mp_setup():
    pr = ProblemParams(1, 0.1, 2.0, 1.8, 0.01)
    prob = Problem.build(pr, Domain.interval(-1, 1, True), 128)
    S = sobolev_constant(pr)
    lo, hi = k_window(pr)
    delta = 1 / (5 * THETA)
    eps = delta ** (0.5 * (lo + hi) + 1)
    m = minimal_solution(prob, pr.lam)
    pp = path_profile(prob, m.solution, pr.lam, eps, delta, S, theta=THETA)
    return prob, S, m, pp


def test_path_endpoints(mp_setup):
    prob, _, m, pp = mp_setup
    E0 = energy_tilde(prob, m.solution, pp.lam).value
    assert pp.energies[0] == E0 == pp.base_energy
    assert pp.energies[-1] <= E0 - 0.1 * abs(E0)
    assert pp.ray_sup >= pp.energies.max() - 1e-6 * abs(pp.ray_sup)
    assert pp.ray_sup > 0
    d = pp.to_dict()
    assert set(d) >= {"ray_sup", "critical_level", "below_critical", "t0"}


def test_path_rejects_bad_geometry(mp_setup):
    prob, S, m, _ = mp_setup
    with pytest.raises(ValueError):
        path_profile(prob, m.solution, 0.01, 0.001, 0.5, S, theta=THETA)
    with pytest.raises(ValueError):
        path_profile(prob, m.solution, 0.01, 0.05, 0.05, S, theta=THETA)


def test_mountain_pass_critical_point(mp_setup):
    prob, _, m, pp = mp_setup
    rep = mountain_pass_solve(prob, pp, m.solution)
    assert rep.grad_norm <= rep.tol
    assert rep.diagnostics["distance"] > rep.diagnostics["distinct_floor"]
    assert rep.status == "converged" and rep.converged
    assert rep.energy > pp.base_energy


def test_mountain_pass_no_certificate_on_trivial_path(mp_setup):
    prob, _, m, pp = mp_setup
    flat = type(pp)(pp.t, np.zeros_like(pp.energies), 0.0, 0.0, 0.0, pp.t0, pp.critical_level,
                    pp.base_energy, pp.lam, pp.eps, pp.delta, pp.theta,
                    [prob.values(m.solution).copy() for _ in pp.points])
    rep = mountain_pass_solve(prob, flat, m.solution, budget=2)
    assert not rep.converged
    assert rep.status != "converged"


@pytest.fixture(scope="module")
def genus_setup():
    pr = ProblemParams(1, 0.3, 2.0, 1.5, 0.01)
    prob = Problem.build(pr, Domain.interval(0, 1), 64)
    S = sobolev_constant(pr)
    r = 0.25 * S.value ** (pr.n / (pr.sp * pr.p))
    return prob, S, r


def test_genus_levels_negative_and_ordered(genus_setup):
    prob, S, r = genus_setup
    bounds = genus_levels(prob, range(1, 5), r, S_est=S)
    vals = [b.value for b in bounds]
    assert all(b.negative for b in bounds)
    assert all(a <= b * (1 - 1e-9) for a, b in zip(vals, vals[1:]))
    assert bounds[0].to_json() == genus_level_upper(prob, 1, r, S_est=S).to_json()


def test_genus_radius_guard(genus_setup):
    prob, S, _ = genus_setup
    with pytest.raises(ValueError):
        genus_level_upper(prob, 1, S.value ** 10, S_est=S)
    with pytest.raises(ValueError):
        genus_level_upper(prob, 0, 0.1)


def test_low_modes_orthonormal(genus_setup):
    prob, _, _ = genus_setup
    V = low_modes(prob, 4)
    np.testing.assert_allclose(V.T @ (prob.w[:, None] * V), np.eye(4), atol=1e-10)


@settings(max_examples=8, deadline=None)
@given(st.integers(1, 6))
def test_sphere_samples_symmetric_and_nested(dim):
    X = sphere_samples(dim)
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, rtol=1e-12)
    rows = {tuple(np.round(x, 12)) for x in X}
    assert all(tuple(np.round(-x, 12)) in rows for x in X)
    if dim > 1:
        prev = sphere_samples(dim - 1)
        np.testing.assert_array_equal(X[: prev.shape[0], :-1], prev)
