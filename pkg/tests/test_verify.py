import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracp_lab.energy import Problem
from fracp_lab.grid import Domain, GridFunction, ProblemParams
from fracp_lab.solvers import solve_dirichlet, torsion
from fracp_lab.verify import (beta0, beta0_small_t_bound, boundary_decay_fit, check_comparison,
                              cutoff_convergence, cutoff_energy_bound, elementary_C, k_window,
                              k_window_threshold)


def test_beta0_examples():
    b = beta0(0.01, 0.02, 1e-3, 1.5, 5.0)
    assert b > 1
    assert b >= beta0_small_t_bound(0.01, 0.02, 1.5) - 1e-3
    assert beta0(0.01, 0.01, 1.0, 1.5, 5.0) == 1.0
    with pytest.raises(ValueError):
        beta0(0.02, 0.01, 1.0, 1.5, 5.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(1.1, 4.0))
def test_beta0_monotonicity(M, ratio):
    lam = 0.05
    b = beta0(lam, ratio * lam, M, 1.5, 5.0, step=1e-2, samples=800)
    assert beta0(lam, ratio * lam, 2 * M, 1.5, 5.0, step=1e-2, samples=800) <= b
    assert beta0(lam, 1.5 * ratio * lam, M, 1.5, 5.0, step=1e-2, samples=800) >= b


def test_elementary_C_examples():
    C, v = elementary_C(2.0, 2.0)
    assert C == 0.0 and v.passed
    C3, v3 = elementary_C(3.0, 2.0)
    assert C3 >= 1.0 and v3.passed
    for p in (2.0, 3.0):
        for g in (1.0, 2.0):
            assert elementary_C(p, g)[1].passed
    with pytest.raises(ValueError):
        elementary_C(1.5, 1.0)


def test_elementary_C_nondecreasing_in_p():
    vals = [elementary_C(p, 1.5, pairs=100)[0] for p in (2.0, 2.5, 3.0, 3.5, 4.0)]
    assert all(a <= b for a, b in zip(vals[:-1], vals[1:]))


def test_verdict_json():
    _, v = elementary_C(3.0, 1.0, pairs=50)
    d = json.loads(v.to_json())
    assert set(d) == {"pass", "witnesses", "fit", "values"}


def test_k_window_examples():
    lo, hi = k_window(ProblemParams(1, 0.1, 2.0, 1.8))
    assert lo == pytest.approx(0.28 / 0.52) and hi == 1.0
    assert k_window(ProblemParams(1, 0.3, 2.0, 1.5)) is None


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([1, 2]), st.floats(0.01, 0.99), st.floats(2.0, 4.0), st.floats(0.0, 1.0))
def test_k_window_properties(n, s, p, t):
    if n <= s * p:
        return
    q = (p - 1) + t * 1.0
    if not p - 1 < q < p:
        return
    P = ProblemParams(n, s, p, q)
    w = k_window(P)
    assert (w is not None) == k_window_threshold(P)
    if w is not None:
        assert 0 <= w[0] < w[1] <= p - 1


@pytest.fixture(scope="module")
def torsion_pair():
    prob = Problem.build(ProblemParams(1, 0.3, 2.0, 1.5), Domain.interval(0, 1), 64)
    return prob, torsion(prob).solution, solve_dirichlet(prob, 2.0).solution


def test_comparison(torsion_pair, rng):
    prob, e, e2 = torsion_pair
    v = check_comparison(prob, e, e)
    assert v.passed and v.values["hypothesis"] and v.values["conclusion"]
    v = check_comparison(prob, e2, e)
    assert v.passed and v.values["hypothesis"] and v.values["conclusion"]
    w = prob.wrap(rng.normal(size=prob.grid.size))
    v = check_comparison(prob, e, w)
    assert not v.values["hypothesis"] and v.passed and v.witnesses[0]["kind"] == "hypothesis"


def test_boundary_decay_exact_power():
    prob = Problem.build(ProblemParams(1, 0.3, 2.0, 1.5), Domain.interval(0, 1), 128)
    u = GridFunction(prob.grid, prob.grid.d_omega ** 0.3)
    fit, (lo, hi) = boundary_decay_fit(u, 0.3)
    assert fit.rel_dev < 1e-10
    assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
    with pytest.raises(ValueError):
        boundary_decay_fit(GridFunction(prob.grid, np.zeros(128)), 0.3)


@pytest.fixture(scope="module")
def centered():
    prob = Problem.build(ProblemParams(1, 0.3, 2.0, 1.5), Domain.interval(-1, 1, True), 128)
    return prob, torsion(prob).solution


def test_cutoff_convergence(centered):
    prob, e = centered
    v = cutoff_convergence(prob, e)
    assert v.passed and v.fit.rel_dev < 0.2
    z = cutoff_convergence(prob, np.zeros(prob.grid.size))
    assert all(x == 0 for x in z.values["norms"])
    with pytest.raises(ValueError):
        cutoff_convergence(prob, e, deltas=[0.5])


def test_cutoff_energy_bound(centered):
    prob, e = centered
    v = cutoff_energy_bound(prob, e)
    assert v.passed and v.fit.rel_dev < 0.2
    rem = v.values["remainder"]
    assert rem[-1] < rem[0]
    z = cutoff_energy_bound(prob, np.zeros(prob.grid.size))
    assert all(x == 0 for x in z.values["excess"])
