import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import literal_master_rhs
from superradiance.angular import half
from superradiance.config import PRESETS
from superradiance.integrate import StepperConfig
from superradiance.rates import MediumParams, RatePair
from superradiance.twobody import (
    ResonantRates,
    fully_excited,
    ground_state,
    master_rhs,
    observables,
    operators,
    reduced_matrix,
    run_scenario,
    run_twobody,
)


def random_density(dim, rng, symmetric=True):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    if symmetric:
        d = int(round(np.sqrt(dim)))
        perm = np.arange(dim).reshape(d, d).T.ravel()
        rho = 0.5 * (rho + rho[np.ix_(perm, perm)])
    return rho / np.trace(rho).real


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 4),
    st.floats(0, 50),
    st.floats(0, 50),
    st.integers(0, 2**32 - 1),
)
def test_master_rhs_matches_literal_form(twice_j, G, Gb, seed):
    rng = np.random.default_rng(seed)
    d = twice_j + 1
    rho = random_density(d * d, rng, symmetric=False)
    got = master_rhs(rho, RatePair(G, Gb), 1.0, f"{twice_j}/2")
    ref = literal_master_rhs(rho, G, Gb, 1.0, twice_j)
    np.testing.assert_allclose(got, ref, atol=1e-11 * max(1.0, G, Gb))


@pytest.mark.parametrize("j", ["1/2", "1", "3/2", "9/2"])
def test_rhs_is_traceless_and_hermitian(j):
    rng = np.random.default_rng(1)
    d = half_dim(j)
    rho = random_density(d * d, rng)
    drho = master_rhs(rho, RatePair(3.0, 1.5), 1.0, j)
    assert abs(np.trace(drho)) < 1e-12
    np.testing.assert_allclose(drho, drho.conj().T, atol=1e-12)


def half_dim(j):
    return operators(j).d


def test_bell_state_observables():
    d = 2
    psi = np.zeros(d * d)
    psi[1] = psi[2] = 1 / np.sqrt(2)  # (|eg> + |ge>)/sqrt 2
    rho = np.outer(psi, psi).astype(complex)
    obs = observables(rho, "1/2")
    assert obs.A == pytest.approx(0.5)
    assert obs.V == pytest.approx(0.0)
    assert obs.Y == pytest.approx(0.5)
    assert obs.Y_imag == pytest.approx(0.0)
    psi[2] = -psi[2]
    assert observables(np.outer(psi, psi).astype(complex), "1/2").Y == pytest.approx(-0.5)


def test_product_states():
    for j in ["1/2", "2", "7/2"]:
        top = observables(fully_excited(j), j)
        assert (top.A, top.V, top.Y) == (1.0, 1.0, 0.0)
        bottom = observables(ground_state(j), j)
        assert (bottom.A, bottom.V, bottom.Y) == (0.0, -1.0, 0.0)


def test_reduced_matrix_trace():
    rng = np.random.default_rng(3)
    rho = random_density(16, rng)
    r1 = reduced_matrix(rho, "3/2")
    assert np.trace(r1).real == pytest.approx(1.0)


@pytest.mark.parametrize("j", ["1/2", "1"])
def test_free_decay_closed_form(j):
    t_end = 3.0
    run = run_twobody(j, ResonantRates(MediumParams(0.0, 10.0)), t_end=t_end, n_out=61)
    t = run.t
    if j == "1/2":
        A_ref = np.exp(-t)
        I_ref = np.exp(-t)
    else:
        # top -> middle -> bottom at unit rates
        A_ref = np.exp(-t) + t * np.exp(-t)
        I_ref = A_ref
    np.testing.assert_allclose(run.A, A_ref, atol=1e-8)
    np.testing.assert_allclose(run.I_em, I_ref, atol=1e-8)
    np.testing.assert_allclose(run.Gamma, 0.0)


def test_resonant_run_structure():
    run = run_twobody("1", ResonantRates(MediumParams(10.0, 10.0)), t_end=0.02, n_out=201)
    d = run.diagnostics
    assert d["max_trace_drift"] < 1e-9
    assert d["max_hermiticity"] < 1e-10
    assert d["min_eigenvalue"] > -1e-6
    assert d["energy_balance"] < 1e-6
    assert d["max_swap_asymmetry"] < 1e-10
    assert run.peak > run.I0
    assert run.Gamma0 == pytest.approx(28.9234987657, rel=1e-9)


def test_rhs_preserves_exchange_symmetry():
    ops = operators("3/2")
    rng = np.random.default_rng(5)
    rho = random_density(ops.dim, rng)
    drho = master_rhs(rho, RatePair(2.0, 0.7), 1.0, "3/2")
    np.testing.assert_allclose(ops.swapped(drho), drho, atol=1e-12)


def test_self_convergence():
    params = MediumParams(10.0, 10.0)
    runs = [
        run_twobody("1/2", ResonantRates(params), t_end=0.01, n_out=101,
                    config=StepperConfig(rel_tol=tol))
        for tol in (1e-8, 1e-9)
    ]
    diff = np.max(np.abs(runs[0].I_em - runs[1].I_em)) / np.max(runs[1].I_em)
    assert diff < 10 * 1e-8


def test_self_convergence_large_spin():
    s = PRESETS["fig3a"].base.replace(j=half("9/2"))
    a, b = (run_scenario(s.replace(integrator=StepperConfig(rel_tol=tol))) for tol in (1e-8, 1e-9))
    assert np.max(np.abs(a.I_em - b.I_em)) / np.max(b.I_em) < 10 * 1e-8
