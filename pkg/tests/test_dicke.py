import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_enhancement
from superradiance.angular import half, projections
from superradiance.dicke import DickeLadder, emission_curve, enhancement_factor, evolve_cascade
from superradiance.integrate import StepperConfig


@pytest.mark.parametrize("N", [1, 2, 5, 12])
def test_spin_half_closed_form(N):
    J = half("1/2") * N
    for M in projections(J):
        JJ, MM = float(J), float(M)
        assert enhancement_factor(N, "1/2", M) == pytest.approx((JJ + MM) * (JJ - MM + 1), abs=1e-9)


@pytest.mark.parametrize("N,twice_j", [(2, 2), (3, 2), (2, 4), (3, 3)])
def test_matches_brute_force(N, twice_j):
    j = half(f"{twice_j}/2")
    for M in projections(j * N):
        ref = brute_force_enhancement(N, twice_j, M.twice)
        assert enhancement_factor(N, j, M) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_single_emitter_is_free_decay():
    # one spin-j particle: every level above the ground decays at gamma
    for M in projections("5/2")[:-1]:
        assert enhancement_factor(1, "5/2", M) == pytest.approx(1.0, abs=1e-12)
    assert enhancement_factor(1, "5/2", "-5/2") == 0.0


def test_first_steps_independent_of_j():
    # the top two rungs only involve the top two levels of each particle
    for twice_j in range(2, 10):
        j = half(f"{twice_j}/2")
        J = j * 4
        assert enhancement_factor(4, j, J) == pytest.approx(4.0, abs=1e-9)
        assert enhancement_factor(4, j, J - 1) == pytest.approx(7.0, abs=1e-9)


def test_out_of_range_projection():
    with pytest.raises(ValueError):
        enhancement_factor(3, "1/2", "5/2")
    with pytest.raises(ValueError):
        enhancement_factor(2, 1, "1/2")


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.integers(1, 7))
def test_ladder_rates_nonnegative(N, twice_j):
    ladder = DickeLadder.build(N, half(f"{twice_j}/2"))
    assert np.all(ladder.W >= -1e-9)
    assert ladder.W[-1] == 0.0
    assert ladder.W[0] == pytest.approx(N, abs=1e-9)


def test_ladder_is_read_only():
    ladder = DickeLadder.build(3, 1)
    with pytest.raises(ValueError):
        ladder.W[0] = 0.0


def test_cascade_conserves_population():
    ladder = DickeLadder.build(10, "1/2")
    traj = evolve_cascade(ladder, np.linspace(0, 3, 301))
    np.testing.assert_allclose(traj.rho.sum(axis=1), 1.0, atol=1e-9)
    assert traj.rho.min() >= 0
    I = emission_curve(traj)
    assert I[0] == pytest.approx(1.0)
    assert I.max() > I[0]
    assert traj.rho[-1, -1] > 0.99


def test_single_atom_cascade_is_exponential():
    ladder = DickeLadder.build(1, "1/2")
    t = np.linspace(0, 2, 41)
    traj = evolve_cascade(ladder, t)
    np.testing.assert_allclose(traj.rho[:, 0], np.exp(-t), rtol=1e-8)


@pytest.mark.parametrize("N,j", [(10, "9/2"), (30, "1/2")])
def test_cascade_self_convergence(N, j):
    t = np.linspace(0.0, 2.0, 2001)
    a, b = (emission_curve(evolve_cascade(DickeLadder.build(N, j), t, StepperConfig(rel_tol=tol)))
            for tol in (1e-8, 1e-9))
    assert np.max(np.abs(a - b)) / b.max() < 10 * 1e-8
