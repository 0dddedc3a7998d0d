"""Effective two-body master equation over the (2j+1)^2 product basis.

Basis states are |m1, m2> with both projections in descending order, flattened
row-major: index = k1 * (2j+1) + k2 where k = j - m.

With pump rates Gamma_ij and decay rates Gamma_ij + gamma delta_ij, the
2x2 rate matrices are diagonalised by the symmetric/antisymmetric dipoles
X_pm = (s1 +- s2)/sqrt(2), so the generator becomes four Lindblad dissipators:

    rho' = sum_pm (Gamma +- GammaBar) D[X_pm^+] rho + (Gamma +- GammaBar + gamma) D[X_pm] rho
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .angular import HalfInt, dipole_lowering, half
from .integrate import IntegrationError, StepperConfig, integrate_to
from .rates import MediumParams, RatePair, solve_rates

log = logging.getLogger(__name__)

__all__ = [
    "Observables",
    "TwoBodyOperators",
    "operators",
    "fully_excited",
    "ground_state",
    "reduced_matrix",
    "observables",
    "master_rhs",
    "emission_intensity",
    "energy_per_particle",
    "PositivityError",
    "ResonantRates",
    "TwoBodyRun",
    "run_twobody",
    "run_scenario",
]


class PositivityError(IntegrationError):
    pass


@dataclass(frozen=True)
class Observables:
    A: float
    V: float
    Y: float
    rho1: np.ndarray
    Y_imag: float = 0.0


class TwoBodyOperators:
    """Sparse single-particle dipoles embedded in the two-particle space."""

    def __init__(self, j):
        self.j = half(j)
        d = self.j.twice + 1
        self.d = d
        self.dim = d * d
        s = sp.csr_matrix(dipole_lowering(self.j))
        eye = sp.identity(d, format="csr")
        self.s1 = sp.kron(s, eye, format="csr")
        self.s2 = sp.kron(eye, s, format="csr")
        self.Xp = ((self.s1 + self.s2) / math.sqrt(2)).tocsr()
        self.Xm = ((self.s1 - self.s2) / math.sqrt(2)).tocsr()
        self.Xp_h = self.Xp.conj().T.tocsr()
        self.Xm_h = self.Xm.conj().T.tocsr()
        self.XpXp_h = (self.Xp @ self.Xp_h).tocsr()  # X X^+
        self.XmXm_h = (self.Xm @ self.Xm_h).tocsr()
        self.Xp_hXp = (self.Xp_h @ self.Xp).tocsr()  # X^+ X
        self.Xm_hXm = (self.Xm_h @ self.Xm).tocsr()
        # (j + m) for k = 0..2j
        self.energy = np.arange(d - 1, -1, -1, dtype=float)
        perm = np.arange(self.dim).reshape(d, d).T.ravel()
        self.swap = perm
        s1s2 = (self.s1.T @ self.s2)  # sigma1^+ sigma2^-
        self.y_op = (0.5 * (s1s2 + s1s2.conj().T)).tocsr()

    def swapped(self, rho: np.ndarray) -> np.ndarray:
        return rho[np.ix_(self.swap, self.swap)]


@lru_cache(maxsize=None)
def _ops_twice(twice_j: int) -> TwoBodyOperators:
    return TwoBodyOperators(HalfInt(twice_j))


def operators(j) -> TwoBodyOperators:
    return _ops_twice(half(j).twice)


def _ops_for(rho: np.ndarray, j=None) -> TwoBodyOperators:
    if j is not None:
        return operators(j)
    d = int(round(math.sqrt(rho.shape[0])))
    if d * d != rho.shape[0]:
        raise ValueError(f"matrix of size {rho.shape[0]} is not a two-particle operator")
    return _ops_twice(d - 1)


def fully_excited(j) -> np.ndarray:
    ops = operators(j)
    rho = np.zeros((ops.dim, ops.dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def ground_state(j) -> np.ndarray:
    ops = operators(j)
    rho = np.zeros((ops.dim, ops.dim), dtype=complex)
    rho[-1, -1] = 1.0
    return rho


def reduced_matrix(rho: np.ndarray, j=None) -> np.ndarray:
    """Particle-averaged single-particle matrix (tr_1 rho + tr_2 rho)/2."""
    d = _ops_for(rho, j).d
    r = rho.reshape(d, d, d, d)
    return 0.5 * (np.einsum("acbc->ab", r) + np.einsum("cacb->ab", r))


def observables(rho: np.ndarray, j=None) -> Observables:
    """A (excited population), V (top-bottom inversion), Y (pair coherence), rho1."""
    ops = _ops_for(rho, j)
    rho1 = reduced_matrix(rho, ops.j)
    A = float(np.sum(np.diag(rho1)[:-1].real))
    V = float(rho1[0, 0].real - rho1[-1, -1].real)
    y = complex(ops.y_op.multiply(rho.T).sum())
    return Observables(A=A, V=V, Y=y.real, rho1=rho1, Y_imag=y.imag)


def _dissipate(X, XhX, rho):
    # X rho X^+ - (X^+X rho + rho X^+X)/2 for sparse X and Hermitian X^+X
    sandwich = (X @ (X @ rho).conj().T).conj().T
    anti = XhX @ rho
    anti_r = (XhX @ rho.conj().T).conj().T
    return sandwich - 0.5 * (anti + anti_r)


def master_rhs(rho: np.ndarray, rates: RatePair, gamma: float = 1.0, j=None) -> np.ndarray:
    """Time derivative of the two-body density matrix for frozen rates."""
    ops = _ops_for(rho, j)
    G, Gb = rates.Gamma, rates.GammaBar
    out = np.zeros_like(rho, dtype=complex)
    for lam, X, Xh, XXh, XhX in (
        (G + Gb, ops.Xp, ops.Xp_h, ops.XpXp_h, ops.Xp_hXp),
        (G - Gb, ops.Xm, ops.Xm_h, ops.XmXm_h, ops.Xm_hXm),
    ):
        if lam != 0.0:
            out += lam * _dissipate(Xh, XXh, rho)  # pump: jump operator X^+
        out += (lam + gamma) * _dissipate(X, XhX, rho)
    return out


def emission_intensity(rho1_dot: np.ndarray, omega0: float = 1.0) -> float:
    """Energy per particle leaving the atoms per unit time (positive for emission)."""
    d = rho1_dot.shape[0]
    weights = np.arange(d - 1, -1, -1, dtype=float)
    return -omega0 * float(np.dot(weights, np.diag(rho1_dot).real))


def energy_per_particle(rho1: np.ndarray) -> float:
    d = rho1.shape[0]
    return float(np.dot(np.arange(d - 1, -1, -1, dtype=float), np.diag(rho1).real))


class ResonantRates:
    """Rate model for the unbroadened medium with warm-started root tracking."""

    def __init__(self, params: MediumParams):
        self.params = params
        self.last: Optional[float] = None

    def __call__(self, obs: Observables) -> RatePair:
        guess = self.params.gamma if self.last is None else self.last
        return solve_rates(self.params, obs, guess)

    def commit(self, rates: RatePair) -> None:
        self.last = rates.Gamma


@dataclass
class TwoBodyRun:
    j: HalfInt
    t: np.ndarray
    I_em: np.ndarray
    Gamma: np.ndarray
    GammaBar: np.ndarray
    A: np.ndarray
    V: np.ndarray
    Y: np.ndarray
    step_t: np.ndarray
    step_I: np.ndarray
    step_Gamma: np.ndarray
    emitted: float
    energy_drop: float
    diagnostics: dict = field(default_factory=dict)
    rho: Optional[np.ndarray] = None
    stopped_early: bool = False

    @property
    def I0(self) -> float:
        return float(self.step_I[0])

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.step_I))

    @property
    def peak(self) -> float:
        return float(self.step_I[self.peak_index])

    @property
    def t_max(self) -> float:
        return float(self.step_t[self.peak_index])

    @property
    def Gamma0(self) -> float:
        return float(self.step_Gamma[0])

    def summary(self) -> dict:
        return {
            "I0": self.I0,
            "peak_I_em": self.peak,
            "t_max": self.t_max,
            "Gamma0": self.Gamma0,
            "Gamma_max": float(np.max(self.step_Gamma)),
            "emitted": self.emitted,
            "energy_drop": self.energy_drop,
            "stopped_early": self.stopped_early,
            **{k: v for k, v in self.diagnostics.items()},
        }


def run_twobody(
    j,
    rate_model: Callable,
    t_end: float,
    n_out: int = 2001,
    gamma: float = 1.0,
    mask: Optional[np.ndarray] = None,
    config: Optional[StepperConfig] = None,
    eps_stop: float = 1e-6,
    stop_when: Optional[Callable] = None,
    keep_rho: bool = False,
    positivity_tol: float = 1e-6,
    t_grid=None,
) -> TwoBodyRun:
    """Evolve from the fully excited product state with self-consistent rates.

    Rates are re-solved inside every right-hand-side evaluation (so the
    integrator controls the coupling error); the accepted-step hooks then run in
    the order rates -> mask -> check. ``stop_when(t, I_em, step_I)`` may end
    the run early, e.g. once a marginal-width predicate is decided.

    Truncating coherences does not preserve positivity in general, so masked
    runs record negative eigenvalues (``positivity_violated``) instead of
    aborting.
    """
    ops = operators(j)
    D = ops.dim
    cfg = config or StepperConfig()
    t_grid = np.linspace(0.0, t_end, n_out) if t_grid is None else np.asarray(t_grid, float)
    energy = ops.energy

    def derivative(rho):
        obs = observables(rho, ops.j)
        rates = rate_model(obs)
        drho = master_rhs(rho, rates, gamma, ops.j)
        if mask is not None:
            drho = np.where(mask, drho, 0.0)
        return obs, rates, drho

    def rhs(t, y):
        rho = y[:-1].reshape(D, D)
        _, _, drho = derivative(rho)
        rho1_dot = reduced_matrix(drho, ops.j)
        out = np.empty_like(y)
        out[:-1] = drho.ravel()
        out[-1] = emission_intensity(rho1_dot)
        return out

    rho0 = fully_excited(ops.j)
    y0 = np.concatenate([rho0.ravel(), [0.0]]).astype(complex)

    step_t, step_I, step_G = [], [], []
    diag = {"max_trace_drift": 0.0, "max_hermiticity": 0.0, "min_eigenvalue": 1.0,
            "max_swap_asymmetry": 0.0, "max_Y_imag": 0.0, "positivity_violated": False}

    def record(t, y):
        rho = y[:-1].reshape(D, D)
        obs, rates, drho = derivative(rho)
        rate_model.commit(rates)
        step_t.append(t)
        step_I.append(emission_intensity(reduced_matrix(drho, ops.j)))
        step_G.append(rates.Gamma)
        diag["max_Y_imag"] = max(diag["max_Y_imag"], abs(obs.Y_imag))
        return None

    def apply(t, y):
        if mask is None:
            return None
        rho = np.where(mask, y[:-1].reshape(D, D), 0.0)
        out = y.copy()
        out[:-1] = rho.ravel()
        return out

    def check(t, y):
        rho = y[:-1].reshape(D, D)
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        diag["max_hermiticity"] = max(diag["max_hermiticity"], herm)
        diag["max_trace_drift"] = max(diag["max_trace_drift"], abs(np.trace(rho).real - 1.0))
        diag["max_swap_asymmetry"] = max(
            diag["max_swap_asymmetry"], float(np.max(np.abs(ops.swapped(rho) - rho)))
        )
        rho_h = 0.5 * (rho + rho.conj().T)
        lam = float(np.linalg.eigvalsh(rho_h)[0])
        diag["min_eigenvalue"] = min(diag["min_eigenvalue"], lam)
        if lam < -positivity_tol:
            if mask is not None:
                if not diag["positivity_violated"]:
                    log.warning("masked run left the positive cone: eigenvalue %.3e at t = %.6g", lam, t)
                diag["positivity_violated"] = True
                return out_herm(y, rho_h)
            raise PositivityError(f"density matrix eigenvalue {lam:.3e} below -{positivity_tol}", t, rho)
        return out_herm(y, rho_h)

    def out_herm(y, rho_h):
        out = y.copy()
        out[:-1] = rho_h.ravel()
        return out

    def guard(t, y_old, y_new):
        if not step_G:
            return True
        new = rate_model(observables(y_new[:-1].reshape(D, D), ops.j)).Gamma
        old = step_G[-1]
        return abs(new - old) <= cfg.rate_change_cap * max(abs(old), gamma)

    def stop(t, y):
        rho = y[:-1].reshape(D, D)
        A = float(np.sum(np.diag(reduced_matrix(rho, ops.j))[:-1].real))
        if A < eps_stop:
            return True
        return bool(stop_when is not None and stop_when(t, step_I[-1], step_I))

    record(0.0, y0)
    traj = integrate_to(rhs, y0, t_grid, cfg, hooks=[record, apply, check], stop=stop, guard=guard)

    n = len(traj.t)
    cols = {k: np.empty(n) for k in ("I_em", "Gamma", "GammaBar", "A", "V", "Y")}
    rho_keep = np.empty((n, D, D), dtype=complex) if keep_rho else None
    saved_last = rate_model.last if hasattr(rate_model, "last") else None
    for i in range(n):
        rho = traj.y[i, :-1].reshape(D, D)
        obs, rates, drho = derivative(rho)
        rate_model.commit(rates)
        cols["I_em"][i] = emission_intensity(reduced_matrix(drho, ops.j))
        cols["Gamma"][i] = rates.Gamma
        cols["GammaBar"][i] = rates.GammaBar
        cols["A"][i], cols["V"][i], cols["Y"][i] = obs.A, obs.V, obs.Y
        if keep_rho:
            rho_keep[i] = rho
    if hasattr(rate_model, "last"):
        rate_model.last = saved_last

    y_final = traj.y[-1]
    rho_final = y_final[:-1].reshape(D, D)
    emitted = float(y_final[-1].real)
    energy_drop = energy_per_particle(reduced_matrix(rho0, ops.j)) - energy_per_particle(
        reduced_matrix(rho_final, ops.j)
    )
    diag["energy_balance"] = abs(emitted - energy_drop) / max(abs(energy_drop), 1e-300)
    diag["n_steps"] = traj.n_accepted
    diag["n_rejected"] = traj.n_rejected
    return TwoBodyRun(
        j=ops.j,
        t=traj.t,
        step_t=np.asarray(step_t),
        step_I=np.asarray(step_I),
        step_Gamma=np.asarray(step_G),
        emitted=emitted,
        energy_drop=energy_drop,
        diagnostics=diag,
        rho=rho_keep,
        stopped_early=traj.stopped_early,
        **cols,
    )


def run_scenario(scenario, stop_when=None, keep_rho: bool = False) -> TwoBodyRun:
    """Run a two-body (or Doppler-broadened) scenario object.

    ``scenario`` needs j, C, rho_size, Delta_D, quad_order,
    ablation_preset, t_end, n_out, eps_stop and integrator attributes.
    """
    from .ablation import preset_mask

    params = MediumParams(scenario.C, scenario.rho_size, 1.0)
    if scenario.Delta_D > 0:
        from .doppler import DopplerParams, DopplerRates

        model = DopplerRates(DopplerParams(scenario.Delta_D, scenario.quad_order), params,
                             convention=getattr(scenario, "doppler_convention", "printed"))
    else:
        model = ResonantRates(params)
    run = run_twobody(
        scenario.j,
        model,
        t_end=scenario.t_end,
        n_out=scenario.n_out,
        mask=preset_mask(scenario.j, scenario.ablation_preset),
        config=scenario.integrator,
        eps_stop=scenario.eps_stop,
        stop_when=stop_when,
        keep_rho=keep_rho,
    )
    if hasattr(model, "zeta_sign_flip"):
        run.diagnostics["zeta_sign_flip"] = model.zeta_sign_flip
    return run
