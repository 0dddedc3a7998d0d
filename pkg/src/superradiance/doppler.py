"""Doppler-broadened induced rates with their thermal average and marginal widths.

A Lorentzian response 1/(Gamma_f - i Delta) averaged over a Gaussian of width
Delta_D becomes sqrt(pi/2)/Delta_D * U(i z0) with
z0 = (Gamma + gamma/2 + i Delta)/(sqrt(2) Delta_D). Here U(i z0) is evaluated as
erfcx(z0) = w(i z0), the Faddeeva function, which is well conditioned for
Re z0 > 0 and has positive real part there.

Two conventions are available for dressing the gain exponent and size:

``"printed"``
    zeta_bar = (1/2) sqrt(pi/2) C gamma rho V / Delta_D * Im U
    rho_bar  = rho + (1/2) sqrt(pi/2) C gamma rho V / Delta_D * Re U
    rate prefactor gamma^2 Re U / Delta_D
``"consistent"``
    zeta_bar = (1/2) C gamma rho V * Re L,  rho_bar = rho + (1/2) C gamma rho V * Im L
    rate prefactor gamma^2 Re L,  with L = sqrt(pi/2) U / Delta_D
    This reduces to the resonant rates as Delta_D -> 0.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfcx

from .rates import (
    ZETA_MAX,
    MediumParams,
    RatePair,
    RateSolverError,
    big_I,
    expm1_ratio,
    solve_fixed_points,
)

log = logging.getLogger(__name__)

__all__ = [
    "CONVENTIONS",
    "DopplerParams",
    "PowerLawFit",
    "QuadratureError",
    "BracketError",
    "erfcx_complex",
    "doppler_rates",
    "average_rates",
    "DopplerRates",
    "gauss_hermite",
    "marginal_width",
    "surpasses_initial",
    "fit_power_law",
]

CONVENTIONS = ("printed", "consistent")
_SQRT_HALF_PI = math.sqrt(math.pi / 2)


class QuadratureError(RuntimeError):
    pass


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class DopplerParams:
    Delta_D: float
    quad_order: int = 40

    def __post_init__(self):
        if not self.Delta_D > 0:
            raise ValueError("Delta_D must be > 0")
        if self.quad_order < 8:
            raise ValueError("quad_order must be >= 8")


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float

    def __call__(self, x):
        return self.prefactor * np.asarray(x, dtype=float) ** self.exponent


def erfcx_complex(z):
    """Scaled complementary error function U(z) = exp(z^2) erfc(z) for complex z."""
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("erfcx_complex needs finite arguments")
    if np.any(np.abs(z) > 1e8):
        warnings.warn("erfcx_complex: |z| > 1e8, relative accuracy not guaranteed", RuntimeWarning)
    out = erfcx(z)
    return complex(out) if out.ndim == 0 else out


def gauss_hermite(n: int):
    """Nodes x_k and weights w_k with sum w_k f(x_k) ~ E[f(X)], X ~ N(0, 1/2) scaled.

    For a Gaussian of width Delta_D use Delta = sqrt(2) Delta_D x_k and weights
    normalised to unit sum.
    """
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w / math.sqrt(math.pi)


def _dressing(Gamma, Delta, dp: DopplerParams, params: MediumParams, convention: str):
    """Per-node (kappa, rho_bar, prefactor) with zeta_bar = kappa * V.

    rho_bar is returned without its V factor: rho_bar = rho + V * rho_shift.
    """
    g = params.gamma
    z0 = (Gamma + 0.5 * g + 1j * Delta) / (math.sqrt(2) * dp.Delta_D)
    U = erfcx(z0)
    Cr = params.C * params.rho_size
    if convention == "printed":
        base = 0.5 * _SQRT_HALF_PI * Cr * g / dp.Delta_D
        kappa = base * U.imag
        rho_shift = base * U.real
        pref = U.real / dp.Delta_D
    elif convention == "consistent":
        L = _SQRT_HALF_PI * U / dp.Delta_D
        kappa = 0.5 * Cr * g * L.real
        rho_shift = 0.5 * Cr * g * L.imag
        pref = L.real
    else:
        raise ValueError(f"unknown convention {convention!r}; choose from {CONVENTIONS}")
    return kappa, rho_shift, pref


def _node_functions(Delta, dp, params, obs, convention):
    A, V, Y = float(obs.A), float(obs.V), float(obs.Y)
    g = params.gamma
    C, r = params.C, params.rho_size

    def rhs(Gamma):
        kappa, rho_shift, pref = _dressing(Gamma, Delta, dp, params, convention)
        z = kappa * V
        gain = g * A * 2.0 * kappa * expm1_ratio(2.0 * kappa * V)
        over = z > ZETA_MAX
        if Y != 0:
            with np.errstate(over="ignore", invalid="ignore"):
                coh = 2.0 * g**2 * C**2 * r**4 * big_I(np.minimum(z, ZETA_MAX), r + V * rho_shift) * pref * Y
        else:
            coh = 0.0
        return np.where(over, np.inf, gain + coh)

    def pair(Gamma):
        kappa, rho_shift, pref = _dressing(Gamma, Delta, dp, params, convention)
        z = kappa * V
        if np.any(z > ZETA_MAX):
            raise RateSolverError(f"gain exponent zeta = {np.max(z):.4g} exceeds {ZETA_MAX}")
        return g**2 * big_I(z, r + V * rho_shift) * pref * (3.0 * C * r * A + 2.0 * C**2 * r**4 * Y)

    return rhs, pair


def _solve_nodes(Deltas, dp, params, obs, guesses, convention):
    Deltas = np.atleast_1d(np.asarray(Deltas, dtype=float))
    if params.C == 0:
        zero = np.zeros_like(Deltas)
        return zero, zero.copy()
    rhs, pair = _node_functions(Deltas, dp, params, obs, convention)
    if float(obs.A) == 0 and float(obs.Y) == 0:
        G = np.zeros_like(Deltas)
    else:
        G = solve_fixed_points(rhs, guesses, scale=params.gamma)
    return G, pair(G)


def doppler_rates(
    Delta: float,
    dp: DopplerParams,
    params: MediumParams,
    obs,
    Gamma_guess: Optional[float] = None,
    convention: str = "printed",
) -> RatePair:
    """Self-consistent rates for the Fourier component at detuning ``Delta``."""
    guess = params.gamma if Gamma_guess is None else Gamma_guess
    G, Gb = _solve_nodes([Delta], dp, params, obs, np.array([guess]), convention)
    return RatePair(float(G[0]), float(Gb[0]))


def average_rates(
    dp: DopplerParams,
    params: MediumParams,
    obs,
    Gamma_guess=None,
    convention: str = "printed",
    check: bool = False,
    check_rtol: float = 1e-6,
    return_nodes: bool = False,
):
    """Thermal average of the node rates with Gauss-Hermite quadrature.

    ``Gamma_guess`` may be a scalar or one warm start per node. With ``check``
    the average is recomputed on twice as many nodes and must agree to
    ``check_rtol``.
    """
    x, w = gauss_hermite(dp.quad_order)
    Deltas = math.sqrt(2) * dp.Delta_D * x
    if Gamma_guess is None:
        guesses = np.full_like(Deltas, params.gamma)
    else:
        guesses = np.broadcast_to(np.asarray(Gamma_guess, dtype=float), Deltas.shape).copy()
    G, Gb = _solve_nodes(Deltas, dp, params, obs, guesses, convention)
    avg = RatePair(float(w @ G), float(w @ Gb))
    if check:
        fine = average_rates(DopplerParams(dp.Delta_D, 2 * dp.quad_order), params, obs,
                             float(avg.Gamma), convention)
        for a, b in ((avg.Gamma, fine.Gamma), (avg.GammaBar, fine.GammaBar)):
            if abs(a - b) > check_rtol * max(abs(b), 1e-300):
                raise QuadratureError(
                    f"quadrature not converged: {dp.quad_order} nodes give {a}, "
                    f"{2 * dp.quad_order} give {b}"
                )
    if return_nodes:
        return avg, Deltas, G, Gb
    return avg


class DopplerRates:
    """Rate model for run_twobody: per-node fixed points warm-started in time."""

    def __init__(self, dp: DopplerParams, params: MediumParams, convention: str = "printed"):
        if convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {convention!r}")
        self.dp = dp
        self.params = params
        self.convention = convention
        x, self.weights = gauss_hermite(dp.quad_order)
        self.Deltas = math.sqrt(2) * dp.Delta_D * x
        self.last: Optional[np.ndarray] = None
        self._pending: Optional[np.ndarray] = None
        # set once the averaged gain exponent has the opposite sign to V
        self.zeta_sign_flip = False

    def __call__(self, obs) -> RatePair:
        guesses = np.full_like(self.Deltas, self.params.gamma) if self.last is None else self.last
        G, Gb = _solve_nodes(self.Deltas, self.dp, self.params, obs, guesses, self.convention)
        self._pending = G
        return RatePair(float(self.weights @ G), float(self.weights @ Gb))

    def commit(self, rates: RatePair) -> None:
        if self._pending is not None:
            self.last = self._pending.copy()
            if not self.zeta_sign_flip:
                kappa, _, _ = _dressing(self.last, self.Deltas, self.dp, self.params, self.convention)
                if float(self.weights @ kappa) < 0:
                    self.zeta_sign_flip = True
                    log.info("averaged gain exponent has the opposite sign to V (%s convention)",
                             self.convention)


def surpasses_initial(run, eps_peak: float = 1e-3) -> bool:
    return run.peak > run.I0 * (1.0 + eps_peak)


def marginal_width(
    params: MediumParams,
    j,
    search_bracket=(10.0, 1e4),
    eps_peak: float = 1e-3,
    rel_tol: float = 5e-3,
    t_end: float = 5.0,
    quad_order: int = 40,
    convention: str = "printed",
    config=None,
    on_eval=None,
) -> float:
    """Largest Doppler width whose emission peak still exceeds I_em(0) (1 + eps_peak).

    Bisection (geometric) on full trajectory runs. A run ends as soon as the
    predicate is decided true, or once the intensity has fallen below half its
    initial value.
    """
    from .twobody import run_twobody

    def predicate(width: float) -> bool:
        model = DopplerRates(DopplerParams(width, quad_order), params, convention)
        threshold = None

        def stop_when(t, I, history):
            nonlocal threshold
            if threshold is None:
                threshold = history[0] * (1.0 + eps_peak)
            return I > threshold or I < 0.5 * history[0]

        run = run_twobody(j, model, t_end=t_end, n_out=2, config=config, stop_when=stop_when)
        ok = surpasses_initial(run, eps_peak)
        if on_eval is not None:
            on_eval(width, ok, run)
        log.info("Delta_D = %.6g: peak/I0 = %.6g -> %s", width, run.peak / run.I0, ok)
        return ok

    lo, hi = map(float, search_bracket)
    if not 0 < lo < hi:
        raise BracketError("search bracket must satisfy 0 < lo < hi")
    if params.C == 0:
        raise BracketError("no cooperative emission for C = 0; predicate is false everywhere")
    p_lo, p_hi = predicate(lo), predicate(hi)
    if p_lo == p_hi:
        raise BracketError(
            f"predicate is {p_lo} at both ends of [{lo}, {hi}]; bracket does not straddle Delta_m"
        )
    if not p_lo:
        raise BracketError("superradiance appears only at the wide end of the bracket")
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def fit_power_law(points) -> PowerLawFit:
    """Least squares of log y on log x; returns exponent, prefactor and r^2."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least three (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise ValueError("degenerate input: all x values coincide")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(exponent=float(slope), prefactor=float(math.exp(intercept)),
                       r_squared=min(max(r2, 0.0), 1.0))
