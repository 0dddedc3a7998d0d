"""Self-consistent induced rates Gamma (single particle) and GammaBar (pair).

Resonant case: the generated field is on resonance, so the detuning vanishes
and the size parameter enters undressed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "RatePair",
    "MediumParams",
    "RateSolverError",
    "ZETA_MAX",
    "zeta",
    "big_I",
    "big_I_asymptotic",
    "expm1_ratio",
    "solve_rates",
    "solve_fixed_points",
]

# e**(2*350) is still representable; larger exponents are outside the model's regime
ZETA_MAX = 350.0

_HBAR = 1.054571817e-34
_EPS0 = 8.8541878128e-12
_C_LIGHT = 299792458.0


class RateSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class RatePair:
    Gamma: float
    GammaBar: float

    def __post_init__(self):
        if not (math.isfinite(self.Gamma) and math.isfinite(self.GammaBar)):
            raise RateSolverError(f"non-finite rates {self.Gamma}, {self.GammaBar}")


@dataclass(frozen=True)
class MediumParams:
    """Cooperativity C, size parameter rho_size and free-space rate gamma.

    ``C = 2 pi c^3 n / omega^3`` for number density n, ``rho_size = omega d / 2c``
    for sample size d, and ``gamma = p^2 omega^3 / (3 pi hbar eps0 c^3)`` for
    transition dipole p (see :meth:`from_physical`).
    """

    C: float
    rho_size: float
    gamma: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.C) and self.C >= 0):
            raise ValueError(f"C must be finite and >= 0, got {self.C}")
        if not (math.isfinite(self.rho_size) and self.rho_size > 0):
            raise ValueError(f"rho_size must be finite and > 0, got {self.rho_size}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma}")

    @classmethod
    def from_physical(cls, density_m3: float, omega: float, size_m: float, dipole_Cm: float):
        """SI inputs: number density [m^-3], angular frequency [rad/s], size [m], dipole [C m].

        Returns the dimensionless parameters with gamma in s^-1.
        """
        C = 2 * math.pi * _C_LIGHT**3 * density_m3 / omega**3
        rho_size = omega * size_m / (2 * _C_LIGHT)
        gamma = dipole_Cm**2 * omega**3 / (3 * math.pi * _HBAR * _EPS0 * _C_LIGHT**3)
        return cls(C=C, rho_size=rho_size, gamma=gamma)


def zeta(params: MediumParams, Gamma: float, V: float) -> float:
    """Gain exponent (C rho / 2) * gamma / (Gamma + gamma/2) * V."""
    if Gamma < 0:
        raise ValueError("Gamma must be >= 0")
    g = params.gamma
    return 0.5 * params.C * params.rho_size * g / (Gamma + 0.5 * g) * V


def big_I(z, rho):
    """Propagation factor I(zeta, rho); exact form, no large-argument shortcut."""
    z = np.asarray(z, dtype=float)
    rho = np.asarray(rho, dtype=float)
    denom = (z * z + rho * rho) ** 2
    if np.any(denom == 0):
        raise ValueError("I(zeta, rho) is undefined at zeta = rho = 0")
    ez = np.exp(z)
    num = ((z - 1) * ez + np.cos(rho)) ** 2 + (rho * ez - np.sin(rho)) ** 2
    out = num / denom
    return float(out) if out.ndim == 0 else out


def big_I_asymptotic(z, rho):
    """Large-(zeta, rho) approximation e^{2 zeta}/(zeta^2 + rho^2); cross-checks only."""
    z = np.asarray(z, dtype=float)
    out = np.exp(2 * z) / (z * z + np.asarray(rho, dtype=float) ** 2)
    return float(out) if out.ndim == 0 else out


def expm1_ratio(x):
    """expm1(x)/x, equal to 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 + x / 2 + x * x / 6, np.expm1(safe) / safe)
    return float(out) if out.ndim == 0 else out


def _gain_term(A: float, V: float, kappa: float, gamma: float) -> float:
    # gamma (e^{2 zeta} - 1) A / V with zeta = kappa V; finite as V -> 0
    return gamma * A * 2.0 * kappa * expm1_ratio(2.0 * kappa * V)


def _resonant_parts(params: MediumParams, Gamma: float, V: float):
    g = params.gamma
    inv = 1.0 / (Gamma + 0.5 * g)
    kappa = 0.5 * params.C * params.rho_size * g * inv
    return kappa, kappa * V, inv


def _induced_rate(params: MediumParams, A: float, V: float, Y: float, Gamma: float) -> float:
    kappa, z, inv = _resonant_parts(params, Gamma, V)
    if z > ZETA_MAX:
        return math.inf
    g = params.gamma
    C, r = params.C, params.rho_size
    coh = 2.0 * C**2 * r**4 * g**2 * big_I(z, r) * inv * Y if Y != 0 else 0.0
    return _gain_term(A, V, kappa, g) + coh


def _pair_rate(params: MediumParams, A: float, V: float, Y: float, Gamma: float) -> float:
    _, z, inv = _resonant_parts(params, Gamma, V)
    C, r, g = params.C, params.rho_size, params.gamma
    return g**2 * big_I(z, r) * inv * (3.0 * C * r * A + 2.0 * C**2 * r**4 * Y)


def _bracket_root(residual, guess: float, gamma: float):
    """Return (lo, hi) with residual(lo) <= 0 < residual(hi), or None if the root is at 0."""
    guess = max(guess, 0.0)
    r0 = residual(guess)
    if r0 <= 0:
        lo, hi = guess, 2.0 * guess + gamma
        while residual(hi) <= 0:
            lo, hi = hi, 2.0 * hi + gamma
            if hi > 1e12 * gamma:
                raise RateSolverError("could not bracket the induced rate")
        return lo, hi
    hi = guess
    lo = 0.5 * guess
    while lo > 1e-14 * gamma:
        if residual(lo) <= 0:
            return lo, hi
        hi, lo = lo, 0.5 * lo
    if residual(0.0) < 0:
        return 0.0, hi
    return None


def solve_rates(params: MediumParams, obs, Gamma_guess: float | None = None) -> RatePair:
    """Solve Gamma = f(Gamma) for the resonant medium, then evaluate GammaBar.

    ``obs`` supplies A, V, Y. The root nearest the warm start is tracked; if the
    right-hand side is non-positive at Gamma = 0 the induced rate is 0.
    """
    A, V, Y = float(obs.A), float(obs.V), float(obs.Y)
    g = params.gamma
    if params.C == 0 or (A == 0 and Y == 0):
        return RatePair(0.0, _pair_rate(params, A, V, Y, 0.0) if params.C else 0.0)
    guess = g if Gamma_guess is None else Gamma_guess
    big = 1e200

    def residual(G):
        f = _induced_rate(params, A, V, Y, G)
        return G - min(f, big)

    bracket = _bracket_root(residual, guess, g)
    if bracket is None:
        G = 0.0
    else:
        lo, hi = bracket
        try:
            G = brentq(residual, lo, hi, xtol=1e-300, rtol=1e-14, maxiter=500)
        except RuntimeError as exc:
            raise RateSolverError(f"induced-rate root search failed: {exc}") from exc
    z = zeta(params, G, V)
    if z > ZETA_MAX:
        raise RateSolverError(f"gain exponent zeta = {z:.4g} exceeds {ZETA_MAX}")
    return RatePair(G, _pair_rate(params, A, V, Y, G))


def solve_fixed_points(func, guess, scale: float = 1.0, rtol: float = 1e-13, maxiter: int = 200):
    """Vectorised safeguarded root search for ``x = func(x)`` with ``x >= 0``.

    ``func`` maps an array of candidates to an array of right-hand sides. Roots
    are bracketed around ``guess`` and refined by Illinois regula falsi with
    bisection fallback. Entries with func(0) <= 0 return 0.
    """
    x0 = np.maximum(np.asarray(guess, dtype=float), 0.0)

    def res(x):
        return x - np.minimum(func(x), 1e200)

    r0 = res(x0)
    lo = np.where(r0 <= 0, x0, 0.0)
    hi = np.where(r0 > 0, x0, np.inf)
    rlo = np.where(r0 <= 0, r0, np.nan)
    rhi = np.where(r0 > 0, r0, np.nan)

    # expand upwards where the guess sits below the root
    up = r0 <= 0
    step = x0 + scale
    for _ in range(200):
        if not up.any():
            break
        trial = np.where(up, lo + step, hi)
        rt = res(trial)
        found = up & (rt > 0)
        hi = np.where(found, trial, hi)
        rhi = np.where(found, rt, rhi)
        moved = up & ~found
        lo = np.where(moved, trial, lo)
        rlo = np.where(moved, rt, rlo)
        step = np.where(moved, 2 * step, step)
        up = moved
    else:
        raise RateSolverError("could not bracket induced rates")

    # shrink downwards where the guess sits above the root
    down = (r0 > 0) & (x0 > 0)
    trial = 0.5 * x0
    for _ in range(60):
        if not down.any():
            break
        rt = res(trial)
        found = down & (rt <= 0)
        lo = np.where(found, trial, lo)
        rlo = np.where(found, rt, rlo)
        shrink = down & ~found
        hi = np.where(shrink, trial, hi)
        rhi = np.where(shrink, rt, rhi)
        trial = 0.5 * trial
        down = shrink
    pending = np.isnan(rlo)
    if pending.any():
        rz = res(np.zeros_like(x0))
        lo = np.where(pending, 0.0, lo)
        rlo = np.where(pending, rz, rlo)
    # rlo >= 0 only at an exact root: lo == 0 with func(0) <= 0, or a warm start on the root
    settled = rlo >= 0
    if np.all(settled):
        return lo

    side = np.zeros_like(x0)
    x = lo.copy()
    for _ in range(maxiter):
        width = hi - lo
        done = settled | (width <= rtol * np.abs(hi) + 1e-300)
        if done.all():
            break
        denom = rhi - rlo
        x = np.where(denom != 0, hi - rhi * width / np.where(denom != 0, denom, 1.0), 0.5 * (lo + hi))
        bad = ~((x > lo) & (x < hi))
        x = np.where(bad, 0.5 * (lo + hi), x)
        x = np.where(done, lo, x)
        rx = res(x)
        upper = (rx > 0) & ~done
        lower = (rx <= 0) & ~done
        hi = np.where(upper, x, hi)
        rhi = np.where(upper, rx, rhi)
        rlo = np.where(upper & (side == 1), 0.5 * rlo, rlo)
        lo = np.where(lower, x, lo)
        rlo = np.where(lower, rx, rlo)
        rhi = np.where(lower & (side == -1), 0.5 * rhi, rhi)
        side = np.where(upper, 1, np.where(lower, -1, side))
        # a sliver of bisection keeps stagnating ends moving
        mid = 0.5 * (lo + hi)
        stalled = ~done & ((hi - lo) > 0.5 * width)
        if stalled.any():
            rm = res(mid)
            up_m = stalled & (rm > 0)
            lo_m = stalled & (rm <= 0)
            hi = np.where(up_m, mid, hi)
            rhi = np.where(up_m, rm, rhi)
            lo = np.where(lo_m, mid, lo)
            rlo = np.where(lo_m, rm, rlo)
    else:
        raise RateSolverError("induced-rate fixed points did not converge")
    root = np.where(np.abs(rlo) <= np.abs(rhi), lo, hi)
    return np.where(settled, lo, root)
