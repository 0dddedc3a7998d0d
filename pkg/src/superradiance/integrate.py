"""Adaptive Dormand-Prince 5(4) stepping with dense output and per-step hooks.

Time is measured in units of 1/gamma throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "StepperConfig",
    "IntegrationError",
    "Trajectory",
    "step_embedded",
    "integrate_to",
]

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension (Shampine 1986), columns multiply theta**1..4
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


@dataclass
class StepperConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    dt_init: float = 1e-6
    dt_max: float = np.inf
    dt_min: float = 1e-12
    # largest allowed relative change of a monitored rate over one step
    rate_change_cap: float = 0.05
    max_steps: int = 2_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "dt_init", "dt_max", "dt_min", "rate_change_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"StepperConfig.{name} must be positive")
        if self.rel_tol < 1e-12:
            raise ValueError("StepperConfig.rel_tol must be >= 1e-12")


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float, state=None):
        super().__init__(f"{message} (t = {t:.6g})")
        self.t = t
        self.state = state


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    step_t: list = field(default_factory=list)
    step_y: list = field(default_factory=list)
    n_accepted: int = 0
    n_rejected: int = 0
    stopped_early: bool = False


def step_embedded(rhs, t, y, dt, k1=None):
    """One Dormand-Prince step.

    Returns ``(y_new, error_estimate, stages)``; ``stages`` has shape (7, *y.shape)
    and its last entry is rhs(t + dt, y_new).
    """
    y = np.asarray(y)
    dtype = np.result_type(y, float)
    K = np.empty((7,) + y.shape, dtype=dtype)
    K[0] = rhs(t, y) if k1 is None else k1
    for s in range(1, 7):
        dy = np.tensordot(_A[s], K[:s], axes=1)
        K[s] = rhs(t + _C[s] * dt, y + dt * dy)
    y_new = y + dt * np.tensordot(_B, K, axes=1)
    err = dt * np.tensordot(_E, K, axes=1)
    return y_new, err, K


def _dense(y, K, dt, theta):
    coeff = _P @ (theta ** np.arange(1, 5))
    return y + dt * np.tensordot(coeff, K, axes=1)


def _error_norm(err, y, y_new, cfg: StepperConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def integrate_to(
    rhs: Callable,
    y0,
    t_grid: Sequence[float],
    config: Optional[StepperConfig] = None,
    hooks: Sequence[Callable] = (),
    stop: Optional[Callable] = None,
    guard: Optional[Callable] = None,
    record_steps: bool = False,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` and sample at ``t_grid``.

    ``hooks`` run in order after every accepted step as ``hook(t, y)``; a hook may
    return a replacement state (e.g. a projection) or None. ``stop(t, y)`` ends
    the run early, after which the grid is truncated. ``guard(t, y_old, y_new)``
    can veto an otherwise accepted step, which is then retried at half size.
    """
    cfg = config or StepperConfig()
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")

    y = np.array(y0, dtype=np.result_type(np.asarray(y0), float))
    t = float(t_grid[0])
    t_end = float(t_grid[-1])
    out = np.empty((len(t_grid),) + y.shape, dtype=y.dtype)
    out[0] = y
    gi = 1
    traj = Trajectory(t=t_grid, y=out)
    if record_steps:
        traj.step_t.append(t)
        traj.step_y.append(y.copy())

    dt = min(cfg.dt_init, cfg.dt_max, max(t_end - t, cfg.dt_min))
    k1 = None
    while gi < len(t_grid):
        if traj.n_accepted + traj.n_rejected > cfg.max_steps:
            raise IntegrationError("step budget exhausted", t, y)
        dt = min(dt, t_end - t, cfg.dt_max)
        try:
            y_new, err, K = step_embedded(rhs, t, y, dt, k1)
        except (FloatingPointError, ArithmeticError) as exc:
            raise IntegrationError(f"right-hand side failed: {exc}", t, y) from exc
        enorm = _error_norm(err, y, y_new, cfg)
        if not np.isfinite(enorm):
            enorm = np.inf
        if enorm > 1.0 or (guard is not None and not guard(t, y, y_new)):
            traj.n_rejected += 1
            shrink = 0.5 if enorm <= 1.0 else max(0.2, 0.9 * enorm ** -0.2)
            dt *= shrink
            k1 = K[0]
            if dt < cfg.dt_min:
                raise IntegrationError("step size underflow", t, y)
            continue

        t_new = t + dt
        # grid points inside the step come from the continuous extension
        while gi < len(t_grid) and t_grid[gi] <= t_new * (1 + 1e-15):
            theta = (t_grid[gi] - t) / dt
            out[gi] = y_new if theta >= 1.0 else _dense(y, K, dt, theta)
            gi += 1

        k1 = K[6]
        for hook in hooks:
            res = hook(t_new, y_new)
            if res is not None:
                y_new = res
                k1 = None
        t, y = t_new, y_new
        traj.n_accepted += 1
        if record_steps:
            traj.step_t.append(t)
            traj.step_y.append(y.copy())
        if stop is not None and stop(t, y):
            traj.t = t_grid[:gi]
            traj.y = out[:gi]
            traj.stopped_early = True
            break

        factor = 5.0 if enorm == 0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
        dt *= factor
    return traj
