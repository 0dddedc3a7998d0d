"""One test per acceptance criterion; verdicts are listed in the terminal summary."""
import math
from functools import lru_cache

import numpy as np
import pytest

from conftest import record
from oracles import brute_force_enhancement, erfcx_quad
from superradiance.ablation import preset_mask
from superradiance.angular import half
from superradiance.config import PRESETS
from superradiance.dicke import DickeLadder, emission_curve, enhancement_factor, evolve_cascade
from superradiance.doppler import DopplerParams, doppler_rates, erfcx_complex, fit_power_law, marginal_width
from superradiance.rates import MediumParams, RatePair, solve_rates
from oracles import bisect_roots, resonant_rhs
from superradiance.twobody import ResonantRates, run_scenario, run_twobody

P10 = MediumParams(10.0, 10.0)
SPINS = ["1/2", "1", "3/2", "2", "5/2", "3", "7/2", "4", "9/2"]
ABLATIONS = ["full", "no-offdiag", "same-level", "same+cross", "same+cross+higher"]
DIAG_LIMITS = {
    "max_trace_drift": 1e-9,
    "max_hermiticity": 1e-10,
    "min_eigenvalue": -1e-6,
    "energy_balance": 1e-6,
}

# every trajectory run by criteria 3-8, for the structure-invariant check
_DIAGNOSTICS: dict = {}


@lru_cache(maxsize=None)
def dicke_run(N, j, t_end, n_out):
    traj = evolve_cascade(DickeLadder.build(N, j), np.linspace(0.0, t_end, n_out))
    _DIAGNOSTICS[f"dicke N={N} j={j}"] = traj.diagnostics()
    I = emission_curve(traj)
    k = int(np.argmax(I))
    return I[k], traj.t[k]


@lru_cache(maxsize=None)
def twobody_run(j, preset="full"):
    base = PRESETS["fig3a"].base
    run = run_scenario(base.replace(j=half(j), ablation_preset=preset))
    _DIAGNOSTICS[f"twobody j={j} {preset}"] = dict(run.diagnostics)
    return run


def _collect(tag):
    def on_eval(width, ok, run):
        _DIAGNOSTICS[f"{tag} Delta_D={width:.6g}"] = dict(run.diagnostics)
    return on_eval


@lru_cache(maxsize=None)
def marginal(C, j, bracket):
    m = PRESETS["fig6"].base.marginal
    return marginal_width(MediumParams(C, 10.0), j, search_bracket=bracket, eps_peak=m.eps_peak,
                          rel_tol=m.rel_tol, t_end=m.t_end, on_eval=_collect(f"doppler C={C} j={j}"))


def test_c1_spin_half_closed_form():
    worst = 0.0
    for N in range(1, 13):
        J = N / 2
        for k in range(N + 1):
            M = J - k
            exact = (J + M) * (J - M + 1)
            worst = max(worst, abs(enhancement_factor(N, "1/2", half(f"{N - 2 * k}/2")) - exact))
    assert record("1", worst < 1e-9, f"spin-1/2 closed form, N <= 12: max |error| = {worst:.2e}")


def test_c2_brute_force_oracle():
    worst = 0.0
    for N in range(1, 5):
        for tj in range(1, 5):
            if (tj + 1) ** N > 5000:
                continue
            J2 = N * tj
            for tM in range(J2, -J2 - 1, -2):
                ref = brute_force_enhancement(N, tj, tM)
                got = enhancement_factor(N, half(f"{tj}/2"), half(f"{tM}/2"))
                worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    assert record("2", worst < 1e-9, f"brute-force Dicke states, N <= 4, j <= 2: max rel error = {worst:.2e}")


DICKE_SLOW_SATURATION = pytest.mark.xfail(
    strict=True,
    reason="Dicke peaks level off (+3.4%, +2.4% per step) but 7/2 -> 9/2 totals 5.9%",
)


@DICKE_SLOW_SATURATION
def test_c3_dicke_peak_saturates():
    s = PRESETS["fig2b"].base
    peaks = [dicke_run(10, j, s.t_end, s.n_out)[0] for j in SPINS]
    rising = all(b > a for a, b in zip(peaks[:4], peaks[1:4]))
    change = abs(peaks[-1] - peaks[-3]) / peaks[-3]
    ok = rising and change < 0.05
    assert record("3", ok, f"N = 10 per-particle peaks {np.round(peaks, 3).tolist()}; "
                  f"increasing to j = 2: {rising}; 7/2 -> 9/2 change {change:.2%}")


def test_c4_fixed_total_spin():
    s = PRESETS["fig2c"].base
    peaks = [dicke_run(N, j, s.t_end, s.n_out)[0] for j, N in (("1/2", 30), ("3/2", 10), ("15/2", 2))]
    ok = peaks[0] > peaks[1] > peaks[2]
    assert record("4", ok, f"J = 15 peaks (1/2,30) {peaks[0]:.3f} > (3/2,10) {peaks[1]:.3f} "
                  f"> (15/2,2) {peaks[2]:.3f}")


def test_c5_two_body_superradiance():
    runs = [twobody_run(j) for j in SPINS]
    bursts = all(r.peak > r.I0 for r in runs)
    tail = runs[-3:]
    peak_spread = max(abs(b.peak - a.peak) / a.peak for a, b in zip(tail, tail[1:]))
    t_spread = max(abs(b.t_max - a.t_max) / a.t_max for a, b in zip(tail, tail[1:]))
    ok = bursts and peak_spread < 0.05 and t_spread < 0.05
    assert record("5", ok, f"peaks {[round(r.peak, 2) for r in runs]}; all > I0: {bursts}; "
                  f"j >= 7/2 peak change {peak_spread:.2%}, t_max change {t_spread:.2%}")


def _sup(a, b):
    n = min(len(a.I_em), len(b.I_em))
    return float(np.max(np.abs(a.I_em[:n] - b.I_em[:n])))


@pytest.mark.parametrize("j", ["1/2", "1", "9/2"])
def test_c6a_diagonal_only_monotone(j):
    run = twobody_run(j, "no-offdiag")
    rise = float(np.max(np.diff(run.I_em)))
    assert record("6a", rise <= 0, f"j = {j} diagonal-only I_em non-increasing: max step {rise:.3e}")


@pytest.mark.parametrize("j", ["1", "9/2"])
def test_c6b_coherence_hierarchy(j):
    full = twobody_run(j)
    d = {p: _sup(twobody_run(j, p), full) for p in ABLATIONS[1:]}
    # "within 10%" is measured against the total coherence effect d(no-offdiag)
    gap = abs(d["same+cross+higher"] - d["same+cross"]) / d["no-offdiag"]
    ok = d["same+cross"] < d["same-level"] and gap < 0.10
    assert record("6b", ok, f"j = {j} sup distances {', '.join(f'{k}: {v:.3g}' for k, v in d.items())}; "
                  f"higher-order gap {gap:.2%} of d(no-offdiag)")


J92_MISS = pytest.mark.xfail(
    strict=True,
    reason="printed convention gives Delta_m near 2050 for j = 9/2, 24% above 1650",
)


@pytest.mark.parametrize("j,target", [("1/2", 433.0), pytest.param("9/2", 1650.0, marks=J92_MISS)])
def test_c7_marginal_widths(j, target):
    width = marginal(10.0, j, tuple(PRESETS["fig6"].base.marginal.bracket))
    err = width / target - 1
    assert record("7", abs(err) <= 0.15, f"j = {j} Delta_m = {width:.1f} vs {target:g} ({err:+.1%})")


@pytest.mark.slow
def test_c8_power_law_exponent():
    spec = PRESETS["fig5"]
    bracket = tuple(spec.base.marginal.bracket)
    pts = [(C, marginal(C, "1/2", bracket)) for C in spec.axes["C"]]
    fit = fit_power_law(pts)
    ok = 1.7 <= fit.exponent <= 2.3
    assert record("8", ok, f"Delta_m(C) = {[round(w, 1) for _, w in pts]}; exponent {fit.exponent:.3f} "
                  f"(r^2 = {fit.r_squared:.4f})")


POSITIVITY_LOSS = pytest.mark.xfail(
    strict=True,
    reason="keeping cross but not higher-order coherences breaks positivity (eigenvalue near -0.02)",
)


def _check_invariants(label, keys):
    bad = []
    for key in keys:
        diag = _DIAGNOSTICS[key]
        for name, lim in DIAG_LIMITS.items():
            v = float(diag[name])
            if (v < lim) if name == "min_eigenvalue" else (v >= lim):
                bad.append(f"{key}: {name} = {v:.3g}")
    worst = {n: (min if n == "min_eigenvalue" else max)(float(_DIAGNOSTICS[k][n]) for k in keys)
             for n in DIAG_LIMITS}
    detail = f"{label}: {len(keys)} runs, worst " + ", ".join(f"{n} {v:.2g}" for n, v in worst.items())
    if bad:
        detail += "; violations: " + "; ".join(bad)
    assert record("9", not bad, detail)


def test_c9_invariants_dicke():
    for N, j, s in [(10, j, PRESETS["fig2b"].base) for j in SPINS] + [
        (N, j, PRESETS["fig2c"].base) for j, N in (("1/2", 30), ("3/2", 10), ("15/2", 2))
    ]:
        dicke_run(N, j, s.t_end, s.n_out)
    _check_invariants("Dicke ladders", [k for k in _DIAGNOSTICS if k.startswith("dicke")])


def test_c9_invariants_two_body():
    keys = [f"twobody j={twobody_run(j).j} full" for j in SPINS]
    _check_invariants("two-body", keys)


@pytest.mark.parametrize("preset", [
    "no-offdiag", "same-level", pytest.param("same+cross", marks=POSITIVITY_LOSS), "same+cross+higher",
])
def test_c9_invariants_ablation(preset):
    keys = []
    for j in ("1/2", "1", "9/2"):
        twobody_run(j, preset)
        keys.append(f"twobody j={j} {preset}")
    _check_invariants(f"ablation {preset}", keys)


def test_c9_invariants_doppler():
    marginal(10.0, "1/2", tuple(PRESETS["fig6"].base.marginal.bracket))
    marginal(10.0, "9/2", tuple(PRESETS["fig6"].base.marginal.bracket))
    _check_invariants("Doppler bisection runs", [k for k in _DIAGNOSTICS if k.startswith("doppler C=10.0")])


@pytest.mark.slow
def test_c9_invariants_power_law_sweep():
    spec = PRESETS["fig5"]
    for C in spec.axes["C"]:
        marginal(C, "1/2", tuple(spec.base.marginal.bracket))
    _check_invariants("power-law sweep runs", [k for k in _DIAGNOSTICS if k.startswith("doppler")])


def test_c10a_erfcx_grid():
    rng = np.random.default_rng(20240601)
    z = rng.uniform(0, 50, 200) * np.exp(1j * rng.uniform(0, math.pi / 2, 200))
    ref = np.array([erfcx_quad(v) for v in z])
    err = float(np.max(np.abs(erfcx_complex(z) - ref) / np.abs(ref)))
    assert record("10", err < 1e-10, f"erfcx vs quadrature, 200 points: max rel error {err:.2e}")


NARROW_LIMIT_PRINTED = pytest.mark.xfail(
    strict=True,
    reason="printed convention has Im U in the gain exponent, which vanishes as Delta_D -> 0",
)


@pytest.mark.parametrize("convention", [pytest.param("printed", marks=NARROW_LIMIT_PRINTED), "consistent"])
def test_c10b_narrow_doppler_limit(convention):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        A = rng.uniform(0, 1)
        obs = type("Obs", (), dict(A=A, V=rng.uniform(-1, 1) * A, Y=rng.uniform(0, 0.25)))()
        ref = solve_rates(P10, obs)
        got = doppler_rates(0.0, DopplerParams(1e-3), P10, obs, ref.Gamma, convention=convention)
        for a, b in ((got.Gamma, ref.Gamma), (got.GammaBar, ref.GammaBar)):
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    assert record("10", worst < 1e-3, f"Delta_D -> 0 limit ({convention}): max rel error {worst:.2e}")


def test_c11_rate_solver_oracle():
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(100):
        A = rng.uniform(0, 1)
        V = rng.uniform(-A, A)
        Y = rng.uniform(0, 0.25)
        obs = type("Obs", (), dict(A=A, V=V, Y=Y))()
        roots = bisect_roots(lambda G: resonant_rhs(G, A, V, Y, 10.0, 10.0))
        got = solve_rates(P10, obs).Gamma
        best = min(roots, key=lambda r: abs(r - got))
        worst = max(worst, abs(got - best) / max(best, 1e-300))
    assert record("11", worst < 1e-8, f"fixed point vs bracketing bisection, 100 tuples: max rel error {worst:.2e}")
