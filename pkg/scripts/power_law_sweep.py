"""Marginal Doppler width against cooperativity for j = 1/2 and its power-law fit.

Five bisections over full trajectories; expect roughly a quarter of an hour.
"""
from _common import parser, save, show
from superradiance.cli import sweep_table
from superradiance.config import PRESETS
from superradiance.doppler import fit_power_law


def main():
    p = parser(__doc__)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    header, rows = sweep_table(PRESETS["fig5"], args.workers)
    show(header, rows)
    print(save(args.out, "power_law_sweep", header, rows))
    iC, iW = header.index("C"), header.index("Delta_m")
    fit = fit_power_law([(float(r[iC]), float(r[iW])) for r in rows if not r[-1]])
    print(f"Delta_m ~ {fit.prefactor:.4g} C^{fit.exponent:.3f}  (r^2 = {fit.r_squared:.4f})")


if __name__ == "__main__":
    main()
