"""Marginal Doppler width at C = 10, rho_size = 10 for j = 1/2 and 9/2.

Each width is a bisection over full trajectories (a few minutes per value).
"""
from _common import parser, save, show
from superradiance.config import PRESETS
from superradiance.doppler import CONVENTIONS, marginal_width
from superradiance.rates import MediumParams


def main():
    p = parser(__doc__)
    p.add_argument("--convention", choices=CONVENTIONS + ("both",), default="printed")
    args = p.parse_args()
    base = PRESETS["fig6"].base
    m = base.marginal
    conventions = CONVENTIONS if args.convention == "both" else (args.convention,)
    header = ["convention", "j", "Delta_m"]
    rows = []
    for conv in conventions:
        for j in PRESETS["fig6"].axes["j"]:
            w = marginal_width(MediumParams(base.C, base.rho_size), j, search_bracket=m.bracket,
                               eps_peak=m.eps_peak, rel_tol=m.rel_tol, t_end=m.t_end,
                               quad_order=base.quad_order, convention=conv)
            rows.append([conv, str(j), w])
            print(f"{conv} j = {j}: Delta_m = {w:.1f}", flush=True)
    show(header, rows)
    print(save(args.out, "doppler_marginal_width", header, rows))


if __name__ == "__main__":
    main()
