"""Two-body mean-field superradiance for j = 1/2 ... 9/2 at C = 10, rho_size = 10."""
from _common import parser, save, show
from superradiance.config import PRESETS
from superradiance.twobody import run_scenario


def main():
    args = parser(__doc__).parse_args()
    header = ["j", "I0", "peak_I_em", "t_max", "Gamma0", "Gamma_max"]
    rows = []
    for s in PRESETS["fig3a"].cells():
        summ = run_scenario(s).summary()
        rows.append([str(s.j), *(summ[k] for k in header[1:])])
    show(header, rows)
    print(save(args.out, "two_body_spin_scan", header, rows))


if __name__ == "__main__":
    main()
