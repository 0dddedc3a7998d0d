"""Dicke-ladder emission for spin-j ensembles: N = 10 over j, and fixed J = 15."""
import numpy as np

from _common import parser, save, show
from superradiance.config import PRESETS
from superradiance.dicke import DickeLadder, emission_curve, evolve_cascade


def peak(N, j, t_end, n_out):
    traj = evolve_cascade(DickeLadder.build(N, j), np.linspace(0.0, t_end, n_out))
    I = emission_curve(traj)
    k = int(np.argmax(I))
    return float(I[k]), float(traj.t[k])


def main():
    args = parser(__doc__).parse_args()
    header = ["preset", "j", "N", "peak_I_em", "t_max"]
    rows = []
    for name in ("fig2b", "fig2c"):
        for s in PRESETS[name].cells():
            rows.append([name, str(s.j), s.N, *peak(s.N, s.j, s.t_end, s.n_out)])
    show(header, rows)
    print(save(args.out, "dicke_spin_scan", header, rows))


if __name__ == "__main__":
    main()
