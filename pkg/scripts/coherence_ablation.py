"""Emission curves with classes of two-body coherences removed, against the full run."""
import numpy as np

from _common import parser, save, show
from superradiance.config import PRESETS
from superradiance.twobody import run_scenario


def main():
    args = parser(__doc__).parse_args()
    spec = PRESETS["fig4"]
    runs = {(str(s.j), s.ablation_preset): run_scenario(s) for s in spec.cells()}
    header = ["j", "preset", "peak_I_em", "t_max", "sup_distance_to_full", "min_eigenvalue"]
    rows = []
    for (j, preset), run in runs.items():
        full = runs[(j, "full")]
        n = min(len(run.I_em), len(full.I_em))
        d = float(np.max(np.abs(run.I_em[:n] - full.I_em[:n])))
        rows.append([j, preset, run.peak, run.t_max, d, run.diagnostics["min_eigenvalue"]])
    show(header, rows)
    print(save(args.out, "coherence_ablation", header, rows))


if __name__ == "__main__":
    main()
