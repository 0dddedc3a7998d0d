"""LiCs vibrational ladder: dimensionless parameters from SI inputs and the burst time scale."""
import math

from _common import parser
from superradiance.config import PRESETS
from superradiance.rates import MediumParams
from superradiance.twobody import run_scenario

DEBYE = 3.33564e-30  # C m
DENSITY = 4e9 * 1e6  # 4e9 cm^-3 in m^-3
OMEGA0 = 2 * math.pi * 5e12
DIPOLE = 5 * DEBYE


def main():
    parser(__doc__).parse_args()
    s = PRESETS["lics"]
    size = s.rho_size * 2 * 299792458.0 / OMEGA0
    est = MediumParams.from_physical(DENSITY, OMEGA0, size, DIPOLE)
    print(f"from SI inputs: C = {est.C:.3g}, rho_size = {est.rho_size:.3g} (d = {size * 1e3:.3g} mm), "
          f"gamma = {est.gamma:.3g} 1/s")
    print(f"preset: C = {s.C}, rho_size = {s.rho_size}, gamma_SI = {s.gamma_SI} 1/s, j = {s.j}")
    run = run_scenario(s)
    summ = run.summary()
    print(f"t_max = {summ['t_max'] / s.gamma_SI * 1e3:.3g} ms, Gamma_max = {summ['Gamma_max']:.4g} gamma, "
          f"peak/I0 = {summ['peak_I_em'] / summ['I0']:.3g}")


if __name__ == "__main__":
    main()
