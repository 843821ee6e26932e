"""Regenerate the bundled gold permittivity table.

The table samples the Lorentz-Drude parameter set for gold published by
Rakic, Djurisic, Elazar and Majewski (Appl. Opt. 37, 5271, 1998) on a 1 nm
grid from 400 to 900 nm.  The Drude part of the model is also written to the
header because the nanorod module reuses it for its size correction.

Run from the repository root::

    python3 tools/make_gold_table.py
"""

from pathlib import Path

import numpy as np

HC_EV_NM = 1239.84198
PLASMA_EV = 9.03
F0 = 0.760
GAMMA0_EV = 0.053
OSC_F = (0.024, 0.010, 0.071, 0.601, 4.384)
OSC_GAMMA_EV = (0.241, 0.345, 0.870, 2.494, 2.214)
OSC_OMEGA_EV = (0.415, 0.830, 2.969, 4.304, 13.32)

OUT = Path(__file__).resolve().parents[1] / "src" / "plasmonsps" / "data" / "gold_ld_rakic1998.csv"


def lorentz_drude(wavelength_nm):
    w = HC_EV_NM / np.asarray(wavelength_nm, dtype=float)
    eps = 1 - F0 * PLASMA_EV ** 2 / (w * (w + 1j * GAMMA0_EV))
    for f, g, w0 in zip(OSC_F, OSC_GAMMA_EV, OSC_OMEGA_EV):
        eps = eps + f * PLASMA_EV ** 2 / ((w0 ** 2 - w ** 2) - 1j * w * g)
    return eps


def main():
    lam = np.arange(400, 901, 1, dtype=float)
    eps = lorentz_drude(lam)
    lines = [
        "# dataset: gold, Lorentz-Drude model sampled on a 1 nm grid",
        "# source: Rakic et al., Appl. Opt. 37, 5271 (1998), Table 1 (Au)",
        "# version: 1",
        "# convention: exp(-i w t) time dependence, Im(eps) > 0 for absorption",
        f"# drude_plasma_energy_ev: {PLASMA_EV}",
        f"# drude_f0: {F0}",
        f"# drude_gamma_ev: {GAMMA0_EV}",
        "# fermi_velocity_ev_nm: 0.9215",
        "wavelength_nm,eps_real,eps_imag",
    ]
    lines += [f"{l:.1f},{e.real:.12e},{e.imag:.12e}" for l, e in zip(lam, eps)]
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lam)} rows to {OUT}")


if __name__ == "__main__":
    main()
