"""Gold nanorod plasmon and its effect on a fiber-coupled dipole."""
import numpy as np

from plasmonsps import plasmon as pl
from plasmonsps import waveguide as wg

rod = pl.NanorodSpec()  # 75 x 30 nm in the calibrated effective medium
spec = pl.scattering_spectrum(rod)
print(f"LSPR peak {spec.peak_wavelength:.1f} nm, FWHM {spec.fwhm:.1f} nm")

l_long, l_trans = pl.depolarization_factors(rod)
print(f"depolarization factors: long {l_long:.4f}, transverse {l_trans:.4f}")

# A sphere in water as a sanity case
sphere = pl.scattering_spectrum(pl.NanorodSpec(30.0, 30.0, 1.33))
print(f"30 nm sphere in water: peak {sphere.peak_wavelength:.1f} nm")

# Near-field intensity along the rod at 5 nm standoff
a = rod.semi_axes[0]
d = np.linspace(-(a + 5), a + 5, 11)
for di, e in zip(d, pl.near_field_profile(rod, d, 5.0, 650.0)):
    print(f"d = {di:6.1f} nm   |E|^2 enhancement {e:7.2f}")

# Emitter between rod and fiber: Purcell factor, emission enhancement, DOP
fiber = wg.FiberSpec(320.0, wg.SILICA_INDEX_640, 1.0)
print(" d     PF      PF_z     EF     DOP")
for r in pl.hybrid_curve(rod, fiber, np.arange(0.0, a + 5.0 + 1e-9, 5.0)):
    print(f"{r.d:4.1f} {r.PF:7.2f} {r.purcell_axes[2]:7.2f} {r.EF:6.2f} {r.DOP:.3f}")

far = pl.hybrid_response(rod, fiber, 1e4, 0.0)
print(f"rod 10 um away: PF {far.PF:.4f}, EF {far.EF:.4f}")
