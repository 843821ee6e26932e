"""Guided HE11 mode of a silica nanofiber and dipole channeling into it."""
import numpy as np

from plasmonsps import waveguide as wg

fiber = wg.FiberSpec(320.0, wg.silica_index(640.0), 1.0)
mode = wg.solve_guided_mode(fiber, 640.0)
print(f"V = {mode.v_number:.4f}, n_eff = {mode.effective_index:.5f}, "
      f"single mode: {mode.single_mode}")

# Channeling fractions of a dipole sitting on the surface, per axis
res = wg.channeling_fractions(fiber, 640.0, fiber.diameter / 2, mode=mode)
f = res.fractions
print(f"T_x = {f.T_x:.4f}  T_y = {f.T_y:.4f}  T_z = {f.T_z:.4f}")
print(f"orientation-averaged channeling efficiency {res.averaged_efficiency:.4f}")
print(f"guided DOP {wg.guided_dop(f):.4f}")

# The efficiency drops away from the surface
for gap in (0, 10, 50, 100, 200):
    r = wg.channeling_fractions(fiber, 640.0, fiber.diameter / 2 + gap, mode=mode)
    print(f"gap {gap:4d} nm  efficiency {r.averaged_efficiency:.4f}")

# Diameter sweep: one interior optimum
rows = wg.diameter_sweep(np.arange(200.0, 501.0, 20.0), 640.0)
for r in rows:
    bar = "#" * int(200 * r["efficiency"])
    print(f"{r['parameter']:5.0f} nm  {r['efficiency']:.4f} {bar}")
