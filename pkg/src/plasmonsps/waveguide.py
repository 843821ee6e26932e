"""Fundamental (HE11) mode of a step-index nanofiber and dipole channeling.

Units: lengths in nm, propagation constants in rad/nm.  Fields use natural
units (eps0 = mu0 = c = 1) with time dependence ``exp(-i w t)`` and are
normalized so that each guided mode carries unit power along the axis.

Coordinates: z is the fiber axis.  For an emitter at radius r0, the dipole
axes are x = radial direction through the emitter, y = azimuthal direction,
z = fiber axis.

The fraction of dipole emission channeled into the fiber follows from the
reciprocity (mode-overlap) expression: a dipole ``p`` at ``r0`` couples a
power ``w**2 |E_mu(r0) . p|**2 / 16`` into the unit-power mode mu.  Dividing
by the emitted power of the same dipole in the cladding medium gives

    T_i = 3 pi / (4 n_clad k0**2) * sum_mu |E_mu(r0) . e_i|**2

summed over both quasi-linear polarizations and both propagation
directions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import (DegenerateInput, InvalidGeometry, MultimodeWarning,
                     NoGuidedMode, NonConvergence)

SILICA_INDEX_640 = 1.457
SINGLE_MODE_CUTOFF = 2.404825557695773  # first zero of J0

# Fused silica, three-term Sellmeier fit (wavelength in um).
_SELLMEIER_B = (0.6961663, 0.4079426, 0.8974794)
_SELLMEIER_C = (0.0684043, 0.1162414, 9.896161)


def silica_index(wavelength: float) -> float:
    """Refractive index of fused silica from the three-term Sellmeier formula.

    The package default is the fixed value ``SILICA_INDEX_640``; this
    function is offered for dispersion studies.

    Parameters
    ----------
    wavelength : float
        Vacuum wavelength in nm.
    """
    lam2 = (wavelength * 1e-3) ** 2
    s = sum(b * lam2 / (lam2 - c * c) for b, c in zip(_SELLMEIER_B, _SELLMEIER_C))
    return float(np.sqrt(1.0 + s))


@dataclass(frozen=True)
class FiberSpec:
    """Step-index fiber geometry.

    Parameters
    ----------
    diameter : float
        Core diameter in nm.
    core_index : float
        Core refractive index.
    clad_index : float
        Index of the surrounding medium.
    """

    diameter: float
    core_index: float = SILICA_INDEX_640
    clad_index: float = 1.0

    def __post_init__(self):
        if not self.diameter > 0:
            raise InvalidGeometry("fiber diameter must be positive")
        if not self.core_index > self.clad_index >= 1.0:
            raise InvalidGeometry("need core_index > clad_index >= 1")

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter

    def v_number(self, wavelength: float) -> float:
        return (np.pi * self.diameter / wavelength
                * np.sqrt(self.core_index ** 2 - self.clad_index ** 2))


@dataclass(frozen=True)
class FieldProfile:
    """Sampled quasi-linearly (x) polarized forward mode on a polar grid.

    The radial grid is uniform within the core (the first ``n_core`` nodes)
    and, separately, within the cladding out to ``r[-1]``.  The interface
    radius appears twice, once evaluated on each side.
    Arrays have shape ``(3, n_r, n_phi)`` and hold the cylindrical
    components (r, phi, z) of E and H.
    """

    r: np.ndarray
    phi: np.ndarray
    n_core: int
    E: np.ndarray
    H: np.ndarray

    def guided_power(self) -> float:
        """Axial power recomputed from the samples (Simpson in r, spectral in phi)."""
        sz = 0.5 * np.real(self.E[0] * np.conj(self.H[1]) - self.E[1] * np.conj(self.H[0]))
        ring = sz.mean(axis=1) * 2.0 * np.pi * self.r
        core = slice(0, self.n_core)
        clad = slice(self.n_core, None)
        return float(integrate.simpson(ring[core], x=self.r[core])
                     + integrate.simpson(ring[clad], x=self.r[clad]))


@dataclass(frozen=True)
class GuidedMode:
    """Solved HE11 mode.

    Attributes
    ----------
    fiber : FiberSpec
    wavelength : float
        Vacuum wavelength in nm.
    beta : float
        Propagation constant in rad/nm.
    v_number : float
    u, w : float
        Transverse core and cladding parameters ``h a`` and ``q a``.
    field_profile : FieldProfile
        Sampled, power-normalized field.
    """

    fiber: FiberSpec
    wavelength: float
    beta: float
    v_number: float
    u: float
    w: float
    field_profile: FieldProfile = field(repr=False, compare=False)
    amplitude: float = field(default=1.0, repr=False)

    @property
    def k0(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def effective_index(self) -> float:
        return self.beta / self.k0

    @property
    def single_mode(self) -> bool:
        return self.v_number < SINGLE_MODE_CUTOFF

    def circular_components(self, r, inside=None) -> np.ndarray:
        """Cylindrical components of the l = +1 mode at radii ``r``.

        Returns an array of shape ``(6,) + r.shape`` holding
        ``(E_r, E_phi, E_z, H_r, H_phi, H_z)`` without the ``exp(i phi)``
        factor, scaled to unit guided power.  ``inside`` optionally forces
        the region (core where True), which matters only at ``r = a``.
        """
        return _circular_fields(np.asarray(r, dtype=float), self, inside) * self.amplitude

    def electric_field(self, points, polarization: float = 0.0,
                       direction: int = 1) -> np.ndarray:
        """Cartesian electric field of a quasi-linearly polarized mode.

        Parameters
        ----------
        points : array_like, shape (..., 3)
            Cartesian positions in nm.
        polarization : float
            Angle (rad) of the principal polarization axis from x.
        direction : {+1, -1}
            Propagation direction along z.

        Returns
        -------
        ndarray, shape (..., 3), complex
        """
        p = np.asarray(points, dtype=float)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        r = np.hypot(x, y)
        ph = np.arctan2(y, x)
        er, ep, ez = self.circular_components(r)[:3]
        c = np.sqrt(2.0) * np.cos(ph - polarization)
        s = np.sqrt(2.0) * np.sin(ph - polarization)
        Er = er * c
        Ep = 1j * ep * s
        Ez = direction * ez * c
        phase = np.exp(1j * direction * self.beta * z)
        Ex = (Er * np.cos(ph) - Ep * np.sin(ph)) * phase
        Ey = (Er * np.sin(ph) + Ep * np.cos(ph)) * phase
        return np.stack([Ex, Ey, Ez * phase], axis=-1)

    def mode_fields(self, points) -> np.ndarray:
        """Fields of the four guided modes (x/y polarization, +/- direction).

        Returns an array of shape ``(4, ..., 3)``.
        """
        return np.stack([self.electric_field(points, pol, d)
                         for pol in (0.0, 0.5 * np.pi) for d in (1, -1)])


def _circular_fields(r: np.ndarray, mode: GuidedMode, inside=None) -> np.ndarray:
    fib = mode.fiber
    a = fib.radius
    k = mode.k0
    beta = mode.beta
    u, w = mode.u, mode.w
    h, q = u / a, w / a
    j1u = special.jv(1, u)
    k1w = special.kv(1, w)
    s = ((1 / u ** 2 + 1 / w ** 2)
         / (special.jvp(1, u) / (u * j1u) + special.kvp(1, w) / (w * k1w)))
    # E_z amplitude 1 in the core; H_z follows from the boundary conditions
    b_coef = 1j * beta * s / k
    out = np.zeros((6,) + r.shape, dtype=complex)
    rr = np.where(r > 0, r, 1e-300)
    inside = r < a if inside is None else np.broadcast_to(inside, r.shape)
    ri, ro = rr[inside], rr[~inside]

    for mask, rv, kap2, Z, dZ in (
            (inside, ri, h * h, special.jv(1, h * ri), h * special.jvp(1, h * ri)),
            (~inside, ro, -q * q, j1u / k1w * special.kv(1, q * ro),
             j1u / k1w * q * special.kvp(1, q * ro))):
        ez, dez = Z, dZ
        hz, dhz = b_coef * Z, b_coef * dZ
        er = (1j * beta * dez - (k / rv) * hz) / kap2
        ep = -(1j * k * dhz + beta * ez / rv) / kap2
        hr = (ez / rv - beta * ep) / k
        hp = (beta * er + 1j * dez) / k
        out[:, mask] = [er, ep, ez, hr, hp, hz]

    # finite limits on the axis: J1(hr)/r -> h/2
    on_axis = r == 0
    if np.any(on_axis):
        ez0 = 0.0
        hz_over_r = b_coef * h / 2
        dez0, dhz0 = h / 2, b_coef * h / 2
        er = (1j * beta * dez0 - k * hz_over_r) / (h * h)
        ep = -(1j * k * dhz0 + beta * (h / 2)) / (h * h)
        hr = ((h / 2) - beta * ep) / k
        hp = (beta * er + 1j * dez0) / k
        out[:, on_axis] = np.array([er, ep, ez0, hr, hp, 0.0])[:, None]
    return out


def _dispersion(w: np.ndarray, V: float, k: float, a: float, n1: float, n2: float):
    """HE11 eigenvalue equation written in the cladding parameter ``w``."""
    u = np.sqrt((V - w) * (V + w))
    beta = np.sqrt(n1 * n1 * k * k - (u / a) ** 2)
    kp = special.kvp(1, w) / (w * special.kv(1, w))
    delta = (n1 * n1 - n2 * n2) / (2 * n1 * n1)
    root = np.sqrt(delta ** 2 * kp ** 2
                   + (beta / (n1 * k)) ** 2 * (1 / u ** 2 + 1 / w ** 2) ** 2)
    return (special.jv(0, u) / (u * special.jv(1, u))
            + (n1 * n1 + n2 * n2) / (2 * n1 * n1) * kp - 1 / u ** 2 + root)


def _radial_grid(a: float, q: float, n_radial: int) -> tuple[np.ndarray, int]:
    n_core = max(5, n_radial // 4)
    n_clad = max(5, n_radial - n_core)
    r_max = a + 9.0 / q
    return np.concatenate([np.linspace(0.0, a, n_core), np.linspace(a, r_max, n_clad)]), n_core


def solve_guided_mode(fiber: FiberSpec, wavelength: float, n_radial: int = 256,
                      n_azimuthal: int = 128, max_iter: int = 200) -> GuidedMode:
    """Solve the HE11 mode of a step-index fiber.

    Parameters
    ----------
    fiber : FiberSpec
    wavelength : float
        Vacuum wavelength in nm.
    n_radial, n_azimuthal : int
        Sampling of the stored field profile.  About a quarter of the radial
        points fall in the core.
    max_iter : int
        Iteration limit of the bracketed root search.

    Returns
    -------
    GuidedMode

    Raises
    ------
    NoGuidedMode
        If the dispersion relation has no root below the first Bessel pole.
    NonConvergence
        If the root search does not converge.
    """
    if not wavelength > 0:
        raise InvalidGeometry("wavelength must be positive")
    a = fiber.radius
    k = 2.0 * np.pi / wavelength
    n1, n2 = fiber.core_index, fiber.clad_index
    V = fiber.v_number(wavelength)
    if V >= SINGLE_MODE_CUTOFF:
        warnings.warn(f"V = {V:.3f} exceeds {SINGLE_MODE_CUTOFF:.3f}; only HE11 is solved",
                      MultimodeWarning, stacklevel=2)
    # Scan in w (large w = small u) so that thin fibers, whose root lies
    # exponentially close to cutoff, are resolved.
    u_top = min(V, special.jn_zeros(1, 1)[0])
    w_low = np.sqrt(max(V * V - u_top * u_top, 0.0))
    grid = np.concatenate([np.geomspace(max(w_low, 1e-150 * V) * (1 + 1e-12), V, 4000)[::-1],
                           np.linspace(V, w_low, 1000, endpoint=False)[1:]])
    grid = np.unique(grid)[::-1]
    grid = grid[(grid > w_low) & (grid < V)]
    with np.errstate(all="ignore"):
        vals = _dispersion(grid, V, k, a, n1, n2)
    ok = np.isfinite(vals)
    idx = np.flatnonzero(ok[:-1] & ok[1:] & (vals[:-1] > 0) & (vals[1:] < 0))
    if idx.size == 0:
        raise NoGuidedMode(f"no HE11 root for d={fiber.diameter} nm at {wavelength} nm")
    hi, lo = grid[idx[0]], grid[idx[0] + 1]
    try:
        w, info = optimize.brentq(_dispersion, lo, hi, args=(V, k, a, n1, n2),
                                  xtol=1e-300, rtol=1e-12, maxiter=max_iter,
                                  full_output=True)
    except RuntimeError as exc:
        raise NonConvergence(str(exc)) from exc
    if not info.converged:
        raise NonConvergence(info.flag)
    u = float(np.sqrt((V - w) * (V + w)))
    w = float(w)
    # take beta from whichever side keeps precision near its bound
    if w < u:
        beta = float(np.sqrt(n2 * n2 * k * k + (w / a) ** 2))
    else:
        beta = float(np.sqrt(n1 * n1 * k * k - (u / a) ** 2))
    if not n2 * k < beta < n1 * k:
        raise NoGuidedMode("mode is indistinguishable from cutoff in double precision")

    draft = GuidedMode(fiber, wavelength, beta, V, float(u), w, field_profile=None)
    power = _guided_power_exact(draft)
    mode = GuidedMode(fiber, wavelength, beta, V, float(u), w, field_profile=None,
                      amplitude=1.0 / np.sqrt(power))
    profile = _sample_profile(mode, n_radial, n_azimuthal)
    object.__setattr__(mode, "field_profile", profile)
    return mode


def _guided_power_exact(mode: GuidedMode) -> float:
    def ring(r):
        f = _circular_fields(np.array([r]), mode, np.array([r < a]))[:, 0] * mode.amplitude
        return 0.5 * np.real(f[0] * np.conj(f[4]) - f[1] * np.conj(f[3])) * 2 * np.pi * r

    a = mode.fiber.radius
    q = mode.w / a
    inner = integrate.quad(ring, 0.0, a, limit=200, epsabs=0, epsrel=1e-13)[0]
    outer = integrate.quad(ring, a, a + 60.0 / q, limit=400, epsabs=0, epsrel=1e-13)[0]
    return inner + outer


def _sample_profile(mode: GuidedMode, n_radial: int, n_azimuthal: int) -> FieldProfile:
    a = mode.fiber.radius
    r, n_core = _radial_grid(a, mode.w / a, n_radial)
    inside = np.arange(r.size) < n_core
    phi = np.arange(n_azimuthal) * (2 * np.pi / n_azimuthal)
    comps = mode.circular_components(r, inside)
    c = np.sqrt(2.0) * np.cos(phi)
    s = np.sqrt(2.0) * np.sin(phi)
    E = np.stack([comps[0][:, None] * c, 1j * comps[1][:, None] * s, comps[2][:, None] * c])
    H = np.stack([1j * comps[3][:, None] * s, comps[4][:, None] * c, 1j * comps[5][:, None] * s])
    return FieldProfile(r, phi, n_core, E, H)


# ----------------------------------------------------------------------------
# channeling

@dataclass(frozen=True)
class GuidedFractions:
    """Fractions of dipole emission coupled into the guided modes.

    Axis convention: z along the fiber, x radial through the emitter, y the
    remaining transverse (azimuthal) axis.
    """

    T_x: float
    T_y: float
    T_z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.T_x, self.T_y, self.T_z])


@dataclass(frozen=True)
class ChannelingResult:
    fractions: GuidedFractions
    efficiencies: tuple[float, float, float]
    averaged_efficiency: float


def local_axes(azimuth: float) -> np.ndarray:
    """Rows are the radial, azimuthal and axial unit vectors at ``azimuth``."""
    c, s = np.cos(azimuth), np.sin(azimuth)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def coupling_fractions(mode: GuidedMode, position, dipoles) -> np.ndarray:
    """Guided fraction for arbitrary dipole orientations at one position.

    Parameters
    ----------
    mode : GuidedMode
    position : array_like, shape (3,)
    dipoles : array_like, shape (m, 3)
        Unit dipole vectors (complex allowed) in the fiber frame.
    """
    fields = mode.mode_fields(np.asarray(position, dtype=float))  # (4, 3)
    amp = np.asarray(dipoles) @ fields.T  # (m, 4)
    pref = 3 * np.pi / (4 * mode.fiber.clad_index * mode.k0 ** 2)
    return pref * np.sum(np.abs(amp) ** 2, axis=-1)


def channeling_fractions(fiber: FiberSpec, wavelength: float, radial_offset: float,
                         azimuth: float = 0.0, axial_position: float = 0.0,
                         mode: GuidedMode | None = None) -> ChannelingResult:
    """Guided fractions T_x, T_y, T_z for a dipole outside the fiber.

    Parameters
    ----------
    fiber : FiberSpec
    wavelength : float
        Vacuum wavelength in nm.
    radial_offset : float
        Distance of the emitter from the fiber axis in nm (at least the
        fiber radius).
    azimuth : float
        Angular position of the emitter; results do not depend on it.
    axial_position : float
        Position along z; results do not depend on it.
    mode : GuidedMode, optional
        Reuse an already solved mode.

    Returns
    -------
    ChannelingResult
        Fractions, per-axis efficiencies ``T/(T + 1)`` (the non-guided rate
        is approximated by the free-space rate) and their mean.
    """
    if radial_offset < fiber.radius:
        raise InvalidGeometry("emitter must sit on or outside the fiber surface")
    if mode is None:
        mode = solve_guided_mode(fiber, wavelength, n_radial=32, n_azimuthal=8)
    axes = local_axes(azimuth)
    pos = radial_offset * axes[0] + np.array([0.0, 0.0, axial_position])
    T = coupling_fractions(mode, pos, axes)
    eta = T / (T + 1.0)
    return ChannelingResult(GuidedFractions(*map(float, T)), tuple(map(float, eta)),
                            float(eta.mean()))


def guided_dop(fractions: GuidedFractions | np.ndarray) -> float:
    """Degree of polarization ``(T_y + T_z - T_x) / (T_x + T_y + T_z)``."""
    if isinstance(fractions, GuidedFractions):
        tx, ty, tz = fractions.T_x, fractions.T_y, fractions.T_z
    else:
        tx, ty, tz = (float(v) for v in fractions)
    total = tx + ty + tz
    if total == 0:
        raise DegenerateInput("all guided fractions are zero")
    return (ty + tz - tx) / total


def diameter_sweep(diameters, wavelength: float, gap: float = 0.0,
                   core_index: float = SILICA_INDEX_640, clad_index: float = 1.0) -> list[dict]:
    """Channeling versus fiber diameter for an emitter ``gap`` nm off the surface.

    Returns one dict per diameter with keys ``parameter, beta, V, T_x, T_y,
    T_z, efficiency, dop`` (the CSV columns of the ``modes`` command).
    """
    rows = []
    for d in diameters:
        fib = FiberSpec(float(d), core_index, clad_index)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MultimodeWarning)
            mode = solve_guided_mode(fib, wavelength, n_radial=32, n_azimuthal=8)
        res = channeling_fractions(fib, wavelength, fib.radius + gap, mode=mode)
        f = res.fractions
        rows.append(dict(parameter=float(d), beta=mode.beta, V=mode.v_number,
                         T_x=f.T_x, T_y=f.T_y, T_z=f.T_z,
                         efficiency=res.averaged_efficiency, dop=guided_dop(f)))
    return rows
