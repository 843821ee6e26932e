"""Quasi-static surrogate for a gold nanorod next to a nanofiber.

The rod is a prolate spheroid (semi-axes ``a`` along the rod, ``b``
across) in a homogeneous medium of index ``medium_index``.  Its response is
described by the three dipolar (uniform-polarization) modes of the spheroid:

* Gans polarizabilities ``alpha_i = V (eps - eps_m) / (eps_m + L_i (eps - eps_m))``
  with the radiative-reaction correction ``alpha / (1 - i k**3 alpha / (6 pi))``;
  these are in volume units (nm**3), so a uniform field ``E0`` induces the
  scattered field ``alpha_i * F_i(r) * E0``;
* the exact exterior quasi-static field ``F_i(r)`` of each mode, normalized to
  unit dipole moment (``F_i -> (3 n n - I) e_i / (4 pi r**3)`` far away).

Near-field maps, Purcell factors and fiber channeling all use these modes.

Conventions: time dependence ``exp(-i w t)``, so absorbing media have
``Im(eps) > 0``.  Rod-frame z is the rod axis, taken parallel to the fiber.
"""

from __future__ import annotations

import functools
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from . import waveguide
from .errors import (InsideScatterer, InvalidGeometry, MultimodeWarning,
                     NoPeak, OutOfRange)

HC_EV_NM = 1239.84198
DATA_ENV = "PLASMONSPS_DATA_DIR"
GOLD_TABLE = "gold_ld_rakic1998.csv"

# Medium index that puts the 75 x 30 nm rod's longitudinal scattering peak at
# 650 nm; produced by calibrate_medium_index and frozen here.
DEFAULT_MEDIUM_INDEX = 1.28320


def data_dir() -> Path:
    """Directory holding data assets; ``$PLASMONSPS_DATA_DIR`` overrides it."""
    override = os.environ.get(DATA_ENV)
    return Path(override) if override else Path(__file__).resolve().parent / "data"


# ----------------------------------------------------------------------------
# permittivity

@dataclass(frozen=True, eq=False)
class Permittivity:
    """Tabulated complex permittivity.

    Attributes
    ----------
    wavelength : ndarray
        Strictly increasing grid in nm.
    eps : ndarray of complex
        Relative permittivity samples.
    metadata : dict
        Key/value pairs from the table header (source, Drude parameters).
    """

    wavelength: np.ndarray
    eps: np.ndarray
    metadata: dict

    def __post_init__(self):
        if np.any(np.diff(self.wavelength) <= 0):
            raise ValueError("permittivity grid must be strictly increasing")

    def __call__(self, wavelength):
        lam = np.asarray(wavelength, dtype=float)
        lo, hi = self.wavelength[0], self.wavelength[-1]
        if np.any((lam < lo) | (lam > hi)) or np.any(~np.isfinite(lam)):
            raise OutOfRange(f"wavelength outside the table range {lo:g}-{hi:g} nm")
        re = np.interp(lam, self.wavelength, self.eps.real)
        im = np.interp(lam, self.wavelength, self.eps.imag)
        out = re + 1j * im
        return complex(out) if out.ndim == 0 else out

    def drude_parameter(self, key: str) -> float:
        return float(self.metadata[key])


def load_permittivity(path: str | os.PathLike) -> Permittivity:
    """Read a ``wavelength_nm,eps_real,eps_imag`` table with ``# key: value`` header."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
    raw = np.loadtxt(path, delimiter=",", comments="#", skiprows=len(meta) + 1)
    return Permittivity(raw[:, 0], raw[:, 1] + 1j * raw[:, 2], meta)


@functools.lru_cache(maxsize=4)
def _gold_table(directory: str) -> Permittivity:
    return load_permittivity(Path(directory) / GOLD_TABLE)


def gold_table() -> Permittivity:
    """The bundled gold dataset (cached)."""
    return _gold_table(str(data_dir()))


def gold_permittivity(wavelength):
    """Permittivity of bulk gold by linear interpolation of the bundled table.

    Parameters
    ----------
    wavelength : float or array_like
        Vacuum wavelength in nm, within 400-900 nm.

    Raises
    ------
    OutOfRange
    """
    return gold_table()(wavelength)


# ----------------------------------------------------------------------------
# geometry

@dataclass(frozen=True)
class NanorodSpec:
    """Gold nanorod modeled as a prolate spheroid.

    Parameters
    ----------
    length, diameter : float
        Full length and diameter in nm (``length >= diameter``).
    medium_index : float
        Effective index of the surroundings.
    surface_scattering : float
        Prefactor ``A`` of the electron surface-scattering rate
        ``A v_F / L_eff`` added to the Drude damping; 0 disables it.
    """

    length: float = 75.0
    diameter: float = 30.0
    medium_index: float = DEFAULT_MEDIUM_INDEX
    surface_scattering: float = 1.0

    def __post_init__(self):
        if not (self.length >= self.diameter > 0):
            raise InvalidGeometry("need length >= diameter > 0")
        if not self.medium_index >= 1.0:
            raise InvalidGeometry("medium_index must be at least 1")
        if self.surface_scattering < 0:
            raise InvalidGeometry("surface_scattering must be non-negative")

    @property
    def semi_axes(self) -> tuple[float, float]:
        return 0.5 * self.length, 0.5 * self.diameter

    @property
    def eccentricity(self) -> float:
        a, b = self.semi_axes
        return float(np.sqrt(1.0 - (b / a) ** 2))

    @property
    def volume(self) -> float:
        a, b = self.semi_axes
        return 4.0 / 3.0 * np.pi * a * b * b

    @property
    def surface_area(self) -> float:
        a, b = self.semi_axes
        e = self.eccentricity
        if e < 1e-8:
            return 4.0 * np.pi * a * a
        return 2.0 * np.pi * b * b * (1.0 + a / (b * e) * np.arcsin(e))

    @property
    def effective_path(self) -> float:
        """Mean free path limit ``4 V / S`` for surface scattering."""
        return 4.0 * self.volume / self.surface_area

    def is_inside(self, points) -> np.ndarray:
        a, b = self.semi_axes
        p = np.asarray(points, dtype=float)
        return (p[..., 0] ** 2 + p[..., 1] ** 2) / b ** 2 + p[..., 2] ** 2 / a ** 2 < 1.0


def depolarization_factors(rod: NanorodSpec) -> tuple[float, float]:
    """Longitudinal and transverse depolarization factors of the spheroid.

    They satisfy ``L_long + 2 L_trans = 1``.  Near the sphere limit a series
    in the eccentricity replaces the closed form, which cancels badly.
    """
    e = rod.eccentricity
    if e < 0.1:
        k = np.arange(1, 25)
        long_ = 1.0 / 3.0 - np.sum(2.0 * e ** (2 * k) / ((2 * k + 1) * (2 * k + 3)))
    else:
        long_ = (1 - e * e) / (e * e) * (-1.0 + np.arctanh(e) / e)
    return float(long_), float((1.0 - long_) / 2.0)


def rod_permittivity(rod: NanorodSpec, wavelength, table: Permittivity | None = None):
    """Gold permittivity with the surface-scattering size correction.

    The Drude term of the tabulated model is re-evaluated with the damping
    increased by ``A * v_F / L_eff``.
    """
    table = gold_table() if table is None else table
    eps = table(wavelength)
    if rod.surface_scattering == 0:
        return eps
    w = HC_EV_NM / np.asarray(wavelength, dtype=float)
    wp2 = table.drude_parameter("drude_f0") * table.drude_parameter("drude_plasma_energy_ev") ** 2
    g0 = table.drude_parameter("drude_gamma_ev")
    g = g0 + rod.surface_scattering * table.drude_parameter("fermi_velocity_ev_nm") / rod.effective_path
    return eps + wp2 / (w * (w + 1j * g0)) - wp2 / (w * (w + 1j * g))


def gans_polarizability(rod: NanorodSpec, wavelength, radiative_correction: bool = True,
                        table: Permittivity | None = None) -> np.ndarray:
    """Per-axis polarizability in nm**3.

    Parameters
    ----------
    rod : NanorodSpec
    wavelength : float or array_like
        Vacuum wavelength in nm.
    radiative_correction : bool
        Apply ``alpha / (1 - i k**3 alpha / (6 pi))``.

    Returns
    -------
    ndarray, shape (..., 3), complex
        ``(alpha_x, alpha_y, alpha_z)`` in the rod frame; z is the long axis,
        so the last entry is the longitudinal polarizability.
    """
    lam = np.asarray(wavelength, dtype=float)
    eps = np.asarray(rod_permittivity(rod, lam, table))
    em = rod.medium_index ** 2
    l_long, l_trans = depolarization_factors(rod)
    L = np.array([l_trans, l_trans, l_long])
    de = (eps - em)[..., None]
    alpha = rod.volume * de / (em + L * de)
    if radiative_correction:
        k = (2 * np.pi * rod.medium_index / lam)[..., None]
        alpha = alpha / (1 - 1j * k ** 3 * alpha / (6 * np.pi))
    return alpha


# ----------------------------------------------------------------------------
# spectra

@dataclass(frozen=True)
class Spectrum:
    wavelength: np.ndarray
    sigma: np.ndarray
    peak_wavelength: float
    fwhm: float


def scattering_cross_section(rod: NanorodSpec, wavelength, orientation_average: bool = False):
    """``k**4 |alpha|**2 / (6 pi)`` in nm**2 for longitudinal excitation (or averaged)."""
    lam = np.asarray(wavelength, dtype=float)
    alpha = gans_polarizability(rod, lam)
    k = 2 * np.pi * rod.medium_index / lam
    a2 = np.mean(np.abs(alpha) ** 2, axis=-1) if orientation_average else np.abs(alpha[..., 2]) ** 2
    return k ** 4 * a2 / (6 * np.pi)


def _peak_and_width(lam: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    i = int(np.argmax(s))
    if i == 0 or i == s.size - 1:
        raise NoPeak("spectrum maximum lies on the edge of the range")
    # vertex of the parabola through the three samples around the maximum
    xs, ys = lam[i - 1:i + 2], s[i - 1:i + 2]
    c2, c1, c0 = np.polyfit(xs - xs[1], ys, 2)
    xp = xs[1] - c1 / (2 * c2) if c2 < 0 else xs[1]
    yp = c0 - c1 * c1 / (4 * c2) if c2 < 0 else ys[1]
    half = 0.5 * yp
    left = np.flatnonzero(s[:i] < half)
    right = np.flatnonzero(s[i:] < half)
    if left.size == 0 or right.size == 0:
        return float(xp), float("nan")
    j = left[-1]
    xl = lam[j] + (half - s[j]) * (lam[j + 1] - lam[j]) / (s[j + 1] - s[j])
    m = i + right[0]
    xr = lam[m - 1] + (half - s[m - 1]) * (lam[m] - lam[m - 1]) / (s[m] - s[m - 1])
    return float(xp), float(xr - xl)


def scattering_spectrum(rod: NanorodSpec, wavelengths=None,
                        orientation_average: bool = False) -> Spectrum:
    """Scattering spectrum with interpolated peak position and FWHM.

    Parameters
    ----------
    rod : NanorodSpec
    wavelengths : array_like, optional
        Increasing wavelength samples (nm); default 400-900 nm every 0.5 nm.
    orientation_average : bool
        Average ``|alpha|**2`` over the three axes instead of taking the
        longitudinal one.

    Returns
    -------
    Spectrum
        ``fwhm`` is NaN when the half-maximum is not reached on one side.

    Raises
    ------
    NoPeak
        If the maximum sits on the boundary of the range.
    """
    lam = np.arange(400.0, 900.01, 0.5) if wavelengths is None else np.asarray(wavelengths, float)
    sigma = scattering_cross_section(rod, lam, orientation_average)
    peak, fwhm = _peak_and_width(lam, sigma)
    return Spectrum(lam, sigma, peak, fwhm)


def calibrate_medium_index(length: float = 75.0, diameter: float = 30.0,
                           target: float = 650.0, bracket=(1.0, 2.0),
                           surface_scattering: float = 1.0) -> float:
    """Medium index that places the longitudinal scattering peak at ``target`` nm."""
    lam = np.arange(400.0, 900.01, 0.25)

    def miss(n):
        rod = NanorodSpec(length, diameter, n, surface_scattering)
        return scattering_spectrum(rod, lam).peak_wavelength - target

    return float(optimize.brentq(miss, *bracket, xtol=1e-10))


# ----------------------------------------------------------------------------
# exterior quasi-static fields of the spheroid modes

def _confocal_parameter(rho2: np.ndarray, z2: np.ndarray, a: float, b: float) -> np.ndarray:
    """Largest root lambda of rho2/(b2 + lambda) + z2/(a2 + lambda) = 1."""
    B = a * a + b * b - rho2 - z2
    C = a * a * b * b - rho2 * a * a - z2 * b * b
    disc = np.sqrt(np.maximum(B * B - 4 * C, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(B >= 0, -2 * C / (B + disc), 0.5 * (disc - B))
    return np.maximum(lam, 0.0)


def _depolarization_integrals(u0: np.ndarray, f: float) -> tuple[np.ndarray, np.ndarray]:
    """``I_i(lambda) = int_lambda^inf ds / ((a_i^2 + s) R(s))`` for a prolate spheroid.

    ``u0 = sqrt(a^2 + lambda)`` and ``f`` is the focal half-distance.
    Returns ``(I_long, I_trans)``.
    """
    x = f / u0
    small = x < 0.05
    I_long = np.empty_like(u0)
    I_trans = np.empty_like(u0)
    if np.any(small):
        xs, us = x[small], u0[small]
        k = np.arange(1, 12)[:, None]
        series = xs ** (2 * k - 2)
        I_long[small] = 2 / us ** 3 * np.sum(series / (2 * k + 1), axis=0)
        I_trans[small] = 1 / us ** 3 * np.sum(series * 2 * k / (2 * k + 1), axis=0)
    big = ~small
    if np.any(big):
        xb, ub = x[big], u0[big]
        at = np.arctanh(xb)
        I_long[big] = 2 / f ** 3 * (at - xb)
        I_trans[big] = (ub / (ub * ub - f * f) - at / f) / f ** 2
    return I_long, I_trans


def mode_fields(rod: NanorodSpec, points) -> np.ndarray:
    """Exterior field of the three uniform-polarization modes per unit moment.

    Parameters
    ----------
    rod : NanorodSpec
    points : array_like, shape (..., 3)
        Positions in the rod frame (origin at the center, z along the rod).

    Returns
    -------
    ndarray, shape (3, ..., 3)
        ``out[i]`` is the real field vector of the mode polarized along rod
        axis ``i``.

    Raises
    ------
    InsideScatterer
    """
    a, b = rod.semi_axes
    p = np.asarray(points, dtype=float)
    if np.any(rod.is_inside(p)):
        raise InsideScatterer("field point lies inside the nanorod")
    f = np.sqrt(max(a * a - b * b, 0.0))
    rho2 = p[..., 0] ** 2 + p[..., 1] ** 2
    z2 = p[..., 2] ** 2
    lam = _confocal_parameter(rho2, z2, a, b)
    u0 = np.sqrt(a * a + lam)
    I_long, I_trans = _depolarization_integrals(u0, f) if f > 0 else (
        2 / (3 * u0 ** 3), 2 / (3 * u0 ** 3))
    axes2 = np.array([b * b, b * b, a * a])
    denom = p ** 2 / (axes2 + lam[..., None]) ** 2
    grad_lam = (2 * p / (axes2 + lam[..., None])) / np.sum(denom, axis=-1, keepdims=True)
    R = u0 * (b * b + lam)
    integrals = (I_trans, I_trans, I_long)
    out = np.empty((3,) + p.shape)
    for i in range(3):
        coef = p[..., i] / ((axes2[i] + lam) * R)
        field = coef[..., None] * grad_lam
        field[..., i] -= integrals[i]
        out[i] = 3 / (8 * np.pi) * field
    return out


def near_field_enhancement(rod: NanorodSpec, points, wavelength: float):
    """``|E / E0|**2`` for a unit field polarized along the rod axis.

    Parameters
    ----------
    rod : NanorodSpec
    points : array_like, shape (..., 3)
        Rod-frame positions in nm, outside the rod.
    wavelength : float
        Vacuum wavelength in nm.

    Raises
    ------
    InsideScatterer
    """
    alpha_long = gans_polarizability(rod, wavelength)[2]
    field = alpha_long * mode_fields(rod, points)[2]
    field = field.astype(complex)
    field[..., 2] += 1.0
    return np.sum(np.abs(field) ** 2, axis=-1)


def standoff_point(rod: NanorodSpec, d: float, gap: float) -> tuple[float, float]:
    """Point ``gap`` nm from the rod surface along its outward normal.

    The point is labelled by its axial coordinate ``d``; its radial distance
    from the rod axis is returned with it.  Valid for ``|d| <= a + gap``,
    where ``d = a + gap`` is the on-axis point beyond the tip.

    Returns
    -------
    rho, z : float
    """
    a, b = rod.semi_axes
    ad = abs(float(d))
    if gap <= 0:
        raise InvalidGeometry("gap must be positive")
    if ad > a + gap * (1 + 1e-12):
        raise InvalidGeometry(f"|d| = {ad:g} nm exceeds the rod half length plus gap")

    def offset(t):
        rs, zs = b * np.sin(t), a * np.cos(t)
        nr, nz = rs / b ** 2, zs / a ** 2
        norm = np.hypot(nr, nz)
        return rs + gap * nr / norm, zs + gap * nz / norm

    if ad == 0:
        t = 0.5 * np.pi
    elif ad >= a + gap:
        t = 0.0
    else:
        t = optimize.brentq(lambda t: offset(t)[1] - ad, 0.0, 0.5 * np.pi, xtol=1e-15)
    rho, z = offset(t)
    return float(max(rho, 0.0)), float(np.copysign(z, d) if ad > 0 else 0.0)


def near_field_profile(rod: NanorodSpec, d_values, gap: float, wavelength: float) -> np.ndarray:
    """Enhancement along the conformal path ``gap`` nm from the rod surface."""
    pts = []
    for d in np.atleast_1d(d_values):
        rho, z = standoff_point(rod, d, gap)
        pts.append([rho, 0.0, z])
    return near_field_enhancement(rod, np.array(pts), wavelength)


# ----------------------------------------------------------------------------
# emitter, rod and fiber

@dataclass(frozen=True)
class HybridResponse:
    """Purcell factor, emission enhancement and guided DOP at one position.

    Attributes
    ----------
    d : float
        Axial emitter position relative to the rod center (nm).
    PF, EF, DOP : float
        Orientation-averaged Purcell factor, guided-emission enhancement and
        degree of polarization of the guided light.
    purcell_axes : tuple of float
        Purcell factor for x, y, z dipoles (fiber frame).
    guided : tuple of float
        Guided fractions with the rod, for x, y, z dipoles.
    guided_bare : tuple of float
        Same without the rod.
    """

    d: float
    PF: float
    EF: float
    DOP: float
    purcell_axes: tuple
    guided: tuple
    guided_bare: tuple


@functools.lru_cache(maxsize=32)
def _mode(fiber: waveguide.FiberSpec, wavelength: float) -> waveguide.GuidedMode:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MultimodeWarning)
        return waveguide.solve_guided_mode(fiber, wavelength, n_radial=32, n_azimuthal=8)


def hybrid_response(rod: NanorodSpec, fiber: waveguide.FiberSpec, gap: float = 5.0,
                    d: float = 0.0, wavelength: float = 640.0,
                    polarizability_scale: float = 1.0) -> HybridResponse:
    """Emitter beside a nanorod lying on a nanofiber.

    Geometry: the rod lies on the fiber surface with its axis parallel to the
    fiber, center at radius ``R + b``.  The emitter sits at the same radius,
    displaced from the rod along the local tangent and along the axis so
    that it is ``gap`` nm from the rod surface on the outward normal, with
    axial coordinate ``d`` relative to the rod center (see
    :func:`standoff_point`).

    Each spheroid mode ``m`` is driven by the dipole field through the
    reciprocal overlap ``F_m(r0) . e``, which gives

    * ``PF_e = 1 + 6 pi / k**3 * sum_m Im(alpha_m) (F_m(r0) . e)**2``;
    * the induced rod moment ``p_rod = sum_m alpha_m (F_m(r0) . e) e_m``,
      which radiates into the fiber together with the emitter.

    Orientation averages run over x, y, z dipoles.  ``EF`` is the ratio of
    the guided power summed over the three orientations with and without
    the rod (emitter dipole moment held fixed); ``DOP`` applies
    :func:`waveguide.guided_dop` to the per-orientation guided fractions.

    Parameters
    ----------
    rod : NanorodSpec
    fiber : waveguide.FiberSpec
    gap : float
        Emitter to rod-surface distance in nm.
    d : float
        Axial position of the emitter from the rod center in nm.
    wavelength : float
        Emission wavelength in nm.
    polarizability_scale : float
        Multiplies all polarizabilities; 0 removes the rod.
    """
    a, b = rod.semi_axes
    rho, z = standoff_point(rod, d, gap)
    height = fiber.radius + b
    r0 = np.array([height, 0.0, 0.0])
    rc = np.array([height, -rho, -z])
    mode = _mode(fiber, float(wavelength))
    alpha = polarizability_scale * gans_polarizability(rod, wavelength)
    F = mode_fields(rod, r0 - rc)  # (3 modes, 3 components)
    k = 2 * np.pi * rod.medium_index / wavelength

    dipoles = np.eye(3)
    overlap = dipoles @ F.T  # (orientation, mode)
    purcell = 1 + 6 * np.pi / k ** 3 * (overlap ** 2 @ alpha.imag)
    p_rod = overlap * alpha  # (orientation, rod axis) induced moments
    E0 = mode.mode_fields(r0)  # (4 modes, 3)
    Er = mode.mode_fields(rc)
    amp = dipoles @ E0.T + p_rod @ Er.T
    pref = 3 * np.pi / (4 * fiber.clad_index * mode.k0 ** 2)
    T = pref * np.sum(np.abs(amp) ** 2, axis=-1)
    T_bare = pref * np.sum(np.abs(dipoles @ E0.T) ** 2, axis=-1)
    return HybridResponse(
        d=float(d), PF=float(purcell.mean()), EF=float(T.sum() / T_bare.sum()),
        DOP=waveguide.guided_dop(T), purcell_axes=tuple(map(float, purcell)),
        guided=tuple(map(float, T)), guided_bare=tuple(map(float, T_bare)))


def hybrid_curve(rod: NanorodSpec, fiber: waveguide.FiberSpec, d_values, gap: float = 5.0,
                 wavelength: float = 640.0) -> list[HybridResponse]:
    """:func:`hybrid_response` over a list of axial positions."""
    return [hybrid_response(rod, fiber, gap, float(d), wavelength) for d in d_values]
