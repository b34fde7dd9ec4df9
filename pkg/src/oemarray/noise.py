"""Thermal and Stokes noise added during conversion.

Each mechanical bath drives its site through the susceptibility vector
V_j(omega); everything downstream of site j then scatters that
contribution to the array output, and the independent equal-temperature
baths sum incoherently with force spectral density 2*n_bar + 1 (vacuum
normalized).  The Stokes part comes from cascading the counter-rotating
model and reading off the amplification entries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ArrayConfig, FrequencyGrid, SiteParams, materialize_sites
from .cascade import Spectrum, extract_bandwidth
from .transducer import BogoliubovSite, scattering_bogoliubov, scattering_full

try:
    from numpy import trapezoid as _trapz
except ImportError:  # numpy < 2.0
    from numpy import trapz as _trapz

__all__ = [
    "NoiseSpectrum",
    "StokesSpectrum",
    "noise_coupling_vector",
    "added_noise_spectrum",
    "added_noise_resonant_analytic",
    "integrated_added_noise",
    "stokes_noise_spectrum",
    "integrated_stokes_noise",
    "noise_to_csv",
    "stokes_to_csv",
]


@dataclass(eq=False)
class NoiseSpectrum:
    """Added-noise spectral densities into the two output ports."""

    grid: FrequencyGrid
    s_add_1: np.ndarray
    s_add_2: np.ndarray


@dataclass(eq=False)
class StokesSpectrum:
    """Amplification-noise density on a lab-frame grid near omega_m."""

    grid: FrequencyGrid
    density: np.ndarray


def noise_coupling_vector(sites: Sequence[SiteParams], j: int, omega) -> np.ndarray:
    """Susceptibility of the two waveguide outputs to the bath at site j.

    Solves the three-mode state space of the j-th site (1-indexed); valid
    for arbitrary coupling profiles.
    """
    if not 1 <= j <= len(sites):
        raise IndexError(f"site index {j} outside 1..{len(sites)}")
    site = sites[j - 1]
    return _coupling_vector(site, omega)


def _coupling_vector(site: SiteParams, omega) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    a = np.array([
        [-site.kappa1 / 2, 0, -1j * site.g1],
        [0, -site.kappa2 / 2, -1j * site.g2],
        [-1j * site.g1, -1j * site.g2, -site.gamma / 2],
    ])
    e = np.array([0.0, 0.0, np.sqrt(site.gamma)], dtype=complex)
    m = a + 1j * w[..., None, None] * np.eye(3)
    x = np.linalg.solve(m, np.broadcast_to(e, m.shape[:-1])[..., None])[..., 0]
    v = np.empty(w.shape + (2,), dtype=complex)
    v[..., 0] = -np.sqrt(site.kappa1) * x[..., 0]
    v[..., 1] = -np.sqrt(site.kappa2) * x[..., 1]
    return v


def added_noise_spectrum(config: ArrayConfig, grid: FrequencyGrid) -> NoiseSpectrum:
    """Added-noise spectral densities S_add^2 for both output ports.

    Sums |chi_j|^2 * (2*n_bar+1) over sites, where chi_j propagates the
    j-th bath coupling through all downstream scattering matrices.  The
    downstream products are accumulated in one right-to-left sweep.
    """
    sites = materialize_sites(config)
    w = grid.points()
    s1, s2 = _added_noise_terms(sites, w, config.n_bar)
    return NoiseSpectrum(grid=grid, s_add_1=s1, s_add_2=s2)


def _added_noise_terms(sites, w, n_bar):
    strength = 2 * n_bar + 1
    s1 = np.zeros(np.shape(w))
    s2 = np.zeros(np.shape(w))
    downstream = None  # product S_N ... S_{j+1}, built right to left
    for j in range(len(sites), 0, -1):
        v = _coupling_vector(sites[j - 1], w)
        chi = v if downstream is None else (downstream @ v[..., None])[..., 0]
        s1 += np.abs(chi[..., 0]) ** 2 * strength
        s2 += np.abs(chi[..., 1]) ** 2 * strength
        s_j = scattering_full(sites[j - 1], w)
        downstream = s_j if downstream is None else downstream @ s_j
    return s1, s2


def added_noise_resonant_analytic(c_tilde: float, n_bar: float,
                                  n_sites: int) -> np.ndarray:
    """First-order resonant added noise of a symmetric linear array.

    Bright port grows like N while the dark port is suppressed as 1/2N;
    accurate to O(1/N).
    """
    if c_tilde < 0 or n_bar < 0 or n_sites < 1:
        raise ValueError("invalid parameters")
    common = 4 * c_tilde * (2 * n_bar + 1) / (c_tilde + 1) ** 2
    return np.array([common * n_sites, common / (2 * n_sites)])


def integrated_added_noise(config: ArrayConfig,
                           window: Optional[tuple] = None,
                           band_grid: Optional[FrequencyGrid] = None) -> np.ndarray:
    """Added noise integrated over the conversion band, per port.

    The band is [-fwhm/2, +fwhm/2] of the matching conversion spectrum
    unless an explicit ``window = (lo, hi)`` is supplied.
    """
    sites = materialize_sites(config)
    if window is None:
        window = _conversion_window(sites, band_grid)
    lo, hi = window
    if not hi > lo:
        raise ValueError("integration window must have positive width")

    def density(w):
        return np.stack(_added_noise_terms(sites, w, config.n_bar))

    return _adaptive_trapezoid(density, lo, hi)


def _conversion_window(sites, band_grid):
    if band_grid is None:
        band_grid = FrequencyGrid(-1.5, 1.5, 3001)
    sp = Spectrum(
        grid=band_grid,
        t21=_cascade_t21(sites, band_grid.points()),
        evaluator=lambda w: _cascade_t21(sites, w),
    )
    fwhm = extract_bandwidth(sp).fwhm
    return -fwhm / 2, fwhm / 2


def _cascade_t21(sites, w):
    t = None
    for site in sites:
        s = scattering_full(site, w)
        t = s if t is None else s @ t
    return t[..., 1, 0]


def _adaptive_trapezoid(f, lo, hi, rtol=1e-4, max_doublings=12):
    n = 65
    w = np.linspace(lo, hi, n)
    vals = f(w)
    best = _trapz(vals, w, axis=-1)
    for _ in range(max_doublings):
        n = 2 * n - 1
        w = np.linspace(lo, hi, n)
        vals = f(w)
        new = _trapz(vals, w, axis=-1)
        scale = np.maximum(np.max(np.abs(new)), 1e-300)
        if np.max(np.abs(new - best)) <= rtol * scale:
            return new
        best = new
    return best


def stokes_noise_spectrum(config: ArrayConfig, omega_m: float,
                          grid: FrequencyGrid) -> StokesSpectrum:
    """Amplification-noise density |T23|^2 + |T24|^2 on a lab-frame grid.

    Cascades the counter-rotating site model across the array.  Emits a
    UserWarning outside the resolved-sideband regime (kappa/omega_m >
    0.3) where the density is no longer a small correction.
    """
    sites = materialize_sites(config)
    _warn_unresolved(sites, omega_m)
    t = _bogoliubov_cascade(sites, omega_m, grid.points())
    density = np.abs(t[..., 1, 2]) ** 2 + np.abs(t[..., 1, 3]) ** 2
    return StokesSpectrum(grid=grid, density=density)


def _warn_unresolved(sites, omega_m):
    kappa_max = max(max(s.kappa1, s.kappa2) for s in sites)
    if kappa_max / omega_m > 0.3:
        warnings.warn(
            f"kappa/omega_m = {kappa_max / omega_m:.2f} is outside the "
            "resolved-sideband regime; Stokes densities are not a small "
            "correction here", stacklevel=3)


def _bogoliubov_cascade(sites, omega_m, w):
    t = None
    for site in sites:
        s = scattering_bogoliubov(BogoliubovSite(site, omega_m), w)
        t = s if t is None else s @ t
    return t


def integrated_stokes_noise(config: ArrayConfig, omega_m: float,
                            window: Optional[tuple] = None,
                            band_grid: Optional[FrequencyGrid] = None) -> float:
    """Stokes photons added over the conversion band around omega_m."""
    sites = materialize_sites(config)
    _warn_unresolved(sites, omega_m)
    if window is None:
        if band_grid is None:
            band_grid = FrequencyGrid(omega_m - 1.5, omega_m + 1.5, 3001)
        sp = Spectrum(
            grid=band_grid,
            t21=_bogoliubov_cascade(sites, omega_m, band_grid.points())[..., 1, 0],
            evaluator=lambda w: _bogoliubov_cascade(sites, omega_m, w)[..., 1, 0],
        )
        fwhm = extract_bandwidth(sp).fwhm
        window = (omega_m - fwhm / 2, omega_m + fwhm / 2)
    lo, hi = window
    if not hi > lo:
        raise ValueError("integration window must have positive width")

    def density(w):
        t = _bogoliubov_cascade(sites, omega_m, w)
        return np.abs(t[..., 1, 2]) ** 2 + np.abs(t[..., 1, 3]) ** 2

    return float(_adaptive_trapezoid(density, lo, hi))


def noise_to_csv(spectrum: NoiseSpectrum, path) -> None:
    w = spectrum.grid.points()
    with open(path, "w", newline="\n") as fh:
        fh.write("omega,s_add_port1,s_add_port2\n")
        for i in range(len(w)):
            row = (w[i], spectrum.s_add_1[i], spectrum.s_add_2[i])
            fh.write(",".join(f"{x:.12g}" for x in row) + "\n")


def stokes_to_csv(spectrum: StokesSpectrum, path) -> None:
    w = spectrum.grid.points()
    with open(path, "w", newline="\n") as fh:
        fh.write("omega,stokes_density\n")
        for i in range(len(w)):
            fh.write(f"{w[i]:.12g},{spectrum.density[i]:.12g}\n")
