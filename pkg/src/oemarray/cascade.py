"""Array assembly: cascaded transfer matrices, spectra, and bandwidths.

An array of transducer sites acts on the two propagating fields as the
ordered matrix product T(omega) = S_N ... S_1.  This module builds that
product, sweeps it over a frequency grid, and extracts the figures of
merit used throughout: conversion bandwidth (numeric and closed-form),
passband ripple, accumulated conversion phase, and the waveguide
dispersion relation that controls bandwidth saturation for unequal
cavity linewidths.

Free propagation between sites is deliberately absent here: with equal
phases in both lanes it drops out of every conversion magnitude.  The
lossy two-sided model reinstates it.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ArrayConfig, FrequencyGrid, SpectrumError, materialize_sites
from .transducer import (
    EliminatedSite,
    offres_coefficients,
    scattering_eliminated,
    scattering_full,
)

__all__ = [
    "Spectrum",
    "BandwidthResult",
    "array_transfer",
    "eliminated_transfer",
    "conversion_spectrum",
    "eliminated_spectrum",
    "extract_bandwidth",
    "bandwidth_analytic",
    "halfmax_roots_analytic",
    "perturbative_t21",
    "phase_winding",
    "waveguide_dispersion",
    "spectrum_to_csv",
    "bandwidth_to_json",
]


@dataclass(eq=False)
class Spectrum:
    """Conversion amplitude sampled on a frequency grid.

    ``evaluator`` recomputes T21 of the same model at arbitrary
    frequencies; bandwidth extraction uses it so that reported widths do
    not depend on the grid spacing.
    """

    grid: FrequencyGrid
    t21: np.ndarray
    full_matrices: Optional[np.ndarray] = None
    evaluator: Optional[Callable[[float], complex]] = None


@dataclass(frozen=True)
class BandwidthResult:
    fwhm: float
    omega_lo: float
    omega_hi: float
    peak_value: float
    passband_min: float


def array_transfer(sites: Sequence, omega) -> np.ndarray:
    """Ordered product S_N ... S_1 of single-site scattering matrices.

    Accepts full sites (SiteParams) or eliminated ones (EliminatedSite),
    and a scalar or array of frequencies.
    """
    if len(sites) == 0:
        raise ValueError("need at least one site")
    t = None
    for site in sites:
        s = _site_scattering(site, omega)
        t = s if t is None else s @ t
    return t


def _site_scattering(site, omega) -> np.ndarray:
    if isinstance(site, EliminatedSite):
        return scattering_eliminated(site, omega)
    return scattering_full(site, omega)


def eliminated_transfer(sites: Sequence[EliminatedSite], omega) -> np.ndarray:
    """Cascade in the adiabatically eliminated picture."""
    return array_transfer(list(sites), omega)


def conversion_spectrum(config: ArrayConfig, grid: FrequencyGrid,
                        store_matrices: bool = False) -> Spectrum:
    """Sweep the array transfer matrix of ``config`` over ``grid``."""
    sites = materialize_sites(config)
    return _spectrum_from_sites(sites, grid, store_matrices)


def eliminated_spectrum(sites: Sequence[EliminatedSite], grid: FrequencyGrid,
                        store_matrices: bool = False) -> Spectrum:
    """Sweep the eliminated-picture cascade over ``grid``."""
    return _spectrum_from_sites(list(sites), grid, store_matrices)


def _spectrum_from_sites(sites, grid, store_matrices) -> Spectrum:
    t = array_transfer(sites, grid.points())
    return Spectrum(
        grid=grid,
        t21=t[..., 1, 0].copy(),
        full_matrices=t if store_matrices else None,
        evaluator=lambda w: array_transfer(sites, w)[..., 1, 0],
    )


def extract_bandwidth(spectrum: Spectrum) -> BandwidthResult:
    """Full width at half maximum of the conversion spectrum.

    The width is measured between the outermost crossings of half the
    global maximum of |T21|^2, each refined by bisection on the
    spectrum's evaluator to 1e-6 (in grid frequency units).  Ripple
    inside the passband is reported as ``passband_min``, the smallest
    |T21|^2 between the outermost local maxima that exceed half-max.
    """
    w = spectrum.grid.points()
    v = np.abs(spectrum.t21) ** 2
    peak_idx = int(np.argmax(v))
    peak = float(v[peak_idx])
    if peak <= 0:
        raise SpectrumError("no positive maximum in spectrum")
    half = peak / 2

    above = v >= half
    idx = np.flatnonzero(above)
    i_first, i_last = int(idx[0]), int(idx[-1])
    if i_first == 0 or i_last == len(v) - 1:
        raise SpectrumError("no half-max crossing inside grid")

    if spectrum.evaluator is None:
        raise ValueError("spectrum has no evaluator; cannot refine crossings")

    def excess(x: float) -> float:
        return abs(complex(spectrum.evaluator(x))) ** 2 - half

    lo = _bisect_crossing(excess, w[i_first - 1], w[i_first])
    hi = _bisect_crossing(excess, w[i_last], w[i_last + 1])

    interior = np.arange(1, len(v) - 1)
    is_local_max = (v[interior] >= v[interior - 1]) & (v[interior] >= v[interior + 1])
    peaks = interior[is_local_max & above[interior]]
    if len(peaks) == 0:
        passband_min = peak
    else:
        passband_min = float(v[peaks[0]:peaks[-1] + 1].min())

    return BandwidthResult(
        fwhm=hi - lo, omega_lo=lo, omega_hi=hi,
        peak_value=peak, passband_min=passband_min)


def _bisect_crossing(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-6) -> float:
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if fa * fb > 0:
        # the grid bracketed the crossing; fall back to the closer endpoint
        return a if abs(fa) < abs(fb) else b
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m
        if fa * fm < 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def bandwidth_analytic(g: float, kappa: float, n_sites: int) -> float:
    """Closed-form large-N conversion bandwidth of a symmetric array.

    Grows with the cube root of g^2 * kappa * N, so doubling the
    bandwidth costs an eightfold longer array.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    return float(np.cbrt(4 * np.sqrt(2) / 3 * g * g * kappa * n_sites))


def halfmax_roots_analytic(g: float, kappa: float, n_sites: int):
    """Half-max frequencies (omega_minus, omega_plus) of the perturbative
    conversion spectrum, from the real root of its cubic in omega^2.

    At N=1 the two numerator terms coincide algebraically and the root
    sits exactly at zero, so that case is returned exactly rather than
    through the floating-point cancellation.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    if n_sites == 1:
        return 0.0, 0.0
    n = float(n_sites)
    factor = (n * n - 1) / n
    p = 6 * np.sqrt(2) * g * g * kappa * factor \
        + kappa * np.sqrt(72 * g ** 4 * factor ** 2 + 3 * kappa ** 4)
    omega_plus = float(
        (-3 ** (2 / 3) * kappa ** 2 + 3 ** (1 / 3) * p ** (2 / 3))
        / (6 * p ** (1 / 3)))
    return -omega_plus, omega_plus


def perturbative_t21(config: ArrayConfig, omega):
    """First-order conversion amplitude t^(N-1) * sum_j c_j.

    Valid far from the mechanical resonance where every per-site
    conversion amplitude c_j is small; a UserWarning is emitted when
    max |c_j| exceeds 0.1.  Requires one common cavity linewidth across
    the array.
    """
    sites = materialize_sites(config)
    kappas = {s.kappa1 for s in sites} | {s.kappa2 for s in sites}
    if len(kappas) != 1:
        raise ValueError(
            "perturbative form requires one common cavity linewidth")

    total = 0.0 + 0.0j
    worst = 0.0
    t = None
    for site in sites:
        t, c = offres_coefficients(site, omega)
        total = total + c
        worst = max(worst, float(np.max(np.abs(c))))
    if worst > 0.1:
        warnings.warn(
            f"per-site conversion amplitude reaches {worst:.3g}; "
            "perturbative result unreliable this close to resonance",
            stacklevel=2)
    return t ** (len(sites) - 1) * total


def phase_winding(spectrum: Spectrum) -> float:
    """Total phase accumulated by T21 across the grid, in radians.

    Unwraps point to point on the nearest branch; fails when the
    amplitude vanishes (phase undefined) or when an adjacent step
    reaches pi (aliasing: the grid cannot resolve the winding).
    """
    t = np.asarray(spectrum.t21)
    if np.any(np.abs(t) == 0):
        raise SpectrumError("conversion amplitude vanishes; phase undefined")
    steps = np.angle(t[1:] / t[:-1])
    if np.any(np.abs(steps) >= np.pi * (1 - 1e-9)):
        raise SpectrumError(
            "phase aliasing: adjacent grid points differ by >= pi")
    return float(np.sum(steps))


def waveguide_dispersion(omega, v: float, kappa_eff: float):
    """Wavenumber of a propagating field dressed by the cavity chain."""
    if v <= 0:
        raise ValueError("velocity must be positive")
    if kappa_eff < 0:
        raise ValueError("kappa_eff must be nonnegative")
    w = np.asarray(omega, dtype=float)
    if np.any(w == 0):
        raise ValueError("dispersion relation has a pole at omega = 0")
    k = w / v - kappa_eff ** 2 / (v * w)
    return float(k) if w.ndim == 0 else k


def spectrum_to_csv(spectrum: Spectrum, path) -> None:
    """Write the spectrum as CSV (12 significant digits, LF endings)."""
    w = spectrum.grid.points()
    t = spectrum.t21
    phase = np.unwrap(np.angle(t))
    with open(path, "w", newline="\n") as fh:
        fh.write("omega,re_t21,im_t21,abs2_t21,phase_unwrapped\n")
        for i in range(len(w)):
            row = (w[i], t[i].real, t[i].imag, abs(t[i]) ** 2, phase[i])
            fh.write(",".join(f"{x:.12g}" for x in row) + "\n")


def bandwidth_to_json(result: BandwidthResult, path=None) -> dict:
    doc = {
        "fwhm": result.fwhm,
        "omega_lo": result.omega_lo,
        "omega_hi": result.omega_hi,
        "peak_value": result.peak_value,
        "passband_min": result.passband_min,
    }
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return doc
