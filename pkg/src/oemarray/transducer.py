"""Single-site scattering models.

Every function here maps one transducer site to a 2x2 (or, with
counter-rotating terms retained, 4x4) scattering matrix between the
microwave and optical waveguide ports.  Frequencies are measured from
cavity resonance in units of the reference linewidth, and the sign
convention is such that a bare cavity reflects with
(kappa + 2i*omega)/(kappa - 2i*omega).

All scattering functions accept a scalar or an array of frequencies and
return matrices with the frequency axes leading, i.e. shape (..., 2, 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SingularMatrixError, SiteParams

__all__ = [
    "EliminatedSite",
    "BogoliubovSite",
    "scattering_full",
    "scattering_resonant",
    "scattering_eliminated",
    "offres_coefficients",
    "scattering_bogoliubov",
    "matrix_to_json",
]


@dataclass(frozen=True)
class EliminatedSite:
    """Site reduced to its two external conversion rates.

    ``gamma1`` and ``gamma2`` are the effective decay rates ``g_i**2 /
    kappa_i`` of the mechanical mode into the two waveguides, valid when
    the cavities respond much faster than everything else.
    """

    gamma1: float
    gamma2: float

    def __post_init__(self) -> None:
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("effective rates must be nonnegative")


@dataclass(frozen=True)
class BogoliubovSite:
    """Site parameters plus the mechanical frequency, for the model that
    keeps counter-rotating terms."""

    site: SiteParams
    omega_m: float

    def __post_init__(self) -> None:
        if self.omega_m <= 0:
            raise ValueError("omega_m must be positive")


def scattering_full(site: SiteParams, omega) -> np.ndarray:
    """Exact 2x2 scattering matrix of a single three-mode site.

    Solves the linear input-output problem for the two cavities and the
    mechanical mode in closed form.  Reciprocity (S12 == S21) holds
    bit-for-bit because the off-diagonal entries share one array.

    Raises ``SingularMatrixError`` if the response denominator vanishes
    at any requested frequency (only possible for a completely lossless,
    uncoupled site driven exactly on resonance).
    """
    w = np.asarray(omega, dtype=float)
    g1, g2 = site.g1, site.g2
    k1, k2, gam = site.kappa1, site.kappa2, site.gamma

    d1 = k1 - 2j * w
    d2 = k2 - 2j * w
    dm = gam - 2j * w
    den = 4 * g1 ** 2 * d2 + 4 * g2 ** 2 * d1 + d1 * d2 * dm
    if np.any(den == 0):
        raise SingularMatrixError(
            "scattering matrix is singular at a requested frequency")

    s = np.empty(w.shape + (2, 2), dtype=complex)
    s[..., 0, 0] = -1 + (8 * g2 ** 2 * k1 + 2 * k1 * d2 * dm) / den
    s[..., 1, 1] = -1 + (8 * g1 ** 2 * k2 + 2 * k2 * d1 * dm) / den
    off = -8 * g1 * g2 * np.sqrt(k1 * k2) / den
    s[..., 0, 1] = off
    s[..., 1, 0] = off
    return s


def scattering_resonant(c1_tilde: float, c2_tilde: float) -> np.ndarray:
    """On-resonance scattering matrix from the two classical cooperativities.

    Real-valued; conversion is perfect when the cooperativities are equal
    and large.
    """
    if c1_tilde < 0 or c2_tilde < 0:
        raise ValueError("cooperativities must be nonnegative")
    den = c1_tilde + c2_tilde + 1
    off = -2 * np.sqrt(c1_tilde * c2_tilde) / den
    return np.array([
        [(-c1_tilde + c2_tilde + 1) / den, off],
        [off, (c1_tilde - c2_tilde + 1) / den],
    ])


def scattering_eliminated(site: EliminatedSite, omega) -> np.ndarray:
    """Scattering matrix after adiabatic elimination of the cavities.

    The site becomes a single mechanical resonance with external rates
    ``gamma1`` and ``gamma2``; the matrix is exactly unitary at every
    real frequency.  Accurate to O(g**2/kappa**2) relative to
    ``scattering_full`` for frequencies well inside the cavity linewidth.
    """
    w = np.asarray(omega, dtype=float)
    G1, G2 = site.gamma1, site.gamma2
    if G1 == 0 and G2 == 0 and np.any(w == 0):
        raise SingularMatrixError(
            "uncoupled eliminated site has no response at zero frequency")

    den = 2 * (G1 + G2) - 1j * w
    s = np.empty(w.shape + (2, 2), dtype=complex)
    s[..., 0, 0] = (-2 * (G1 - G2) - 1j * w) / den
    s[..., 1, 1] = (2 * (G1 - G2) - 1j * w) / den
    off = -4 * np.sqrt(G1 * G2) / den
    s[..., 0, 1] = off
    s[..., 1, 0] = off
    return s


def offres_coefficients(site: SiteParams, omega):
    """Off-resonant transmission and conversion amplitudes ``(t, c)``.

    In the weak-conversion regime each site transmits a same-port signal
    with the unit-modulus amplitude ``t`` and converts a small amplitude
    ``c`` to the other port.  Requires equal cavity linewidths; accurate
    only away from the mechanical resonance.
    """
    if site.kappa1 != site.kappa2:
        raise ValueError("off-resonant coefficients require kappa1 == kappa2")
    k = site.kappa1
    w = np.asarray(omega, dtype=float)
    dk = k - 2j * w
    dm = site.gamma - 2j * w
    if np.any(dk * dk * dm == 0):
        raise SingularMatrixError(
            "off-resonant expansion is singular at a requested frequency")
    t = (k + 2j * w) / dk
    c = -8 * site.g1 * site.g2 * k / (dk * dk * dm)
    if w.ndim == 0:
        return complex(t), complex(c)
    return t, c


def _bogoliubov_state_space(bsite: BogoliubovSite):
    g1, g2 = bsite.site.g1, bsite.site.g2
    k1, k2, gam = bsite.site.kappa1, bsite.site.kappa2, bsite.site.gamma
    iwm = 1j * bsite.omega_m

    a = np.array([
        [-iwm - k1 / 2, 0, -1j * g1, 0, 0, -1j * g1],
        [0, -iwm - k2 / 2, -1j * g2, 0, 0, -1j * g2],
        [-1j * g1, -1j * g2, -iwm - gam / 2, -1j * g1, -1j * g2, 0],
        [0, 0, 1j * g1, iwm - k1 / 2, 0, 1j * g1],
        [0, 0, 1j * g2, 0, iwm - k2 / 2, 1j * g2],
        [1j * g1, 1j * g2, 0, 1j * g1, 1j * g2, iwm - gam / 2],
    ])
    b = np.zeros((6, 4))
    b[0, 0] = np.sqrt(k1)
    b[1, 1] = np.sqrt(k2)
    b[3, 2] = np.sqrt(k1)
    b[4, 3] = np.sqrt(k2)
    return a, b


def scattering_bogoliubov(bsite: BogoliubovSite, omega) -> np.ndarray:
    """4x4 scattering matrix with counter-rotating terms retained.

    Works in the lab frame: ``omega`` is an absolute frequency, and the
    beam-splitter response appears near ``omega_m``.  Port ordering is
    (a1, a2, a1_dagger, a2_dagger), so the entries coupling the first
    two ports to the last two quantify sideband-induced amplification.
    """
    a, b = _bogoliubov_state_space(bsite)
    w = np.asarray(omega, dtype=float)
    m = a + 1j * w[..., None, None] * np.eye(6)
    rhs = np.broadcast_to(b.astype(complex), m.shape[:-2] + b.shape)
    try:
        x = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            "dynamical matrix is singular at a requested frequency") from exc
    return -np.eye(4) - b.T @ x


def matrix_to_json(m: np.ndarray) -> list:
    """Row-major nested lists with each entry as an ``[re, im]`` pair."""
    z = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in z]
