"""Closed-form induced-EMF impedances and pattern factors.

Independent validation formulas for sinusoidal-current dipoles; kept apart
from the package so kernel tests never share code with what they check.
"""

import numpy as np
from scipy.special import sici

ETA0 = 376.73031366857
EULER = 0.5772156649015329


def self_impedance(length: float, radius: float, wavelength: float) -> complex:
    """Feed impedance of a center-fed sinusoidal-current dipole.

    Resistance and reactance referred to the current maximum, then referred
    to the feed through the sinusoid's feed current.
    """
    k = 2.0 * np.pi / wavelength
    kl = k * length
    si_kl, ci_kl = sici(kl)
    si_2kl, ci_2kl = sici(2.0 * kl)
    _, ci_rad = sici(2.0 * k * radius**2 / length)
    r_m = ETA0 / (2.0 * np.pi) * (
        EULER + np.log(kl) - ci_kl
        + 0.5 * np.sin(kl) * (si_2kl - 2.0 * si_kl)
        + 0.5 * np.cos(kl) * (EULER + np.log(0.5 * kl) + ci_2kl - 2.0 * ci_kl)
    )
    x_m = ETA0 / (4.0 * np.pi) * (
        2.0 * si_kl + np.cos(kl) * (2.0 * si_kl - si_2kl)
        - np.sin(kl) * (2.0 * ci_kl - ci_2kl - ci_rad)
    )
    return (r_m + 1j * x_m) / np.sin(0.5 * kl) ** 2


def mutual_impedance_halfwave(separation: float, wavelength: float) -> complex:
    """Mutual impedance of two parallel side-by-side half-wave dipoles."""
    k = 2.0 * np.pi / wavelength
    l = 0.5 * wavelength
    u0 = k * separation
    u1 = k * (np.sqrt(separation**2 + l**2) + l)
    u2 = k * (np.sqrt(separation**2 + l**2) - l)
    si0, ci0 = sici(u0)
    si1, ci1 = sici(u1)
    si2, ci2 = sici(u2)
    r = ETA0 / (4.0 * np.pi) * (2.0 * ci0 - ci1 - ci2)
    x = -ETA0 / (4.0 * np.pi) * (2.0 * si0 - si1 - si2)
    return r + 1j * x


def pattern_factor(theta: np.ndarray, length: float, wavelength: float) -> np.ndarray:
    """Normalized radiation pattern of a sinusoidal-current dipole along z."""
    kh = np.pi * length / wavelength
    theta = np.asarray(theta, dtype=float)
    return (np.cos(kh * np.cos(theta)) - np.cos(kh)) / np.sin(theta)


def array_factor(theta: np.ndarray, count: int, spacing: float,
                 wavelength: float, axis_cos) -> np.ndarray:
    """Uniform in-phase line-array factor; ``axis_cos`` maps theta to the
    cosine of the angle against the array axis."""
    k = 2.0 * np.pi / wavelength
    psi = k * spacing * np.asarray(axis_cos(theta))
    out = np.zeros_like(psi, dtype=complex)
    for m in range(count):
        out += np.exp(1j * m * psi)
    return out
