"""Closed-form Kronig-Penney dispersion, band search and transfer-matrix oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .errors import DomainError, ForbiddenEnergyError
from .model import HBAR, THRESHOLD_WINDOW, TWO_M, LatticeSpec, Regime, wavenumbers

ALLOWED_SLACK = 1e-14


def dispersion_rhs(energy: float, lat: LatticeSpec) -> float:
    """Right-hand side ``f(E) = cos(K e)`` of the Kronig-Penney relation."""
    wn = wavenumbers(energy, lat)
    k2, c, d = wn.k2, lat.c, lat.d
    if wn.regime is Regime.ABOVE:
        k1 = wn.k1
        return (math.cos(k1 * d) * math.cos(k2 * c)
                - (k1 * k1 + k2 * k2) / (2 * k1 * k2) * math.sin(k1 * d) * math.sin(k2 * c))
    if wn.regime is Regime.BELOW:
        k3 = wn.k3
        return (math.cosh(k3 * d) * math.cos(k2 * c)
                - (k2 * k2 - k3 * k3) / (2 * k2 * k3) * math.sinh(k3 * d) * math.sin(k2 * c))
    return math.cos(k2 * c) - 0.5 * k2 * d * math.sin(k2 * c)


def dispersion_rhs_array(energies, lat: LatticeSpec) -> np.ndarray:
    """Vectorised :func:`dispersion_rhs`; same branch selection per point."""
    e = np.asarray(energies, dtype=float)
    if np.any(~(e > 0)):
        raise DomainError("energies must be > 0")
    c, d, v0 = lat.c, lat.d, lat.v0
    k2 = np.sqrt(TWO_M * e) / HBAR
    thresh = np.abs(e - v0) <= THRESHOLD_WINDOW * max(1.0, v0)
    above = (e > v0) & ~thresh
    below = (e < v0) & ~thresh
    out = np.empty_like(e)

    k1 = np.sqrt(TWO_M * (e[above] - v0)) / HBAR
    ka = k2[above]
    out[above] = (np.cos(k1 * d) * np.cos(ka * c)
                  - (k1 ** 2 + ka ** 2) / (2 * k1 * ka) * np.sin(k1 * d) * np.sin(ka * c))
    k3 = np.sqrt(TWO_M * (v0 - e[below])) / HBAR
    kb = k2[below]
    out[below] = (np.cosh(k3 * d) * np.cos(kb * c)
                  - (kb ** 2 - k3 ** 2) / (2 * kb * k3) * np.sinh(k3 * d) * np.sin(kb * c))
    kt = k2[thresh]
    out[thresh] = np.cos(kt * c) - 0.5 * kt * d * np.sin(kt * c)
    return out


@dataclass(frozen=True)
class BlochPoint:
    energy: float
    cos_ke: float
    allowed: bool
    k_bloch: float | None


def bloch_wavenumber(energy: float, lat: LatticeSpec) -> BlochPoint:
    """Reduced-zone Bloch wavenumber ``K`` in ``[0, pi/e]``.

    Only ``cos(K e)`` is fixed by the dispersion relation; the non-negative
    root is returned.
    """
    f = dispersion_rhs(energy, lat)
    if abs(f) > 1.0 + ALLOWED_SLACK:
        return BlochPoint(energy, f, False, None)
    return BlochPoint(energy, f, True, math.acos(max(-1.0, min(1.0, f))) / lat.period)


def bloch_phase(energy: float, lat: LatticeSpec) -> float:
    """``K e`` for an allowed energy; raises in a gap."""
    point = bloch_wavenumber(energy, lat)
    if not point.allowed:
        raise ForbiddenEnergyError(
            f"E={energy!r} lies in a gap (cos Ke = {point.cos_ke:.6g})")
    return point.k_bloch * lat.period


@dataclass(frozen=True)
class Band:
    index: int
    e_lo: float
    e_hi: float
    clipped_lo: bool = False
    clipped_hi: bool = False


def find_bands(lat: LatticeSpec, e_min: float, e_max: float,
               n_samples: int = 4000) -> list[Band]:
    """Allowed intervals ``|f(E)| <= 1`` within ``[e_min, e_max]``.

    Sign changes of ``|f| - 1`` on a uniform scan are refined by bisection.
    Bands narrower than the scan step can be missed.
    """
    if not (0 < e_min < e_max) or not math.isfinite(e_max):
        raise DomainError(f"need 0 < e_min < e_max, got ({e_min!r}, {e_max!r})")
    if n_samples < 2:
        raise DomainError(f"n_samples must be >= 2, got {n_samples!r}")
    grid = np.linspace(e_min, e_max, int(n_samples))
    g = np.abs(dispersion_rhs_array(grid, lat)) - 1.0
    allowed = g <= 0.0
    xtol = 1e-12 * max(1.0, e_max)

    def edge(i):
        # g changes sign between grid[i] and grid[i + 1]
        return bisect(lambda en: abs(dispersion_rhs(en, lat)) - 1.0,
                      grid[i], grid[i + 1], xtol=xtol, maxiter=200)

    bands = []
    i, n = 0, grid.size
    while i < n:
        if not allowed[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and allowed[j + 1]:
            j += 1
        lo = float(grid[0]) if i == 0 else edge(i - 1)
        hi = float(grid[-1]) if j == n - 1 else edge(j)
        if lo < hi:
            bands.append(Band(len(bands), lo, hi, i == 0, j == n - 1))
        i = j + 1
    return bands


def _propagator(k_kind: str, k: float, length: float) -> np.ndarray:
    """Maps ``(phi, phi')`` across a slab of constant potential."""
    if k_kind == "trig":
        kl = k * length
        return np.array([[math.cos(kl), math.sin(kl) / k],
                         [-k * math.sin(kl), math.cos(kl)]])
    if k_kind == "hyp":
        kl = k * length
        return np.array([[math.cosh(kl), math.sinh(kl) / k],
                         [k * math.sinh(kl), math.cosh(kl)]])
    return np.array([[1.0, length], [0.0, 1.0]])


def monodromy(energy: float, lat: LatticeSpec) -> np.ndarray:
    """Transfer matrix over one period starting at a well's left edge."""
    wn = wavenumbers(energy, lat)
    well = _propagator("trig", wn.k2, lat.c)
    if wn.regime is Regime.ABOVE:
        barrier = _propagator("trig", wn.k1, lat.d)
    elif wn.regime is Regime.BELOW:
        barrier = _propagator("hyp", wn.k3, lat.d)
    else:
        barrier = _propagator("linear", 0.0, lat.d)
    return barrier @ well


def transfer_matrix_oracle(energy: float, lat: LatticeSpec) -> tuple[np.ndarray, float]:
    """Monodromy matrix and its half-trace, which equals ``cos(K e)``."""
    m = monodromy(energy, lat)
    return m, 0.5 * float(np.trace(m))


def bloch_eigenvector(energy: float, lat: LatticeSpec) -> tuple[complex, np.ndarray]:
    """Bloch multiplier ``exp(iKe)`` (``K >= 0``) and ``(phi, phi')`` at ``x = 0``."""
    ke = bloch_phase(energy, lat)
    m = monodromy(energy, lat)
    lam = complex(math.cos(ke), math.sin(ke))
    # (M - lam) v = 0; take the null vector from the better-conditioned row
    a, b = m[0, 0] - lam, m[0, 1]
    c, d = m[1, 0], m[1, 1] - lam
    if abs(a) + abs(b) >= abs(c) + abs(d):
        v = np.array([b, -a], dtype=complex)
    else:
        v = np.array([d, -c], dtype=complex)
    return lam, v / np.linalg.norm(v)
