"""Kronig-Penney lattice, energy regimes and real basis solutions.

Units throughout: hbar = 1 and 2m = 1, so the Schroedinger equation reads
``-phi'' + V phi = E phi`` and the well wavenumber is ``sqrt(E)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GridError

HBAR = 1.0
TWO_M = 1.0

THRESHOLD_WINDOW = 1e-8


class Region(str, enum.Enum):
    WELL = "well"
    BARRIER = "barrier"


class Regime(str, enum.Enum):
    ABOVE = "above_barrier"
    BELOW = "below_barrier"
    THRESHOLD = "at_threshold"


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic array of rectangular barriers.

    One cell is ``[n e, n e + c)`` (well, V = 0) followed by
    ``[n e + c, (n + 1) e)`` (barrier, V = v0), with period ``e = c + d``.
    ``v0 = 0`` is accepted and gives the free-particle lattice.
    """

    v0: float
    c: float
    d: float

    def __post_init__(self):
        for name in ("v0", "c", "d"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        if self.c <= 0:
            raise DomainError(f"c must be > 0, got {self.c!r}")
        if self.d <= 0:
            raise DomainError(f"d must be > 0, got {self.d!r}")
        if self.v0 < 0:
            raise DomainError(f"v0 must be >= 0, got {self.v0!r}")

    @property
    def period(self) -> float:
        return self.c + self.d

    e = period

    def potential(self, x):
        """Potential at ``x`` (scalar or array)."""
        x = np.asarray(x, dtype=float)
        local = x - np.floor(x / self.period) * self.period
        out = np.where(local < self.c, 0.0, self.v0)
        return out if out.ndim else float(out)

    def as_dict(self) -> dict:
        return {"v0": self.v0, "c": self.c, "d": self.d}


def classify_point(x: float, lat: LatticeSpec) -> tuple[Region, int, float]:
    """Split ``x`` into ``(region, cell_index, local_x)``.

    ``x = cell_index * e + local_x`` with ``0 <= local_x < e``; points on an
    interface belong to the region on their right.
    """
    e = lat.period
    cell = math.floor(x / e)
    local = x - cell * e
    # floor can land one cell off when x/e rounds to an integer
    if local >= e:
        cell += 1
        local -= e
    elif local < 0:
        cell -= 1
        local += e
    region = Region.WELL if local < lat.c else Region.BARRIER
    return region, cell, local


@dataclass(frozen=True)
class Wavenumbers:
    regime: Regime
    k2: float
    k1: float | None = None
    k3: float | None = None

    @property
    def barrier_k(self) -> float:
        """Wavenumber used by the barrier basis (k1, k3, or 1 at threshold)."""
        if self.regime is Regime.ABOVE:
            return self.k1
        if self.regime is Regime.BELOW:
            return self.k3
        return 1.0

    def energy(self, v0: float) -> float:
        """Energy implied by the stored wavenumbers (inverse of :func:`wavenumbers`)."""
        if self.regime is Regime.ABOVE:
            return v0 + self.k1 ** 2
        if self.regime is Regime.BELOW:
            return v0 - self.k3 ** 2
        return self.k2 ** 2


def regime_of(energy: float, v0: float) -> Regime:
    if abs(energy - v0) <= THRESHOLD_WINDOW * max(1.0, v0):
        return Regime.THRESHOLD
    return Regime.ABOVE if energy > v0 else Regime.BELOW


def wavenumbers(energy: float, lat: LatticeSpec) -> Wavenumbers:
    if not energy > 0 or not math.isfinite(energy):
        raise DomainError(f"energy must be > 0, got {energy!r}")
    k2 = math.sqrt(TWO_M * energy) / HBAR
    regime = regime_of(energy, lat.v0)
    if regime is Regime.ABOVE:
        return Wavenumbers(regime, k2, k1=math.sqrt(TWO_M * (energy - lat.v0)) / HBAR)
    if regime is Regime.BELOW:
        return Wavenumbers(regime, k2, k3=math.sqrt(TWO_M * (lat.v0 - energy)) / HBAR)
    return Wavenumbers(regime, k2)


class BasisKind(str, enum.Enum):
    TRIG = "trig"      # (sin kx, cos kx)
    HYP = "hyp"        # (sinh kx, cosh kx)
    LINEAR = "linear"  # (x, 1)


def _canonical(kind: BasisKind, k: float, t):
    """Canonical pair and its first two derivatives, each shape (2, ...)."""
    t = np.asarray(t, dtype=float)
    if kind is BasisKind.TRIG:
        s, c = np.sin(k * t), np.cos(k * t)
        f = np.stack([s, c])
        df = np.stack([k * c, -k * s])
        d2f = -k * k * f
    elif kind is BasisKind.HYP:
        s, c = np.sinh(k * t), np.cosh(k * t)
        f = np.stack([s, c])
        df = np.stack([k * c, k * s])
        d2f = k * k * f
    else:
        f = np.stack([t, np.ones_like(t)])
        df = np.stack([np.ones_like(t), np.zeros_like(t)])
        d2f = np.zeros_like(f)
    return f, df, d2f


_CANONICAL_WRONSKIAN = {BasisKind.TRIG: -1.0, BasisKind.HYP: -1.0, BasisKind.LINEAR: -1.0}


@dataclass(frozen=True)
class BasisPair:
    """Two real independent solutions in one region.

    ``(phi1, phi2) = coeffs @ (f1, f2)`` evaluated at ``x - origin``, where
    ``(f1, f2)`` is the canonical pair of ``kind`` with wavenumber ``k``.
    """

    kind: BasisKind
    k: float
    origin: float = 0.0
    coeffs: tuple = ((1.0, 0.0), (0.0, 1.0))
    _matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.coeffs, dtype=float).reshape(2, 2)
        if abs(np.linalg.det(m)) == 0.0:
            raise DomainError("basis recombination matrix is singular")
        if self.kind is not BasisKind.LINEAR and not self.k > 0:
            raise DomainError(f"basis wavenumber must be > 0, got {self.k!r}")
        object.__setattr__(self, "_matrix", m)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix.copy()

    @property
    def wronskian(self) -> float:
        """``phi1 phi2' - phi1' phi2`` (position independent)."""
        scale = 1.0 if self.kind is BasisKind.LINEAR else self.k
        return float(np.linalg.det(self._matrix)) * _CANONICAL_WRONSKIAN[self.kind] * scale

    def canonical(self, x):
        return _canonical(self.kind, self.k, np.asarray(x, dtype=float) - self.origin)

    def evaluate(self, x):
        """Return ``(phi, dphi, d2phi)``, each of shape ``(2,) + shape(x)``."""
        f, df, d2f = self.canonical(x)
        m = self._matrix
        return (np.tensordot(m, f, axes=1), np.tensordot(m, df, axes=1),
                np.tensordot(m, d2f, axes=1))

    def phi1(self, x):
        return self.evaluate(x)[0][0]

    def phi2(self, x):
        return self.evaluate(x)[0][1]

    def recombined(self, matrix) -> "BasisPair":
        """Basis ``matrix @ (phi1, phi2)`` built on the same canonical pair."""
        m = np.asarray(matrix, dtype=float) @ self._matrix
        return BasisPair(self.kind, self.k, self.origin, tuple(map(tuple, m)))

    def shifted(self, origin: float) -> "BasisPair":
        return BasisPair(self.kind, self.k, origin, self.coeffs)


def basis_for_region(region: Region, wn: Wavenumbers, origin: float = 0.0) -> BasisPair:
    """Real solution pairs: trig in the well, trig/hyp/linear in the barrier."""
    if region is Region.WELL:
        return BasisPair(BasisKind.TRIG, wn.k2, origin)
    if wn.regime is Regime.ABOVE:
        return BasisPair(BasisKind.TRIG, wn.k1, origin)
    if wn.regime is Regime.BELOW:
        return BasisPair(BasisKind.HYP, wn.k3, origin)
    return BasisPair(BasisKind.LINEAR, 1.0, origin)


def _check_grid(grid, lat: LatticeSpec, min_points: int) -> tuple[np.ndarray, float]:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < min_points:
        raise GridError(f"need at least {min_points} grid points, got {grid.size}")
    steps = np.diff(grid)
    h = float(steps.mean())
    if np.any(steps <= 0):
        raise GridError("grid must be strictly increasing")
    if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
        raise GridError("grid must be uniform")
    first = classify_point(float(grid[0]), lat)
    last = classify_point(float(grid[-1]), lat)
    if first[:2] != last[:2]:
        raise GridError("grid crosses a region boundary")
    return grid, h


def schrodinger_residual(phi, energy: float, lat: LatticeSpec, grid) -> float:
    """Max of ``|-phi'' + (V - E) phi|`` over interior points, 3-point stencil."""
    grid, h = _check_grid(grid, lat, 3)
    phi = np.asarray(phi)
    if phi.shape != grid.shape:
        raise GridError("phi and grid must have the same length")
    v = lat.potential(grid[1:-1])
    d2 = (phi[2:] - 2.0 * phi[1:-1] + phi[:-2]) / (h * h)
    res = -(HBAR ** 2 / TWO_M) * d2 + (v - energy) * phi[1:-1]
    return float(np.max(np.abs(res)))
