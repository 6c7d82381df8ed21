"""Bloch periodicity imposed on the reduced action.

The wavefunction ``R [alpha exp(iS0) + beta exp(-iS0)]`` is a Bloch wave
exactly when

    arctan(G tan(S0(x+e) + D)) = arctan(G tan(S0(x) + D)) + K e + n pi

with ``G = (|alpha| - |beta|)/(|alpha| + |beta|)`` and ``D = (a - b)/2``.
This module provides that defect, its Moebius form on ``exp(2 i S0)``, the
Bohm specialisation, the interface quantities A, B, W of the
Kronig-Penney cell, the solve for the action constants that make the
condition hold, and the end-to-end construction of S0 over several cells.
"""

from __future__ import annotations

import bisect as _bisect
import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import root

from .action import (ActionConstants, ActionSample, action_arrays, reconstruct_wavefunction,
                     third_derivative)
from .errors import (DomainError, ForbiddenEnergyError, GammaDegenerateError,
                     NoConvergenceError, PoleError, TanPoleError)
from .matching import propagate_constants
from .model import (HBAR, BasisPair, LatticeSpec, Regime, Region, Wavenumbers,
                    basis_for_region, wavenumbers)
from .spectrum import bloch_phase, bloch_wavenumber, dispersion_rhs


@dataclass(frozen=True)
class SuperpositionParams:
    """``alpha = alpha_mod exp(i a)``, ``beta = beta_mod exp(i b)``."""

    alpha_mod: float
    a: float
    beta_mod: float
    b: float

    def __post_init__(self):
        if self.alpha_mod < 0 or self.beta_mod < 0:
            raise DomainError("|alpha| and |beta| must be non-negative")
        if self.alpha_mod + self.beta_mod <= 0:
            raise DomainError("|alpha| + |beta| must be positive")

    @classmethod
    def from_gamma_delta(cls, gamma: float, delta: float) -> "SuperpositionParams":
        """Representative with ``|alpha| + |beta| = 1`` and ``a = -b = delta``."""
        if not -1.0 <= gamma <= 1.0:
            raise DomainError(f"gamma must lie in [-1, 1], got {gamma!r}")
        return cls((1.0 + gamma) / 2.0, delta, (1.0 - gamma) / 2.0, -delta)

    @classmethod
    def bohm(cls) -> "SuperpositionParams":
        return cls(1.0, 0.0, 0.0, 0.0)

    @property
    def gamma(self) -> float:
        return (self.alpha_mod - self.beta_mod) / (self.alpha_mod + self.beta_mod)

    @property
    def delta(self) -> float:
        return (self.a - self.b) / 2.0

    @property
    def alpha(self) -> complex:
        return cmath.rect(self.alpha_mod, self.a)

    @property
    def beta(self) -> complex:
        return cmath.rect(self.beta_mod, self.b)


def _require_gamma(sp: SuperpositionParams) -> float:
    gamma = sp.gamma
    if gamma == 0.0:
        raise GammaDegenerateError("|alpha| == |beta| (gamma = 0): arctan form is degenerate")
    return gamma


# -- Moebius form ----------------------------------------------------------

@dataclass(frozen=True)
class MobiusMap:
    p: complex
    q: complex
    m: complex
    n: complex

    @property
    def trace(self) -> complex:
        return self.p + self.n

    @property
    def determinant(self) -> complex:
        return self.p * self.n - self.q * self.m


def mobius_coefficients(sp: SuperpositionParams, ke: float) -> MobiusMap:
    g, dl = sp.gamma, sp.delta
    # exp(2iKe) - 1 without cancellation, and P, N regrouped around 4G
    wm1 = 2j * math.sin(ke) * cmath.exp(1j * ke)
    return MobiusMap(
        p=4 * g + (1 + g) ** 2 * wm1,
        q=(1 - g * g) * wm1 * cmath.exp(-2j * dl),
        m=-(1 - g * g) * wm1 * cmath.exp(2j * dl),
        n=4 * g - (1 - g) ** 2 * wm1,
    )


def apply_mobius(mp: MobiusMap, z: complex) -> complex:
    den = mp.m * z + mp.n
    if abs(den) < 1e-14:
        raise PoleError(f"Moebius denominator vanishes at z={z!r}")
    return (mp.p * z + mp.q) / den


# -- periodicity defects ---------------------------------------------------

def unwrapped_arctan(s0: float, gamma: float, delta: float) -> float:
    """Continuous ``arctan(gamma tan(s0/hbar + delta))``.

    Adds ``sign(gamma) pi`` per half-turn of the inner angle so the result
    follows ``s0`` across the poles of the tangent.
    """
    theta = s0 / HBAR + delta
    turns = math.floor(theta / math.pi + 0.5)
    reduced = theta - turns * math.pi
    return math.atan(gamma * math.tan(reduced)) + math.copysign(1.0, gamma) * turns * math.pi


def bloch_defect(s0_x: float, s0_xe: float, sp: SuperpositionParams,
                 ke: float) -> tuple[float, int]:
    """Distance of the periodicity condition from ``n pi``; returns ``(defect, n)``."""
    gamma = _require_gamma(sp)
    raw = unwrapped_arctan(s0_xe, gamma, sp.delta) - unwrapped_arctan(s0_x, gamma, sp.delta) - ke
    n = round(raw / math.pi)
    return abs(raw - n * math.pi), int(n)


def bohm_defect(s0_x: float, s0_xe: float, ke: float) -> tuple[float, int, float]:
    """Bohm case: ``S0(x+e) - S0(x) - hbar K e`` must be a multiple of ``pi hbar``.

    ``f_shift`` is ``F(x+e) - F(x)`` for ``F = (S0 - hbar K x)/(pi hbar)``.
    """
    raw = (s0_xe - s0_x) / HBAR - ke
    n_prime = round(raw / math.pi)
    return abs(raw - n_prime * math.pi), int(n_prime), raw / math.pi


# -- interface quantities of the cell --------------------------------------

@dataclass(frozen=True)
class InterfaceQuantities:
    a_val: float
    b_val: float
    w_val: float


@dataclass(frozen=True)
class _BarrierTrig:
    """Barrier factors: k, cos-like, tan-like, and the 'k tan(k d)' term."""

    k: float
    cos: float
    tan: float
    ktan: float


def _barrier_trig(wn: Wavenumbers, lat: LatticeSpec) -> _BarrierTrig:
    if wn.regime is Regime.ABOVE:
        kd = wn.k1 * lat.d
        return _BarrierTrig(wn.k1, math.cos(kd), math.tan(kd), wn.k1 * math.tan(kd))
    if wn.regime is Regime.BELOW:
        kd = wn.k3 * lat.d
        # continuation k1 -> i k3: tan(k1 d) -> i tanh, k1 tan(k1 d) -> -k3 tanh
        return _BarrierTrig(wn.k3, math.cosh(kd), math.tanh(kd), -wn.k3 * math.tanh(kd))
    raise DomainError("interface quantities are defined away from the threshold E = V0")


def interface_quantities(mu1: float, nu1: float, wn: Wavenumbers,
                         lat: LatticeSpec) -> InterfaceQuantities:
    """A, B and W of the cell for barrier constants ``(mu1, nu1)``.

    Below the barrier the hyperbolic analogues are used and ``w_val`` is the
    real factor ``(k2 tan k2c - k3 tanh k3d)(k3 tan k2c + k2 tanh k3d)``, so
    that ``W/(k1 k2)`` continues to ``w_val/(k3 k2)``.
    """
    bt = _barrier_trig(wn, lat)
    c2 = math.cos(wn.k2 * lat.c)
    if abs(bt.cos) < 1e-12 or abs(c2) < 1e-12:
        raise TanPoleError("k1 d or k2 c sits on a pole of tan")
    t2 = math.tan(wn.k2 * lat.c)
    k2 = wn.k2
    a_val = -mu1 * bt.tan + nu1
    b_val = bt.k / k2 * mu1 * t2 + nu1
    if wn.regime is Regime.ABOVE:
        w_val = (bt.ktan + k2 * t2) * (bt.k * t2 + k2 * bt.tan)
    else:
        w_val = (k2 * t2 - bt.k * bt.tan) * (bt.k * t2 + k2 * bt.tan)
    return InterfaceQuantities(a_val, b_val, w_val)


def b_minus_a_factored(mu1: float, wn: Wavenumbers, lat: LatticeSpec) -> float:
    """``B - A`` written as ``(mu1/k2)(k1 tan k2c + k2 tan k1d)``."""
    bt = _barrier_trig(wn, lat)
    k2 = wn.k2
    return mu1 / k2 * (bt.k * math.tan(k2 * lat.c) + k2 * bt.tan)


def squared_difference_identity(a_val: float, b_val: float, gamma: float) -> tuple[float, float]:
    """Both sides of ``G^2 (B-A)^2 = (1+G^2 B^2) + (1+G^2 A^2) - 2(1+G^2 AB)``."""
    g2 = gamma * gamma
    lhs = g2 * (b_val - a_val) ** 2
    rhs = (1 + g2 * b_val ** 2) + (1 + g2 * a_val ** 2) - 2 * (1 + g2 * a_val * b_val)
    return lhs, rhs


def phase_shift_residual(iq: InterfaceQuantities, gamma: float, ke: float) -> float:
    t = math.tan(ke)
    ga = gamma * iq.a_val
    return gamma * iq.b_val - (ga + t) / (1.0 - ga * t)


def cos_squared_residual(iq: InterfaceQuantities, gamma: float, ke: float) -> float:
    g2 = gamma * gamma
    a, b = iq.a_val, iq.b_val
    return math.cos(ke) ** 2 - (1 + g2 * a * b) ** 2 / ((1 + g2 * a * a) * (1 + g2 * b * b))


def slope_match_residual(iq: InterfaceQuantities, gamma: float, wn: Wavenumbers,
                  lat: LatticeSpec) -> float:
    """Relative mismatch of ``(1+G^2 B^2) cos^2 k2c = (1+G^2 A^2) cos^2 k1d``."""
    bt = _barrier_trig(wn, lat)
    g2 = gamma * gamma
    lhs = (1 + g2 * iq.b_val ** 2) * math.cos(wn.k2 * lat.c) ** 2
    rhs = (1 + g2 * iq.a_val ** 2) * bt.cos ** 2
    return (lhs - rhs) / max(abs(lhs), abs(rhs))


def curvature_match_residual(iq: InterfaceQuantities, mu1: float, gamma: float,
                  wn: Wavenumbers, lat: LatticeSpec) -> float:
    """Relative mismatch of the second-derivative condition at the cell edge."""
    bt = _barrier_trig(wn, lat)
    g2 = gamma * gamma
    k2 = wn.k2
    c2 = math.cos(k2 * lat.c)
    xb = (1 + g2 * iq.b_val ** 2) * c2 ** 2
    xa = (1 + g2 * iq.a_val ** 2) * bt.cos ** 2
    terms = (k2 * math.tan(k2 * lat.c) / xb,
             bt.ktan / xa,
             -mu1 * bt.k * g2 * iq.b_val / xb ** 2,
             mu1 * bt.k * g2 * iq.a_val / xa ** 2)
    return sum(terms) / max(abs(t) for t in terms)


# -- solving for the barrier constants -------------------------------------

@dataclass(frozen=True)
class CellBases:
    barrier: BasisPair  # region -d < x < 0, origin 0
    well: BasisPair     # region 0 < x < c, origin 0


def cell_bases(wn: Wavenumbers) -> CellBases:
    return CellBases(basis_for_region(Region.BARRIER, wn, 0.0),
                     basis_for_region(Region.WELL, wn, 0.0))


def _edge_samples(mu1, nu1, bases: CellBases, lat: LatticeSpec, delta: float):
    """(S0, S0', S0'') of the barrier at x = -d and of the well at x = c."""
    k_bar = ActionConstants(mu1, nu1, -delta)
    k_well = propagate_constants(k_bar, bases.barrier, bases.well, 0.0)
    left = [float(v) for v in action_arrays(-lat.d, bases.barrier, k_bar)[:3]]
    right = [float(v) for v in action_arrays(lat.c, bases.well, k_well)[:3]]
    return left, right


def _g_derivatives(s0, ds0, d2s0, gamma, delta):
    theta = s0 / HBAR + delta
    s1, s2 = ds0 / HBAR, d2s0 / HBAR
    sin_t = math.sin(theta)
    quad = 1.0 - (1.0 - gamma * gamma) * sin_t * sin_t
    g1 = gamma * s1 / quad
    g2 = gamma * s2 / quad + gamma * (1 - gamma * gamma) * math.sin(2 * theta) * s1 * s1 / quad ** 2
    return g1, g2


def constraint_residuals(mu1: float, nu1: float, energy: float, lat: LatticeSpec,
                         sp: SuperpositionParams) -> tuple[float, float]:
    """Scaled mismatch of the first and second derivative periodicity conditions.

    These are the pole-free forms of the two equations linking ``(mu1, nu1)``
    to the lattice; they hold in every regime.
    """
    wn = wavenumbers(energy, lat)
    gamma, delta = sp.gamma, sp.delta
    left, right = _edge_samples(mu1, nu1, cell_bases(wn), lat, delta)
    gl1, gl2 = _g_derivatives(*left, gamma, delta)
    gr1, gr2 = _g_derivatives(*right, gamma, delta)
    r1 = (gr1 - gl1) / (abs(gl1) + abs(gr1))
    r2 = (gr2 - gl2) / (abs(gl2) + abs(gr2) + gl1 * gl1 + gr1 * gr1)
    return r1, r2


def _periodicity_phase(mu1, nu1, wn, lat, sp) -> float:
    """``g(S0(c)) - g(S0(-d))`` for the cell built from ``(mu1, nu1)``."""
    left, right = _edge_samples(mu1, nu1, cell_bases(wn), lat, sp.delta)
    return (unwrapped_arctan(right[0], sp.gamma, sp.delta)
            - unwrapped_arctan(left[0], sp.gamma, sp.delta))


_MU_STARTS = tuple(s * 10.0 ** p for p in (-2, -1, 0, 1) for s in (1.0, -1.0))
_NU_STARTS = (0.0, 1.0, -1.0)
# deep bands below the barrier put (mu1, nu1) far out along mu1 ~ nu1
_EXTRA_MU = tuple(s * 10.0 ** p for p in (2, 3) for s in (1.0, -1.0))
_EXTRA_NU = (10.0, -10.0, 100.0, -100.0)
CONVERGENCE_TOL = 1e-12


def _starts():
    for mu0 in _MU_STARTS:
        for nu0 in _NU_STARTS:
            yield mu0, nu0
    for mu0 in _MU_STARTS + _EXTRA_MU:
        for nu0 in _NU_STARTS + _EXTRA_NU:
            if mu0 in _MU_STARTS and nu0 in _NU_STARTS:
                continue
            yield mu0, nu0


@dataclass(frozen=True)
class BlochConstants:
    mu1: float
    nu1: float
    n: int
    phase_defect: float


def bloch_constant_candidates(energy: float, lat: LatticeSpec, sp: SuperpositionParams,
                              ke: float, exhaustive: bool = True) -> list[BlochConstants]:
    """Distinct converged ``(mu1, nu1)`` from the multi-start solve.

    Sorted by the periodicity-phase defect relative to ``ke`` (best first).
    With ``exhaustive=False`` the search stops at the first start (in a
    fixed order) whose solution reproduces ``ke``.
    """
    _require_gamma(sp)
    point = bloch_wavenumber(energy, lat)
    if not point.allowed:
        raise ForbiddenEnergyError(
            f"E={energy!r} lies in a gap (cos Ke = {point.cos_ke:.6g})")
    wn = wavenumbers(energy, lat)

    def fun(v):
        try:
            return np.array(constraint_residuals(v[0], v[1], energy, lat, sp))
        except (ArithmeticError, ValueError):
            return np.array([1.0, 1.0])

    def accept(mu1, nu1):
        if any(math.isclose(mu1, f.mu1, rel_tol=1e-7, abs_tol=1e-12)
               and math.isclose(nu1, f.nu1, rel_tol=1e-7, abs_tol=1e-9) for f in found):
            return None
        raw = _periodicity_phase(mu1, nu1, wn, lat, sp) - ke
        n = round(raw / math.pi)
        cand = BlochConstants(mu1, nu1, int(n), abs(raw - n * math.pi))
        found.append(cand)
        return cand

    found: list[BlochConstants] = []
    attempts = []
    for start in _starts():
        sol = root(fun, start, method="hybr", options={"xtol": 1e-14})
        mu1, nu1 = (float(v) for v in sol.x)
        err = float(np.max(np.abs(fun(sol.x))))
        attempts.append((start, (mu1, nu1), err))
        if not (err < CONVERGENCE_TOL and math.isfinite(mu1) and mu1 != 0.0):
            continue
        cand = accept(mu1, nu1)
        if cand is None or exhaustive:
            continue
        # solutions come in (mu1, nu1), (-mu1, -nu1) pairs for Ke and -Ke
        if float(np.max(np.abs(fun([-mu1, -nu1])))) < CONVERGENCE_TOL:
            accept(-mu1, -nu1)
        if min(f.phase_defect for f in found) < 1e-10:
            break
    if not found:
        raise NoConvergenceError(
            f"no start converged for E={energy!r}, gamma={sp.gamma!r}", attempts)
    found.sort(key=lambda s: s.phase_defect)
    return found


def solve_bloch_constants(energy: float, lat: LatticeSpec, sp: SuperpositionParams,
                          ke: float) -> tuple[float, float]:
    """Barrier constants ``(mu1, nu1)`` making S0 Bloch periodic with phase ``ke``.

    Of the converged solutions, the one whose periodicity phase matches
    ``ke`` modulo pi is returned (``-ke`` gives the sign-flipped pair).
    """
    best = bloch_constant_candidates(energy, lat, sp, ke, exhaustive=False)[0]
    if best.phase_defect > 1e-8:
        raise NoConvergenceError(
            f"converged solutions do not reproduce Ke={ke!r} "
            f"(best phase defect {best.phase_defect:.3g})")
    return best.mu1, best.nu1


# -- dispersion through the action ----------------------------------------

def dispersion_via_action(energy: float, lat: LatticeSpec,
                          sp: SuperpositionParams | None = None) -> float:
    """``cos(K e)`` assembled from the interface quantities of the action.

    Uses ``(1+G^2 AB)/(1+G^2 A^2) = (1 + cos^2 k1d/cos^2 k2c - W cos^2 k1d/(k1 k2))/2``
    times ``cos k2c / cos k1d``; G drops out, so ``sp`` only matters for
    validation.  Falls back to the closed form at tangent poles and at the
    threshold.
    """
    wn = wavenumbers(energy, lat)
    if wn.regime is Regime.THRESHOLD:
        return dispersion_rhs(energy, lat)
    bt = _barrier_trig(wn, lat)
    k2 = wn.k2
    c2 = math.cos(k2 * lat.c)
    if abs(bt.cos) < 1e-12 or abs(c2) < 1e-12:
        return dispersion_rhs(energy, lat)
    t2 = math.tan(k2 * lat.c)
    if wn.regime is Regime.ABOVE:
        w_over = (bt.ktan + k2 * t2) * (bt.k * t2 + k2 * bt.tan) / (bt.k * k2)
    else:
        w_over = (k2 * t2 - bt.k * bt.tan) * (bt.k * t2 + k2 * bt.tan) / (bt.k * k2)
    cb2 = bt.cos * bt.cos
    ratio = 0.5 * (1.0 + cb2 / (c2 * c2) - w_over * cb2)
    return ratio * c2 / bt.cos


# -- end-to-end construction -----------------------------------------------

@dataclass(frozen=True)
class _Segment:
    lo: float
    hi: float
    region: Region
    cell: int
    basis: BasisPair
    constants: ActionConstants


class BlochAction:
    """Reduced action matched across several cells and Bloch periodic.

    The barrier ``-d < x < 0`` carries the solved constants
    ``(mu1, nu1, -delta)``; every other region is reached by matching S0,
    S0' and S0'' at the interfaces.
    """

    def __init__(self, energy, lat, sp, ke, mu1, nu1, cells=(-2, 3)):
        self.energy = energy
        self.lattice = lat
        self.sp = sp
        self.ke = ke
        self.mu1 = mu1
        self.nu1 = nu1
        self.wn = wavenumbers(energy, lat)
        self.cells = cells
        self._segments = self._build(cells)
        self._starts = [s.lo for s in self._segments]
        left = self.sample(-lat.d)
        right = self.sample(lat.c)
        if sp.gamma != 0.0:
            self.n = bloch_defect(left.s0, right.s0, sp, ke)[1]
        else:
            self.n = None

    @property
    def k_bloch(self) -> float:
        return self.ke / self.lattice.period

    @property
    def x_range(self) -> tuple[float, float]:
        return self._segments[0].lo, self._segments[-1].hi

    @property
    def segments(self):
        return list(self._segments)

    def _region_basis(self, region, cell):
        e, c = self.lattice.period, self.lattice.c
        if region is Region.BARRIER and cell == -1:
            return basis_for_region(region, self.wn, 0.0)
        origin = cell * e + (c if region is Region.BARRIER else 0.0)
        return basis_for_region(region, self.wn, origin)

    def _layout(self, cells):
        e, c = self.lattice.period, self.lattice.c
        out = []
        for cell in range(cells[0], cells[1] + 1):
            out.append((cell * e, cell * e + c, Region.WELL, cell))
            out.append((cell * e + c, (cell + 1) * e, Region.BARRIER, cell))
        return out

    def _build(self, cells):
        if not cells[0] <= -1 < cells[1]:
            raise DomainError("cell range must contain cells -1 and 0")
        layout = self._layout(cells)
        start = next(i for i, s in enumerate(layout) if s[2] is Region.BARRIER and s[3] == -1)
        segs = [None] * len(layout)
        lo, hi, region, cell = layout[start]
        basis = self._region_basis(region, cell)
        segs[start] = _Segment(lo, hi, region, cell, basis,
                               ActionConstants(self.mu1, self.nu1, -self.sp.delta))
        for i in range(start + 1, len(layout)):
            prev = segs[i - 1]
            lo, hi, region, cell = layout[i]
            basis = self._region_basis(region, cell)
            k = propagate_constants(prev.constants, prev.basis, basis, lo)
            segs[i] = _Segment(lo, hi, region, cell, basis, k)
        for i in range(start - 1, -1, -1):
            nxt = segs[i + 1]
            lo, hi, region, cell = layout[i]
            basis = self._region_basis(region, cell)
            k = propagate_constants(nxt.constants, nxt.basis, basis, hi)
            segs[i] = _Segment(lo, hi, region, cell, basis, k)
        return segs

    def segment_at(self, x: float) -> _Segment:
        """Segment containing ``x``; interfaces belong to the segment on their right."""
        lo, hi = self.x_range
        if not lo <= x <= hi:
            raise DomainError(f"x={x!r} outside constructed range [{lo}, {hi}]")
        i = _bisect.bisect_right(self._starts, x) - 1
        return self._segments[min(max(i, 0), len(self._segments) - 1)]

    def sample(self, x: float) -> ActionSample:
        seg = self.segment_at(x)
        s0, ds0, d2s0, branch = action_arrays(x, seg.basis, seg.constants)
        ds0 = float(ds0)
        return ActionSample(float(x), float(s0), ds0, float(d2s0),
                            abs(ds0 / HBAR) ** -0.5, int(branch))

    def third_derivative(self, x: float) -> float:
        seg = self.segment_at(x)
        return float(third_derivative(x, seg.basis, seg.constants))

    def samples(self, grid) -> list[ActionSample]:
        return [self.sample(float(x)) for x in grid]

    def wavefunction(self, x: float) -> complex:
        return reconstruct_wavefunction(x, self.sample(x), self.sp)


def construct_bloch_action(energy: float, lat: LatticeSpec, sp: SuperpositionParams,
                           cells=(-2, 3), ke: float | None = None) -> BlochAction:
    """Solve for the barrier constants and match S0 across ``cells``."""
    if ke is None:
        ke = bloch_phase(energy, lat)
    mu1, nu1 = solve_bloch_constants(energy, lat, sp, ke)
    return BlochAction(energy, lat, sp, ke, mu1, nu1, cells)
