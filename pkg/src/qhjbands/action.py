"""Reduced action ``S0 = arctan(mu phi1/phi2 + nu) + l`` and derived fields.

The principal-value arctan jumps by pi at every zero of ``phi2``.  Here the
action is evaluated as the continuous phase of

    z(x) = phi2 + i (mu phi1 + nu phi2),

which never vanishes (independent solutions, ``mu != 0``).  Along the
canonical pairs this phase has closed forms, so no sampling-based
unwrapping is involved and ``S0`` is single-valued in ``x``.  The branch
reference is the basis origin, where ``S0 = arctan(u(origin)) + l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstantError, GridError
from .model import HBAR, TWO_M, BasisKind, BasisPair, LatticeSpec, _check_grid


@dataclass(frozen=True)
class ActionConstants:
    mu: float
    nu: float
    l: float = 0.0

    def __post_init__(self):
        if self.mu == 0 or not math.isfinite(self.mu):
            raise ConstantError(f"mu must be finite and non-zero, got {self.mu!r}")
        if not (math.isfinite(self.nu) and math.isfinite(self.l)):
            raise ConstantError("nu and l must be finite")


@dataclass(frozen=True)
class ActionSample:
    x: float
    s0: float
    ds0: float
    d2s0: float
    r: float
    branch_count: int


def _z_coefficients(basis: BasisPair, k: ActionConstants):
    """Complex p, q with z = p f1 + q f2 on the canonical pair."""
    m = basis.matrix
    p = m[1, 0] + 1j * (k.mu * m[0, 0] + k.nu * m[1, 0])
    q = m[1, 1] + 1j * (k.mu * m[0, 1] + k.nu * m[1, 1])
    return p, q


def _phase_increment(basis: BasisPair, p: complex, q: complex, t):
    """Continuous arg z(origin + t) - arg z(origin)."""
    if basis.kind is BasisKind.TRIG:
        kt = basis.k * t
        big, small = (q - 1j * p) / 2, (q + 1j * p) / 2
        if abs(big) >= abs(small):
            ratio = small / big
            return kt + np.angle(1 + ratio * np.exp(-2j * kt)) - np.angle(1 + ratio)
        ratio = big / small
        return -kt + np.angle(1 + ratio * np.exp(2j * kt)) - np.angle(1 + ratio)
    if basis.kind is BasisKind.HYP:
        return np.angle((p * np.tanh(basis.k * t) + q) / q)
    return np.angle((p * t + q) / q)


def action_arrays(x, basis: BasisPair, k: ActionConstants):
    """Vectorised reduced action.

    Returns ``(s0, ds0, d2s0, branch_count)`` as arrays shaped like ``x``.
    """
    x = np.asarray(x, dtype=float)
    (phi1, phi2), (dphi1, dphi2), _ = basis.evaluate(x)
    re_z = phi2
    im_z = k.mu * phi1 + k.nu * phi2
    d_re = dphi2
    d_im = k.mu * dphi1 + k.nu * dphi2
    mod2 = re_z * re_z + im_z * im_z
    w = basis.wronskian
    ds0 = -HBAR * k.mu * w / mod2
    d2s0 = HBAR * k.mu * w * 2.0 * (re_z * d_re + im_z * d_im) / (mod2 * mod2)

    p, q = _z_coefficients(basis, k)
    if q.real != 0.0:
        base = math.atan(q.imag / q.real)
    else:
        base = math.copysign(math.pi / 2, -k.mu * w)
    theta = base + _phase_increment(basis, p, q, x - basis.origin)
    s0 = HBAR * (theta + k.l)

    with np.errstate(divide="ignore", invalid="ignore"):
        principal = np.arctan(im_z / re_z)
    principal = np.where(re_z == 0.0, np.copysign(math.pi / 2, ds0), principal)
    branch = np.rint((theta - principal) / math.pi).astype(int)
    return s0, ds0, d2s0, branch


def third_derivative(x, basis: BasisPair, k: ActionConstants):
    """Closed-form third derivative of S0, for cross-checking the differenced one."""
    x = np.asarray(x, dtype=float)
    (phi1, phi2), (dphi1, dphi2), (d2phi1, d2phi2) = basis.evaluate(x)
    re_z, im_z = phi2, k.mu * phi1 + k.nu * phi2
    d_re, d_im = dphi2, k.mu * dphi1 + k.nu * dphi2
    dd_re, dd_im = d2phi2, k.mu * d2phi1 + k.nu * d2phi2
    mod2 = re_z * re_z + im_z * im_z
    dmod2 = 2.0 * (re_z * d_re + im_z * d_im)
    ddmod2 = 2.0 * (d_re * d_re + d_im * d_im + re_z * dd_re + im_z * dd_im)
    w = basis.wronskian
    return HBAR * k.mu * w * (ddmod2 / mod2 ** 2 - 2.0 * dmod2 ** 2 / mod2 ** 3)


def eval_action(x: float, basis: BasisPair, k: ActionConstants) -> ActionSample:
    """Reduced action, its first two derivatives and the amplitude at ``x``."""
    if k.mu == 0:
        raise ConstantError("mu must be non-zero")
    s0, ds0, d2s0, branch = action_arrays(x, basis, k)
    ds0 = float(ds0)
    return ActionSample(float(x), float(s0), ds0, float(d2s0),
                        abs(ds0 / HBAR) ** -0.5, int(branch))


def amplitude_profile(grid, basis: BasisPair, k: ActionConstants) -> list[ActionSample]:
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise GridError("grid must be strictly increasing")
    s0, ds0, d2s0, branch = action_arrays(grid, basis, k)
    r = np.abs(ds0 / HBAR) ** -0.5
    return [ActionSample(float(x), float(a), float(b), float(c), float(rr), int(n))
            for x, a, b, c, rr, n in zip(grid, s0, ds0, d2s0, r, branch)]


def qshje_terms(ds0, d2s0, d3s0, potential, energy):
    """Pointwise ``(S')^2/2m + V - E - hbar^2/(4m) [3/2 (S''/S')^2 - S'''/S']``."""
    ds0 = np.asarray(ds0)
    schwarz = 1.5 * (d2s0 / ds0) ** 2 - d3s0 / ds0
    return ds0 ** 2 / TWO_M + potential - energy - HBAR ** 2 / (2.0 * TWO_M) * schwarz


def qshje_residual(grid, samples, energy: float, lat: LatticeSpec) -> float:
    """Max quantum Hamilton-Jacobi residual over the interior of ``grid``.

    ``S'''`` comes from a central difference of the analytic ``S''``.
    """
    grid, h = _check_grid(grid, lat, 5)
    if len(samples) != grid.size:
        raise GridError("samples and grid must have the same length")
    ds0 = np.array([s.ds0 for s in samples])
    d2s0 = np.array([s.d2s0 for s in samples])
    d3s0 = (d2s0[2:] - d2s0[:-2]) / (2.0 * h)
    res = qshje_terms(ds0[1:-1], d2s0[1:-1], d3s0, lat.potential(grid[1:-1]), energy)
    return float(np.max(np.abs(res)))


def qshje_residual_exact(grid, basis: BasisPair, k: ActionConstants, energy: float,
                         lat: LatticeSpec) -> float:
    """Same residual with the analytic third derivative (no differencing)."""
    grid = np.asarray(grid, dtype=float)
    _, ds0, d2s0, _ = action_arrays(grid, basis, k)
    res = qshje_terms(ds0, d2s0, third_derivative(grid, basis, k), lat.potential(grid), energy)
    return float(np.max(np.abs(res)))


def reconstruct_wavefunction(x: float, sample: ActionSample, sp) -> complex:
    """``R [alpha exp(i S0/hbar) + beta exp(-i S0/hbar)]``.

    ``sp`` is any object with complex ``alpha`` and ``beta`` attributes,
    normally a :class:`qhjbands.bloch.SuperpositionParams`.
    """
    phase = sample.s0 / HBAR
    return sample.r * (sp.alpha * complex(math.cos(phase), math.sin(phase))
                       + sp.beta * complex(math.cos(phase), -math.sin(phase)))
