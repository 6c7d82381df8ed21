"""Carry reduced-action constants across an interface.

Continuity of S0, S0' and S0'' at the interface fixes the three constants
of the neighbouring region uniquely.  With ``u = mu w + nu`` and
``w = phi1/phi2`` on the target side,

    S0'  = mu w' / (1 + u^2)
    S0'' = S0' w''/w' - 2 u S0'^2

so ``u`` follows linearly from the first two derivatives, then ``mu`` from
``S0'`` and ``nu = u - mu w``.  ``l`` absorbs whatever multiple of pi keeps
the value itself continuous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .action import ActionConstants, action_arrays, eval_action
from .errors import DegenerateError
from .model import HBAR, BasisKind, BasisPair

_IDENTITY = ((1.0, 0.0), (0.0, 1.0))


@dataclass(frozen=True)
class InterfaceSolution:
    left: ActionConstants
    right: ActionConstants
    interface_x: float
    basis_left: BasisPair
    basis_right: BasisPair

    def residuals(self) -> tuple[float, float, float]:
        """Scaled mismatch of (S0, S0', S0'') at the interface."""
        a = eval_action(self.interface_x, self.basis_left, self.left)
        b = eval_action(self.interface_x, self.basis_right, self.right)
        return tuple(abs(u - v) / max(1.0, abs(u))
                     for u, v in ((a.s0, b.s0), (a.ds0, b.ds0), (a.d2s0, b.d2s0)))


def _canonical_scale(basis: BasisPair) -> float:
    return 1.0 if basis.kind is BasisKind.LINEAR else basis.k


def _is_canonical_at(basis: BasisPair, x: float) -> bool:
    return basis.origin == x and tuple(map(tuple, basis.matrix)) == _IDENTITY


def propagate_constants(left: ActionConstants, basis_left: BasisPair,
                        basis_right: BasisPair, interface_x: float) -> ActionConstants:
    """Constants on the ``basis_right`` side that continue ``left`` smoothly.

    The roles of the two sides are symmetric, so the same call propagates
    leftwards by swapping the bases.
    """
    if _is_canonical_at(basis_left, interface_x) and _is_canonical_at(basis_right, interface_x):
        # both ratios vanish there with slope k and no curvature
        mu = left.mu * _canonical_scale(basis_left) / _canonical_scale(basis_right)
        return ActionConstants(mu, left.nu, left.l)
    return _generic_solve(left, basis_left, basis_right, interface_x)


def _generic_solve(left, basis_left, basis_right, x):
    s0, ds0, d2s0, _ = (float(v) for v in action_arrays(x, basis_left, left))
    s1, s2 = ds0 / HBAR, d2s0 / HBAR

    (phi1, phi2), (_, dphi2), _ = basis_right.evaluate(x)
    phi1, phi2, dphi2 = float(phi1), float(phi2), float(dphi2)
    if abs(phi2) <= 1e-12 * max(1.0, abs(phi1)):
        raise DegenerateError(
            f"target basis ratio phi1/phi2 has a pole at interface x={x!r}")
    wr = basis_right.wronskian
    w = phi1 / phi2
    dw = -wr / phi2 ** 2
    d2w = 2.0 * wr * dphi2 / phi2 ** 3

    u = (s1 * d2w / dw - s2) / (2.0 * s1 * s1)
    mu = s1 * (1.0 + u * u) / dw
    nu = u - mu * w
    if not np.isfinite([mu, nu]).all() or mu == 0:
        raise DegenerateError("interface matching produced a degenerate mu")
    trial = ActionConstants(mu, nu, 0.0)
    s0_right = float(action_arrays(x, basis_right, trial)[0])
    return ActionConstants(mu, nu, (s0 - s0_right) / HBAR)


def match_interface(left: ActionConstants, basis_left: BasisPair,
                    basis_right: BasisPair, interface_x: float) -> InterfaceSolution:
    right = propagate_constants(left, basis_left, basis_right, interface_x)
    return InterfaceSolution(left, right, interface_x, basis_left, basis_right)


def remap_constants(k: ActionConstants, basis: BasisPair, new_basis: BasisPair,
                    at: float) -> ActionConstants:
    """Constants reproducing the same S0 after a change of basis in one region."""
    return _generic_solve(k, basis, new_basis, at)
