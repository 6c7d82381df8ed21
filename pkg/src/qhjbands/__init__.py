"""Kronig-Penney band structure through the quantum reduced action."""

from .action import (ActionConstants, ActionSample, amplitude_profile, eval_action,
                     qshje_residual, qshje_residual_exact, reconstruct_wavefunction)
from .bloch import (BlochAction, MobiusMap, SuperpositionParams, apply_mobius,
                    bloch_defect, bohm_defect, construct_bloch_action,
                    dispersion_via_action, interface_quantities, mobius_coefficients,
                    solve_bloch_constants)
from .errors import (BandError, ConstantError, DegenerateError, DomainError,
                     ForbiddenEnergyError, GammaDegenerateError, GridError,
                     NoConvergenceError, PoleError, TanPoleError)
from .matching import InterfaceSolution, match_interface, propagate_constants
from .model import (BasisKind, BasisPair, LatticeSpec, Regime, Region, Wavenumbers,
                    basis_for_region, classify_point, schrodinger_residual, wavenumbers)
from .spectrum import (Band, BlochPoint, bloch_wavenumber, dispersion_rhs, find_bands,
                       transfer_matrix_oracle)

__version__ = "0.1.0"
