"""Pseudospectral toolbox for a capillary compressible flow model.

Layout:

* :mod:`artifact.spectral` — periodic grids, Fourier-side fields,
  radial multipliers, Leray projection, Lᵖ norms.
* :mod:`artifact.dyadic` — smooth dyadic frequency decomposition, Besov and
  Chemin–Lerner norms, paraproducts, Bernstein checks.
* :mod:`artifact.model` — constitutive laws, the change of dependent
  variable, the perturbation-form right-hand sides and their term list.
* :mod:`artifact.propagators` — the 2×2 acoustic mode propagator, the
  dispersive–diffusive semigroup, the complex z diagnostic and its Duhamel
  reconstruction, the Strang integrator.
* :mod:`artifact.incompressible` — the incompressible companion solver.
* :mod:`artifact.experiments` — functionals, initial-data recipes,
  power-law fits, and the scaling studies.
* :mod:`artifact.cli` — config parsing, result bundles, subcommands.
"""

from artifact.model import MaterialLaws, State, to_perturbation, to_primitive
from artifact.spectral import (
    FourierMultiplier,
    Grid,
    SpectralField,
    apply_multiplier,
    lambda_pow,
    leray_split,
    lp_norm,
    op_H,
    op_U,
    op_U_inv,
    wavevector,
)

__all__ = [
    "FourierMultiplier",
    "Grid",
    "MaterialLaws",
    "SpectralField",
    "State",
    "apply_multiplier",
    "lambda_pow",
    "leray_split",
    "lp_norm",
    "op_H",
    "op_U",
    "op_U_inv",
    "to_perturbation",
    "to_primitive",
    "wavevector",
]

__version__ = "0.1.0"
