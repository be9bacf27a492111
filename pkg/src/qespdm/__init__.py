"""Quasi-exactly-solvable potentials for position-dependent-mass Schrodinger operators."""
from .algebra import AlgebraParams, R_coefficients, build_spectral_table, epsilon_roots, sl2_operator_matrix, spectrum
from .mapping import COULOMB, MORSE, SEXTIC, FamilySpec, Grid, assemble_psi, build_mapping, check_normalizable
from .massprofile import MassProfile, builtin, make_profile
from .oracle import discretize_von_roos, residual_eq2, solve_bound_states
from .potentials import MassOrdering, e_coulomb, e_morse, e_sextic, v_coulomb, v_general, v_morse, v_sextic

__all__ = [
    "AlgebraParams", "R_coefficients", "build_spectral_table", "epsilon_roots", "sl2_operator_matrix",
    "spectrum", "COULOMB", "MORSE", "SEXTIC", "FamilySpec", "Grid", "assemble_psi", "build_mapping",
    "check_normalizable", "MassProfile", "builtin", "make_profile", "discretize_von_roos",
    "residual_eq2", "solve_bound_states", "MassOrdering", "e_coulomb", "e_morse", "e_sextic",
    "v_coulomb", "v_general", "v_morse", "v_sextic",
]

__version__ = "0.1.0"
