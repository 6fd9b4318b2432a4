"""Hermite-expansion multiple-relaxation-time lattice Boltzmann toolkit."""
from .collision import (
    CollisionError,
    MacroState,
    RelaxationSpec,
    bgk_collide,
    equilibrium_populations,
    irreducible_moments,
    macro_from_populations,
    mrt_collide,
    pressure_heatflux,
)
from .hermite import (
    CoeffSet,
    UnsupportedOrderError,
    a_poly,
    central_from_raw,
    dnk,
    equilibrium_coeffs,
    equilibrium_raw_coeffs,
    hermite_eval,
    moving_frame_hermite,
    raw_from_central,
    raw_from_central_collision,
    scale_hermite,
    shift_hermite,
)
from .irreps import IrrepParts, decompose, reassemble, relax_parts
from .modes import (
    DispersionResult,
    ModeExperiment,
    extract_amplitudes,
    fit_frequencies,
    init_plane_wave,
    run_mode_experiment,
    theoretical_dispersion,
    transport_from_relaxation,
)
from .solver import GasSpec, LatticeState, internal_energy_exchange, macro_fields, step, stream
from .symtensor import SymTensor
from .velset import (
    VelocitySet,
    builtin,
    coeffs_from_populations,
    derive_weights,
    populations_from_coeffs,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "CollisionError",
    "MacroState",
    "RelaxationSpec",
    "bgk_collide",
    "equilibrium_populations",
    "irreducible_moments",
    "macro_from_populations",
    "mrt_collide",
    "pressure_heatflux",
    "CoeffSet",
    "UnsupportedOrderError",
    "a_poly",
    "central_from_raw",
    "dnk",
    "equilibrium_coeffs",
    "equilibrium_raw_coeffs",
    "hermite_eval",
    "moving_frame_hermite",
    "raw_from_central",
    "raw_from_central_collision",
    "scale_hermite",
    "shift_hermite",
    "DispersionResult",
    "ModeExperiment",
    "extract_amplitudes",
    "fit_frequencies",
    "init_plane_wave",
    "run_mode_experiment",
    "theoretical_dispersion",
    "transport_from_relaxation",
    "VelocitySet",
    "builtin",
    "coeffs_from_populations",
    "derive_weights",
    "populations_from_coeffs",
    "validate",
    "IrrepParts",
    "decompose",
    "reassemble",
    "relax_parts",
    "GasSpec",
    "LatticeState",
    "internal_energy_exchange",
    "macro_fields",
    "step",
    "stream",
    "SymTensor",
]
