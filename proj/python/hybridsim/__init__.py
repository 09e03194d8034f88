"""Hybrid quantum-classical phase-space simulator."""

from ._hybridsim import (
    BoundaryLeakError,
    ConfigError,
    DomainTooSmall,
    Error,
    IllPosedError,
    InvariantError,
    PhaseGrid,
    StabilityError,
    __version__,
    classical_marginal,
    compile_terms,
    dequantize,
    dump_terms,
    evolve,
    measure,
    product_state,
    quantize,
    quantum_marginal,
    run_scenario,
    validate_scenario,
)

__all__ = [
    "BoundaryLeakError",
    "ConfigError",
    "DomainTooSmall",
    "Error",
    "IllPosedError",
    "InvariantError",
    "PhaseGrid",
    "StabilityError",
    "__version__",
    "classical_marginal",
    "compile_terms",
    "dequantize",
    "dump_terms",
    "evolve",
    "measure",
    "product_state",
    "quantize",
    "quantum_marginal",
    "run_scenario",
    "validate_scenario",
]
