"""Excitation transport and disorder localization in coupled fluxonium chains."""

__version__ = "0.1.0"

from .circuit import (
    FluxoniumParams,
    QubitSite,
    SpectralData,
    build_flux_hamiltonian,
    coupling_from_inductances,
    flux_sweep,
    perturbative_fields,
    project_to_qubit,
    reference_params,
    solve_fluxonium,
    solve_qubit,
    susceptibility_eta,
    theta_zpf,
)
from .chain import (
    ChainSpec,
    ManyBodyOperator,
    assemble_hamiltonian,
    assemble_sweet_spot_tfim,
    basis_state,
    build_chain,
    uniform_chain,
)
from .evolution import (
    EvolutionRecord,
    dense_oracle_evolve,
    evolve,
    peak_stats,
    time_grid,
)

__all__ = [
    "FluxoniumParams", "QubitSite", "SpectralData", "build_flux_hamiltonian",
    "coupling_from_inductances", "flux_sweep", "perturbative_fields",
    "project_to_qubit", "reference_params", "solve_fluxonium", "solve_qubit",
    "susceptibility_eta", "theta_zpf",
    "ChainSpec", "ManyBodyOperator", "assemble_hamiltonian",
    "assemble_sweet_spot_tfim", "basis_state", "build_chain", "uniform_chain",
    "EvolutionRecord", "dense_oracle_evolve", "evolve", "peak_stats", "time_grid",
]
