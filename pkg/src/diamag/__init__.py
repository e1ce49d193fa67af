"""Finite-volume magnetic Schrodinger operators and the thermodynamics of quasi-free gases.

Modules
-------
lattice
    Grid, potentials, Peierls-phase Hamiltonians.
spectral
    Eigendecompositions, heat semigroups, bound checks, numerical-range sectors.
contour
    Activity domains, analyticity strips and contour (Dunford) quadrature.
grand_canonical
    Pressure, analyticity probes, susceptibilities.
canonical
    Canonical partition functions and free energies.
thermo_limit
    Box-size scans, integrated density of states, extrapolation.
"""
from .exceptions import (AnalyticityRadiusError, BranchError, ConditioningError,
                         ConfigurationError, ContourError, ConvergenceError, DiamagError,
                         DomainError, ResourceError)
from .lattice import (BoxSpec, CoulombWells, FieldConfig, HamiltonianFamily, HamiltonianMatrix,
                      InversePowerWells, SinusoidalVectorPotential, TabulatedPotential,
                      ZeroPotential, ZeroVectorPotential, assemble_hamiltonian, build_grid)
from .spectral import (SectorEstimate, SpectralData, diamagnetic_check, eigendecompose,
                       heat_operator, hs_norm, kernel_bound_check, numerical_range_fit,
                       trace_norm)
from .contour import (CompactK, ContourSpec, build_contour, dunford_exp, dunford_log,
                      eta_for_compact, sector_contour, winding_number)
from .grand_canonical import (EnsembleParams, PressureFunction, analyticity_probe, pressure,
                              pressure_dunford, susceptibility_cauchy, susceptibility_fd)
from .canonical import (CanonicalParams, canonical_susceptibility, canonical_Z_contour,
                        canonical_Z_oracle, free_energy, grand_partition)
from .thermo_limit import (continuum_free_pressure, ids_estimate, limit_scan,
                           pressure_from_ids, richardson, weyl_exponent)

__version__ = "0.1.0"
