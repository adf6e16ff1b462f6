"""Two-group neutron diffusion criticality solver.

Finite element discretization of the coupled fast/thermal diffusion
eigenvalue problem, a shift-invert Arnoldi eigensolver for the resulting
non-symmetric sparse pencil, and a convergence-study harness with a
closed-form constant-coefficient oracle.
"""

__version__ = "0.1.0"
