"""Numerical laboratory for asymptotically linear Schrodinger problems
whose effective linear slope sits at the bottom of the essential spectrum.

Subpackages:
    ladder    exact rational bootstrap-exponent schedules and regularity classes
    model     potentials, nonlinearities and the hypothesis battery
    operator  discretized -Laplacian + V on a box, spectra, Morse indices
    solve     Newton solves, branch continuation, verification checks
    cli       configuration, orchestration, report persistence
"""

__version__ = "0.1.0"
