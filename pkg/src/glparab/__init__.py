"""Numerical toolkit for 2x2 weakly coupled parabolic Neumann systems.

Submodules
----------
fields      grids, quadrature, interpolation, finite differences
potentials  closed-form / sampled symmetric 2x2 potentials
spectral    vector Sturm-Liouville Neumann spectra
forward     eigenfunction-expansion and finite-difference forward solvers
goursat     characteristic-coordinate hyperbolic solvers on triangles
kernel      transformation-kernel construction and application
peeling     exponential-sum extraction of spectral data from traces
verify      boundary-data comparison and the uniqueness pipeline
corpus      built-in desk-scale test problems
cli         glparab command-line entry point

Imports are lazy so the CLI can pin thread environment variables before
numpy loads.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "fields",
    "potentials",
    "spectral",
    "forward",
    "goursat",
    "kernel",
    "peeling",
    "verify",
    "corpus",
    "config",
    "fileio",
    "errors",
    "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
