"""Hyperbolic moment models of arbitrary order for the 1D relativistic Boltzmann equation."""

import os as _os

# RELMOMENT_THREADS caps BLAS/OpenMP threads; it must be applied before numpy loads.
_threads = _os.environ.get("RELMOMENT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .errors import AdmissibilityError, ConvergenceError  # noqa: E402
from .moment_model import MomentState, assemble_transport  # noqa: E402
from .orthopoly import batch_tables, build_tables  # noqa: E402
from .specfun import ThermoContext  # noqa: E402

__all__ = [
    "AdmissibilityError",
    "ConvergenceError",
    "MomentState",
    "ThermoContext",
    "assemble_transport",
    "batch_tables",
    "build_tables",
    "__version__",
]
