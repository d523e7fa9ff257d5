"""Python access to the apsing core: spectral functionals, fibers and certificates."""

from ._core import (
    Boundary,
    Domain,
    Error,
    Laplacian,
    Nonlinearity,
    __version__,
    apply_F,
    balance_theta,
    cusp,
    four_preimages,
    functionals,
    run,
    trace_fiber,
    two_valued_lambda,
)

__all__ = [
    "Boundary",
    "Domain",
    "Error",
    "Laplacian",
    "Nonlinearity",
    "__version__",
    "apply_F",
    "balance_theta",
    "cusp",
    "four_preimages",
    "functionals",
    "run",
    "trace_fiber",
    "two_valued_lambda",
]
