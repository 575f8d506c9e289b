"""Kernel backend selection.

The hot graph kernels ship in two implementations: numba-jitted loops and a
pure-numpy path. The environment variable POOLEXP_BACKEND picks one:

* ``POOLEXP_BACKEND=numpy`` forces the numpy fallback,
* ``POOLEXP_BACKEND=numba`` requires numba and fails loudly if it is missing,
* unset, numba is used whenever it is importable.
"""

import os

_CHOICES = ("numba", "numpy")


def _detect() -> str:
    requested = os.environ.get("POOLEXP_BACKEND", "").strip().lower()
    if requested and requested not in _CHOICES:
        raise RuntimeError(
            f"POOLEXP_BACKEND must be one of {_CHOICES}, got {requested!r}"
        )
    try:
        import numba  # noqa: F401

        have_numba = True
    except ImportError:
        have_numba = False
    if requested == "numba" and not have_numba:
        raise RuntimeError("POOLEXP_BACKEND=numba, but numba is not importable")
    if requested:
        return requested
    return "numba" if have_numba else "numpy"


BACKEND = _detect()
USE_NUMBA = BACKEND == "numba"
