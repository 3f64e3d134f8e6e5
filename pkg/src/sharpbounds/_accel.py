"""Optional numba acceleration.

Hot kernels are written twice: a loop form compiled with ``numba.njit`` and a
vectorised numpy form.  Setting ``SHARPBOUNDS_DISABLE_NUMBA=1`` (or running
without numba installed) selects the numpy forms.
"""

from __future__ import annotations

import os
from typing import Callable, TypeVar

F = TypeVar("F", bound=Callable)

_FLAG = "SHARPBOUNDS_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in ("", "0", "false", "no")


try:  # pragma: no cover - exercised implicitly by the import
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and _numba_requested()


def njit(fn: F) -> F:
    """Compile ``fn`` with numba when available, else return it unchanged.

    The uncompiled function is still correct, just slow; dispatchers in
    :mod:`sharpbounds.kernels` route to numpy code when ``USE_NUMBA`` is off.
    """
    if _numba is None:
        return fn
    return _numba.njit(cache=True, nogil=True)(fn)  # type: ignore[return-value]


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
