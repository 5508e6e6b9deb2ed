"""JIT plumbing: numba-compiled hot kernels with a pure-Python fallback.

Set ``SPGEMMKIT_NO_NUMBA=1`` to skip JIT compilation entirely; the same
kernel source then runs under plain CPython/numpy. ``benchmarks/
compare_backends.py`` measures the gap between the two paths.
"""

import os

_TRUTHY = {"1", "true", "yes", "on"}


def _flag(name):
    return os.environ.get(name, "").strip().lower() in _TRUTHY


try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None

NUMBA_ENABLED = _njit is not None and not _flag("SPGEMMKIT_NO_NUMBA")


def hot(fn):
    """Compile ``fn`` with numba unless the fallback path is forced.

    Kernels decorated with this must stay nopython-compatible: plain loops
    over numpy arrays, no Python objects. When JIT is disabled the original
    function object is returned and `fn.py_func` style introspection is not
    available (the function *is* the Python version).
    """
    if NUMBA_ENABLED:
        return _njit(cache=True, nogil=True)(fn)
    return fn


def python_version(kernel):
    """Return the interpreted version of a kernel regardless of backend."""
    return getattr(kernel, "py_func", kernel)
