"""Step-kernel backend selection.

The compiled Cython backend is used when the extension built; otherwise the
pure-NumPy implementation takes over with identical semantics.  Fields
described by a callable (kernel_id -1) are always routed to the Python
backend by the callers.
"""

from . import _py

try:
    from . import _core
    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _core = None
    HAVE_COMPILED = False


def backend(kernel_id: int = 0, compiled: bool | None = None):
    """Pick the kernel module: compiled when available and the field is a
    closed-form catalog entry; ``compiled=False`` forces the NumPy backend."""
    if compiled is None:
        compiled = HAVE_COMPILED
    if compiled and HAVE_COMPILED and kernel_id >= 0:
        return _core
    return _py
