"""Selection of the time-stepping kernel backend.

Two interchangeable kernels exist: a Cython extension (pipeflex._newmark)
and the pure numpy/scipy reference (pipeflex._newmark_py).  The compiled one
is used when importable; PIPEFLEX_BACKEND=compiled|python forces the choice.
"""

import os

from . import _newmark_py
from .errors import ConfigError

try:
    from . import _newmark as _compiled
except ImportError:
    _compiled = None

_NAMES = {"python": _newmark_py, "compiled": _compiled}


def available_backends():
    """Names of the kernels importable in this installation."""
    return tuple(name for name, mod in _NAMES.items() if mod is not None)


def select_backend(name=None):
    """Resolve a kernel module from an explicit name or PIPEFLEX_BACKEND.

    Returns (module, name).  Asking for the compiled kernel when the
    extension did not build raises ImportError.
    """
    if name is None:
        name = os.environ.get("PIPEFLEX_BACKEND")
    if name is None:
        return (_compiled, "compiled") if _compiled is not None \
            else (_newmark_py, "python")
    if name not in _NAMES:
        raise ConfigError("unknown backend %r (expected 'compiled' or "
                          "'python')" % name)
    mod = _NAMES[name]
    if mod is None:
        raise ImportError("compiled kernel requested but the extension is "
                          "not built; reinstall with Cython available or "
                          "use PIPEFLEX_BACKEND=python")
    return mod, name
