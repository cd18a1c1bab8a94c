"""Pick the compiled pair-sum core when it was built, else the numpy one."""

from . import _kcore_py

try:
    from . import _kcore as _compiled
except ImportError:  # extension not built
    _compiled = None

HAVE_COMPILED = _compiled is not None
DEFAULT = "compiled" if HAVE_COMPILED else "python"


def get_backend(name: str = "auto"):
    if name == "auto":
        name = DEFAULT
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel core is not available; rebuild the package")
        return _compiled
    if name == "python":
        return _kcore_py
    raise ValueError(f"unknown backend {name!r}")
