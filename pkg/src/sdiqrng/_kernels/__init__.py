"""Numerical kernel backends.

The hot loops of this package (the penalized Nelder-Mead searches behind
every certificate and output-length optimization, and the Walsh-Hadamard
butterfly behind the extractor property checks) live in a small compiled
extension, ``_core``.  A pure-Python twin, ``_ref``, implements exactly
the same arithmetic and is selected automatically when the extension is
unavailable.  Set SDIQRNG_BACKEND=python to force the fallback.

Both backends are bit-identical by construction; ``tests/test_kernels.py``
asserts it and ``benchmarks/bench_kernels.py`` compares their speed.
"""

import os

from . import _ref

KIND_DUAL = _ref.KIND_DUAL
KIND_PRIMAL = _ref.KIND_PRIMAL
KIND_LENGTH_XOR = _ref.KIND_LENGTH_XOR
KIND_LENGTH_MUL = _ref.KIND_LENGTH_MUL


def load_backend(name):
    """Return the kernel module for ``name`` ("compiled" or "python").

    Returns None if the compiled extension is requested but missing.
    """
    if name == "python":
        return _ref
    if name == "compiled":
        try:
            from . import _core
            return _core
        except ImportError:
            return None
    raise ValueError(f"unknown backend {name!r}")


if os.environ.get("SDIQRNG_BACKEND", "").lower() in ("python", "pure", "ref"):
    _impl = _ref
    BACKEND = "python"
else:
    _impl = load_backend("compiled")
    if _impl is None:
        _impl = _ref
        BACKEND = "python"
    else:
        BACKEND = "compiled"

minimize = _impl.minimize
evaluate = _impl.evaluate
wht_inplace = _impl.wht_inplace
