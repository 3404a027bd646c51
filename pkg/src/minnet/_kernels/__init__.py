"""Kernel backend selection.

Imports the compiled extension when it was built, otherwise falls back to
the pure-Python kernels. ``MINNET_PURE_KERNELS=1`` forces the fallback;
``use_backend`` swaps implementations at runtime (used by the benchmark).
Callers must go through this module (``_kernels.read_tl`` etc.), never the
backends directly, so a swap is visible everywhere.
"""

from __future__ import annotations

import os

from minnet._kernels import pure

_FUNCS = ("read_tl", "scan_elements", "encode_tl", "xor32", "visa_digest", "pass_digest")

BACKEND = "pure"


def load_compiled():
    """Return the compiled kernel module, or None when it is not built."""
    try:
        from minnet._kernels import _core
    except ImportError:
        return None
    return _core


def use_backend(name: str):
    """Bind this module's kernel functions to the named backend."""
    if name == "pure":
        mod = pure
    elif name == "compiled":
        mod = load_compiled()
        if mod is None:
            raise RuntimeError("compiled kernels are not built in this install")
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    g = globals()
    for fn in _FUNCS:
        g[fn] = getattr(mod, fn)
    g["BACKEND"] = mod.BACKEND
    return mod


if os.environ.get("MINNET_PURE_KERNELS") == "1" or load_compiled() is None:
    use_backend("pure")
else:
    use_backend("compiled")
