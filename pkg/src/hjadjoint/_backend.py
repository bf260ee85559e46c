"""Select the compiled kernels when available, else the numpy fallback.

Set ``HJADJOINT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

_NAMES = (
    "upwind_euler_steps",
    "crandall_lions_quadratic_euler_steps",
    "stencil_step",
    "stencil_transpose_step",
    "hopf_lax_scan_quadratic",
)

if os.environ.get("HJADJOINT_PURE_PYTHON") == "1":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

upwind_euler_steps = _impl.upwind_euler_steps
crandall_lions_quadratic_euler_steps = _impl.crandall_lions_quadratic_euler_steps
stencil_step = _impl.stencil_step
stencil_transpose_step = _impl.stencil_transpose_step
hopf_lax_scan_quadratic = _impl.hopf_lax_scan_quadratic


def get_backend(name: str):
    """Module implementing the kernels for ``"compiled"`` or ``"python"``."""
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
