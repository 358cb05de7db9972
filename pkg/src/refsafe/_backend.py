"""Selects the compute backend at import time.

The compiled extension (``refsafe._speedups``) is preferred when it built;
otherwise the pure-numpy twins in ``refsafe._kernels`` are used.  Set
``REFSAFE_BACKEND=python`` to force the fallback (the benchmark in
``benchmarks/backend_bench.py`` compares the two), or
``REFSAFE_BACKEND=compiled`` to fail loudly when the extension is missing.
"""

from __future__ import annotations

import os

from . import _kernels as python_kernels

try:
    from . import _speedups as compiled_kernels  # type: ignore[attr-defined]
except ImportError:
    compiled_kernels = None

_requested = os.environ.get("REFSAFE_BACKEND", "").strip().lower()
if _requested == "python":
    active = python_kernels
elif _requested == "compiled":
    if compiled_kernels is None:
        raise ImportError(
            "REFSAFE_BACKEND=compiled but refsafe._speedups is not built; "
            "reinstall without REFSAFE_PURE_PYTHON=1"
        )
    active = compiled_kernels
elif _requested:
    raise ImportError(f"unknown REFSAFE_BACKEND value {_requested!r} (use 'python' or 'compiled')")
else:
    active = compiled_kernels if compiled_kernels is not None else python_kernels


def backend_name() -> str:
    """Name of the kernel backend in use ('compiled' or 'python')."""
    return active.BACKEND_NAME


def get_backend(name: str | None = None):
    """Return a kernel module by name, defaulting to the active one."""
    if name is None:
        return active
    if name == "python":
        return python_kernels
    if name == "compiled":
        if compiled_kernels is None:
            raise ImportError("compiled backend is not available")
        return compiled_kernels
    raise ValueError(f"unknown backend {name!r}")
