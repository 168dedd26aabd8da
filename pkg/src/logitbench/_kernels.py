"""Import-time selection between the compiled and pure-Python CD kernels.

Set LOGITBENCH_PURE_PYTHON=1 to force the fallback (used by the benchmark
and to debug kernel discrepancies).
"""

from __future__ import annotations

import os

from . import _cd_py

FAMILY_EN = _cd_py.FAMILY_EN
FAMILY_MCP = _cd_py.FAMILY_MCP
FAMILY_SCAD = _cd_py.FAMILY_SCAD

if os.environ.get("LOGITBENCH_PURE_PYTHON") == "1":
    HAVE_COMPILED = False
    cd_sweeps = _cd_py.cd_sweeps
    KERNEL_BACKEND = "python"
else:
    try:
        from . import _cd

        HAVE_COMPILED = True
        cd_sweeps = _cd.cd_sweeps
        KERNEL_BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build environment
        HAVE_COMPILED = False
        cd_sweeps = _cd_py.cd_sweeps
        KERNEL_BACKEND = "python"
