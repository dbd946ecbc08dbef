"""Kernel backend selection: compiled extension if present, numpy fallback.

Set ``ROCKMAP_NO_EXT=1`` to force the pure-numpy twin (used by tests and
the benchmark to compare both paths).
"""

from __future__ import annotations

import os

from . import _core_py

if os.environ.get("ROCKMAP_NO_EXT"):
    core = _core_py
else:
    try:
        from . import _core as core  # type: ignore[no-redef]
    except ImportError:
        core = _core_py

neighborhood_eigen = core.neighborhood_eigen
single_linkage = core.single_linkage
IS_COMPILED = core.IS_COMPILED
