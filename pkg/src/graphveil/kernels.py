"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when
``GRAPHVEIL_PURE=1`` is set, the pure-Python module is used. Both expose the
same functions and produce identical bytes.
"""

from __future__ import annotations

import os

from graphveil import _kernels_py as pure

compiled = None
if os.environ.get("GRAPHVEIL_PURE", "") not in ("1", "true", "yes"):
    try:
        from graphveil import _kernels as compiled  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on build
        compiled = None

backend = compiled if compiled is not None else pure
BACKEND_NAME = "compiled" if compiled is not None else "python"

rle_encode = backend.rle_encode
rle_decode = backend.rle_decode
xor_stream = backend.xor_stream
train_kernel = backend.train_kernel
evaluate_kernel = backend.evaluate_kernel
busy_kernel = backend.busy_kernel
pick_index = backend.pick_index
