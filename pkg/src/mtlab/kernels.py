"""Kernel backend selection.

The compiled extension is used when present; setting ``MTLAB_PURE_PYTHON=1``
forces the interpreted source of the same module.
"""
import os

if os.environ.get("MTLAB_PURE_PYTHON") == "1":
    from . import _kernels as backend
    BACKEND = "python"
else:
    try:
        from . import _ckernels as backend
        BACKEND = "compiled"
    except ImportError:
        from . import _kernels as backend
        BACKEND = "python"

Stream = backend.Stream
FieldTable = backend.FieldTable
splitmix = backend.splitmix
riesz_batch = backend.riesz_batch
ba_batch = backend.ba_batch
ito_batch = backend.ito_batch
occupation_batch = backend.occupation_batch
exit_time_batch = backend.exit_time_batch
reversed_drift_batch = backend.reversed_drift_batch
sample_stationary_batch = backend.sample_stationary_batch

RIESZ_COLUMNS = backend.RIESZ_COLUMNS
BA_COLUMNS = backend.BA_COLUMNS


def load(name: str):
    """Import a specific backend: ``"compiled"`` or ``"python"``."""
    if name == "compiled":
        from . import _ckernels as mod
    elif name == "python":
        from . import _kernels as mod
    else:
        raise ValueError(f"unknown backend {name!r}")
    return mod
